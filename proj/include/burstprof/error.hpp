#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace burstprof {

// Base for every error raised by the library. Callers that only care about
// "did it work" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::string input, const std::string& reason, std::size_t line = 0)
      : Error(format(input, reason, line)), input_(std::move(input)), line_(line) {}

  const std::string& input() const noexcept { return input_; }
  // 1-based line number, 0 when not reading a file
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& input, const std::string& reason,
                            std::size_t line) {
    std::string msg = line ? "line " + std::to_string(line) + ": " : std::string{};
    return msg + reason + " ('" + input + "')";
  }

  std::string input_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& what)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  InsufficientDataError(std::size_t have, std::size_t need)
      : Error("insufficient data: " + std::to_string(have) + " samples, need " +
              std::to_string(need)),
        have_(have), need_(need) {}
  std::size_t have() const noexcept { return have_; }
  std::size_t need() const noexcept { return need_; }

 private:
  std::size_t have_;
  std::size_t need_;
};

class UnsupportedFamilyError : public Error {
 public:
  using Error::Error;
};

class NoThresholdError : public Error {
 public:
  using Error::Error;
};

class SeparationError : public Error {
 public:
  explicit SeparationError(std::string column)
      : Error("complete separation detected on column '" + column + "'"),
        column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class RankDeficiencyError : public Error {
 public:
  explicit RankDeficiencyError(std::string column)
      : Error("design matrix is rank deficient at column '" + column + "'"),
        column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

}  // namespace burstprof
