#pragma once

#include <stdexcept>
#include <string>

namespace diarkit {

// Base of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (RTTM, UEM, trial lists, configs).
class ParseError : public Error {
 public:
  ParseError(const std::string &source, int line, const std::string &what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Audio or binary file that cannot be handled.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Protocol / split / configuration violations.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the given inputs (e.g. no reference speech).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace diarkit
