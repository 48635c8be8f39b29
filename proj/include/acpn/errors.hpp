#pragma once

#include <stdexcept>
#include <string>

namespace acpn {

/// Parse failure in a network, snapshot, or cases file. Carries 1-based
/// line/column of the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, int line, int column)
      : std::runtime_error("line " + std::to_string(line) + ", col " +
                           std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// The entered evidence has probability zero under the network.
class ZeroProbabilityEvidence : public std::runtime_error {
 public:
  explicit ZeroProbabilityEvidence(const std::string& what)
      : std::runtime_error(what) {}
};

/// Joint enumeration was requested on a network above the size guard.
class StateSpaceTooLarge : public std::runtime_error {
 public:
  explicit StateSpaceTooLarge(const std::string& what)
      : std::runtime_error(what) {}
};

/// Interval with hi == lo; no sample size can be derived.
class DegenerateInterval : public std::invalid_argument {
 public:
  explicit DegenerateInterval(const std::string& what)
      : std::invalid_argument(what) {}
};

/// Interval so wide the implied equivalent sample size is not positive.
class TooWideInterval : public std::invalid_argument {
 public:
  explicit TooWideInterval(const std::string& what)
      : std::invalid_argument(what) {}
};

}  // namespace acpn
