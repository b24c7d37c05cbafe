#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gsim {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A state does not carry a field (or carries the wrong kind) required by a projection or rule.
class SchemaError : public Error {
  public:
    using Error::Error;
};

/// Numeric argument outside the domain of a distribution or metric.
class DomainError : public Error {
  public:
    using Error::Error;
};

class SizeError : public Error {
  public:
    using Error::Error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Syntax error in DSL text or a dataset file. Line/column are 1-based; 0 means unknown.
class ParseError : public Error {
  public:
    ParseError(const std::string& message, std::size_t line, std::size_t column = 0)
        : Error(format(message, line, column)), line_(line), column_(column) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

  private:
    static std::string format(const std::string& message, std::size_t line, std::size_t column) {
        if (line == 0) return message;
        std::string out = "line " + std::to_string(line);
        if (column != 0) out += ", column " + std::to_string(column);
        return out + ": " + message;
    }

    std::size_t line_;
    std::size_t column_;
};

class EvalError : public Error {
  public:
    using Error::Error;
};

/// Failure inside a rule while stepping; carries the offending rule index.
class StepError : public Error {
  public:
    StepError(const std::string& message, std::size_t rule_index)
        : Error("rule " + std::to_string(rule_index) + ": " + message), rule_index_(rule_index) {}
    [[nodiscard]] std::size_t rule_index() const noexcept { return rule_index_; }

  private:
    std::size_t rule_index_;
};

class ProviderError : public Error {
  public:
    using Error::Error;
};

/// Raised when model output cannot be turned into a usable config. The message is
/// meant to be fed back into a corrective prompt.
class ExtractionError : public Error {
  public:
    using Error::Error;
};

} // namespace gsim
