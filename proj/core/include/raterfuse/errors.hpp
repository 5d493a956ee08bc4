#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace raterfuse {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input. line is 1-based (0 when unknown); column is the CSV column
// or JSON key that failed, empty when the whole row is at fault.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::string column)
        : Error(what), line_(line), column_(std::move(column)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::string column_;
};

// Input parsed but breaks a domain invariant (duplicate ids, verdict/feature
// inconsistencies, wrong embedding dimension).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Bad configuration value. field() names the offending key.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace raterfuse
