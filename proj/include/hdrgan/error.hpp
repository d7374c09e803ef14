#pragma once

#include <stdexcept>
#include <string>

namespace hdrgan {

// Base of every error raised by the library. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// A non-finite loss was produced during optimisation.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, std::string last_checkpoint)
        : NumericError(what), last_checkpoint_(std::move(last_checkpoint)) {}

    const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }

private:
    std::string last_checkpoint_;
};

}  // namespace hdrgan
