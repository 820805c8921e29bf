#pragma once

#include <stdexcept>
#include <string>

namespace mpmoe {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration values (caught before any work starts).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Problems with input data: files, columns, values, checkpoints.
class DataError : public Error {
public:
    using Error::Error;
};

class MalformedFileError : public DataError {
public:
    using DataError::DataError;
};

class MissingColumnError : public DataError {
public:
    using DataError::DataError;
};

class TimeGapError : public DataError {
public:
    using DataError::DataError;
};

class SchemaMismatchError : public DataError {
public:
    using DataError::DataError;
};

class EmptyDatasetError : public DataError {
public:
    using DataError::DataError;
};

// Numerical failure during training or evaluation.
class NumericError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public NumericError {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + what),
          epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

} // namespace mpmoe
