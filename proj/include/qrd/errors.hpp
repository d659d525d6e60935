#pragma once

#include <stdexcept>
#include <string>

namespace qrd {

// Error categories map onto CLI exit codes: config 2, data 3, numeric 4.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Distinct dataset-file failure modes.
class BadMagicError : public DataError {
public:
    explicit BadMagicError(const std::string& msg) : DataError(msg) {}
};

class BadVersionError : public DataError {
public:
    explicit BadVersionError(const std::string& msg) : DataError(msg) {}
};

class TruncatedFileError : public DataError {
public:
    explicit TruncatedFileError(const std::string& msg) : DataError(msg) {}
};

class ChecksumError : public DataError {
public:
    explicit ChecksumError(const std::string& msg) : DataError(msg) {}
};

}  // namespace qrd
