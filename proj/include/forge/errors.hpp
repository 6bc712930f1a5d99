#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Error taxonomy mapped to CLI exit statuses:
//   ConfigError -> 1, DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

}  // namespace forge
