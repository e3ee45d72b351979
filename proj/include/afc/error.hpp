#pragma once

#include <stdexcept>
#include <string>

namespace afc {

// Error taxonomy. Exit codes: 0 success, 1 internal, 2 usage/config, 3 data.
enum class ErrorKind { Internal = 1, Usage = 2, Data = 3 };

class AfcError : public std::runtime_error {
public:
    AfcError(ErrorKind kind, std::string msg)
        : std::runtime_error(std::move(msg)), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class UsageError : public AfcError {
public:
    explicit UsageError(std::string msg) : AfcError(ErrorKind::Usage, std::move(msg)) {}
};

class DataError : public AfcError {
public:
    explicit DataError(std::string msg) : AfcError(ErrorKind::Data, std::move(msg)) {}
};

// Parse failures are a flavor of data error (bad input files).
class ParseError : public DataError {
public:
    explicit ParseError(std::string msg) : DataError(std::move(msg)) {}
};

class TrainingError : public AfcError {
public:
    explicit TrainingError(std::string msg) : AfcError(ErrorKind::Internal, std::move(msg)) {}
};

}  // namespace afc
