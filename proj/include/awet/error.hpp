#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace awet {

// Base of every error the toolkit throws. The CLI maps each subclass onto a
// distinct nonzero exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

class InvalidInput : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class NumericOverflow : public Error {
public:
    NumericOverflow(const std::string& what, std::size_t layer)
        : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
    std::size_t layer() const noexcept { return layer_; }
    int exit_code() const noexcept override { return 3; }

private:
    std::size_t layer_;
};

class GenerationFailure : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

class MissingAnnotation : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 5; }
};

class SignViolation : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 6; }
};

class EmptyBuffer : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 7; }
};

class InsufficientCorpus : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 8; }
};

class UndefinedTest : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 9; }
};

class AlignmentError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 10; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 11; }
};

}  // namespace awet
