#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stitchsim {

// Bad input: malformed files, violated preconditions, inconsistent configs.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A DXF document that could not be read. line() is 1-based, 0 when unknown.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Failures that happen while a valid setup is running (lost tracking,
// nothing found in an image, ...).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace stitchsim
