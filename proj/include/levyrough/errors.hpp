#pragma once

#include <stdexcept>
#include <string>

namespace levyrough {

// Bad input: schema, ranges, preconditions. CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Point outside the domain of a path function or map.
class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Configured size cap exceeded.
class SizeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A numeric tolerance was breached. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace levyrough
