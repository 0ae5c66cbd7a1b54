#pragma once

#include <stdexcept>
#include <string>

namespace metafilter {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Tensor / array dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "shape_error"; }
};

/// A value lies outside its documented domain.
class ValueError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "value_error"; }
};

/// A file could not be parsed or failed validation.
class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "format_error"; }
};

/// An operation was invoked in a state that forbids it.
class StateError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "state_error"; }
};

}  // namespace metafilter
