#pragma once

#include <stdexcept>
#include <string>

namespace collab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct SingularMatrixError : Error {
    using Error::Error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

// Raised when Monte Carlo results contradict an identity that must hold.
struct ConsistencyError : Error {
    using Error::Error;
};

}  // namespace collab
