#pragma once

#include <stdexcept>
#include <string>

namespace transnet {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

/// Tensor extents do not line up with what an operation expects.
class ShapeError : public Error {
 public:
    using Error::Error;
};

/// Malformed input data: bad files, invalid interval lists, empty pools.
class DataError : public Error {
 public:
    using Error::Error;
};

/// Non-finite values or divergence in numeric code.
class NumericError : public Error {
 public:
    using Error::Error;
};

}  // namespace transnet
