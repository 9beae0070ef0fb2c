#pragma once

#include <stdexcept>
#include <string>

namespace harmalign {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value that is accepted syntactically but has no
/// implemented semantics.
class Unsupported : public Error {
 public:
  using Error::Error;
};

}  // namespace harmalign
