#pragma once

#include <stdexcept>
#include <string>

namespace geosynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input: files, schemas, configs, arguments.
/// The CLI maps this to exit status 1.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace geosynth
