#pragma once

#include <stdexcept>
#include <string>

namespace autoseqrec {

/// Expected failure (bad input, I/O, corrupt file). The CLI reports these without a trace.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument combination or out-of-range configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace autoseqrec
