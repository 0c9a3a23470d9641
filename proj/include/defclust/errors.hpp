#pragma once

#include <stdexcept>
#include <string>

namespace defclust {

// Invalid inputs are reported with std::invalid_argument. The two types below
// separate failures the command-line front end maps to distinct exit codes.

/// Malformed or schema-violating configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite or otherwise unusable state.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace defclust
