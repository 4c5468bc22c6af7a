#pragma once

#include <stdexcept>
#include <string>

namespace fbs {

// Invalid configuration, scenario, or input data shape.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage ran before the artifacts it needs exist.
class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged (NaN loss and similar).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitDependency = 3,
  kExitNumerical = 4,
};

}  // namespace fbs
