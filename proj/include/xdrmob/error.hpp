#pragma once

#include <stdexcept>
#include <string>

namespace xdrmob {

/// Bad or insufficient input data. The CLI maps this to exit status 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Clustering cannot produce the requested number of groups.
class DegeneratePopulationError : public InputError {
 public:
  using InputError::InputError;
};

class ThresholdFitError : public InputError {
 public:
  using InputError::InputError;
};

class TrainingError : public InputError {
 public:
  using InputError::InputError;
};

/// Two artifacts that must agree (tables, thresholds, users) do not.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace xdrmob
