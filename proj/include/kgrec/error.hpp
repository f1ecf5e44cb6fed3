#pragma once

#include <stdexcept>
#include <string>

namespace kgrec {

// Bad input data: malformed files, schema mismatches, unknown labels.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A request that cannot be satisfied by the data it was given
// (e.g. no valid tail corruption exists for a fully connected row).
class Unsatisfiable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace kgrec
