#pragma once

#include <stdexcept>
#include <string>

namespace fblin {

// Bad dimensions, malformed documents, inconsistent configuration.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trajectory went non-finite or unbounded; carries the sample index.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long sample)
      : std::runtime_error(what + " (sample " + std::to_string(sample) + ")"),
        sample_(sample) {}
  long sample() const { return sample_; }

 private:
  long sample_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fblin
