#pragma once

#include <stdexcept>
#include <string>

namespace fdri {

// Precondition violated by the caller (bad dimensions, parameters out of range).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Gram matrix too ill-conditioned for the direct solve.
class RankDeficiency : public std::runtime_error {
 public:
  RankDeficiency(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

// An internal numerical invariant failed (e.g. non-real circulant output).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stored digest does not match the data it claims to describe.
class ProvenanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fdri
