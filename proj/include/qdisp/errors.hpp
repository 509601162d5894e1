#pragma once

#include <stdexcept>
#include <string>

namespace qdisp {

// Bad argument or parameter outside an operation's domain (negative N, bad mode index, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not produce a trustworthy value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The Fock-space truncation is too small for the requested probe.
class TruncationError : public NumericalError {
 public:
  TruncationError(const std::string& what, double tail_mass, int dim)
      : NumericalError(what), tail_mass_(tail_mass), dim_(dim) {}
  double tail_mass() const noexcept { return tail_mass_; }
  int dim() const noexcept { return dim_; }

 private:
  double tail_mass_;
  int dim_;
};

// The RLD operator needs rho^{-1}; thrown for rank-deficient probes.
class PureStateError : public NumericalError {
 public:
  PureStateError() : NumericalError("RLD undefined for pure states") {}
};

}  // namespace qdisp
