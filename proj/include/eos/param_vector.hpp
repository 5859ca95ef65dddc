#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <utility>

#include "eos/errors.hpp"
#include "eos/linalg.hpp"

namespace eos {

/// Optimization variable. Construction rejects NaN/Inf; the dimension is
/// checked against the cost on every evaluation.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Vector entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (!std::isfinite(entries_[i]))
        throw ContractViolation("ParamVector: non-finite entry at index " + std::to_string(i));
  }
  ParamVector(std::initializer_list<double> init) : ParamVector(Vector(init)) {}

  std::size_t size() const { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }
  const Vector& values() const { return entries_; }
  operator std::span<const double>() const { return entries_; }

 private:
  Vector entries_;
};

}  // namespace eos
