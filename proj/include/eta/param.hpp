#pragma once

#include <string>
#include <utility>

#include "eta/matrix_ops.hpp"

namespace eta {

// A trainable weight with its gradient accumulator.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool decay = true;  // decoupled weight decay applies

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols, bool decay_ = true)
      : name(std::move(n)),
        value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)),
        decay(decay_) {}

  void zero_grad() { grad.setZero(); }
};

}  // namespace eta
