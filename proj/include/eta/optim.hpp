#pragma once

#include <vector>

#include "eta/param.hpp"

namespace eta {

// AdamW: Adam moments on gradients, weight decay applied decoupled from the
// adaptive step. Step order follows parameter registration order.
class AdamW {
 public:
  explicit AdamW(std::vector<Param*> params, double lr = 3e-4, double weight_decay = 0.01,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  std::vector<Param*> params_;
  std::vector<Matrix> m_, v_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace eta
