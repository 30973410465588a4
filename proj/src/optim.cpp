#include "eta/optim.hpp"

#include <cmath>

namespace eta {

AdamW::AdamW(std::vector<Param*> params, double lr, double weight_decay, double beta1,
             double beta2, double eps)
    : params_(std::move(params)),
      lr_(lr),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i].array() + (1.0 - beta2_) * p.grad.array().square();
    Matrix mhat = m_[i] / bc1;
    Matrix vhat = v_[i] / bc2;
    p.value.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
    if (p.decay && weight_decay_ > 0.0) p.value *= (1.0 - lr_ * weight_decay_);
  }
}

void AdamW::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

}  // namespace eta
