#pragma once

#include <Eigen/Dense>
#include <cmath>

// Dense kernels shared across the pipeline. Everything here is a pure free
// function over Eigen expressions; scalar type follows the argument.

namespace eta {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// Column-wise softmax over the row (token) axis, stabilized by subtracting
// each column max before exponentiation.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
column_softmax(const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = g;
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    auto col = out.col(k);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
  return out;
}

// Row-wise softmax (used by attention), stabilized per row.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
row_softmax(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = s;
  for (Eigen::Index n = 0; n < out.rows(); ++n) {
    auto row = out.row(n);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return out;
}

// Divides each column by its sum; an all-zero column stays all-zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
column_sum_normalize(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = m;
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    Scalar s = out.col(k).sum();
    if (s != Scalar(0)) out.col(k) /= s;
  }
  return out;
}

// Weighted negative log-likelihood: -sum_{n,k} delta(n,k) * log(alpha(n,k)).
// log is floored at 1e-12 so degenerate columns do not yield -inf.
template <typename DerivedA, typename DerivedD>
typename DerivedA::Scalar awakening_loss(const Eigen::MatrixBase<DerivedA>& alpha,
                                         const Eigen::MatrixBase<DerivedD>& delta) {
  using Scalar = typename DerivedA::Scalar;
  if (alpha.rows() != delta.rows() || alpha.cols() != delta.cols())
    throw std::invalid_argument("awakening_loss: shape mismatch between alpha and delta");
  const Scalar floor = Scalar(1e-12);
  Scalar loss = 0;
  for (Eigen::Index k = 0; k < alpha.cols(); ++k)
    for (Eigen::Index n = 0; n < alpha.rows(); ++n)
      loss -= delta(n, k) * std::log(std::max(alpha(n, k), floor));
  return loss;
}

// Gradient of awakening_loss with respect to the pre-softmax scores g, given
// alpha = column_softmax(g): dL/dg = alpha .* colsum(delta) - delta.
template <typename DerivedA, typename DerivedD>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
awakening_loss_score_grad(const Eigen::MatrixBase<DerivedA>& alpha,
                          const Eigen::MatrixBase<DerivedD>& delta) {
  using Mat = Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat grad = alpha;
  for (Eigen::Index k = 0; k < grad.cols(); ++k)
    grad.col(k) = alpha.col(k) * delta.col(k).sum() - delta.col(k);
  return grad;
}

enum class FuseMode { concat, add };

// Schema-aware token representations: row n is q_n joined with the
// alpha-weighted sum of concept representations. concat gives width 2d,
// add gives width d.
template <typename DerivedQ, typename DerivedE, typename DerivedA>
Eigen::Matrix<typename DerivedQ::Scalar, Eigen::Dynamic, Eigen::Dynamic>
fuse(const Eigen::MatrixBase<DerivedQ>& token_reps,
     const Eigen::MatrixBase<DerivedE>& concept_reps,
     const Eigen::MatrixBase<DerivedA>& alpha,
     FuseMode mode = FuseMode::concat) {
  using Mat = Eigen::Matrix<typename DerivedQ::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (alpha.rows() != token_reps.rows() || alpha.cols() != concept_reps.rows() ||
      token_reps.cols() != concept_reps.cols())
    throw std::invalid_argument("fuse: inconsistent shapes");
  Mat mix = alpha * concept_reps;  // N x d
  if (mode == FuseMode::add) return token_reps + mix;
  Mat out(token_reps.rows(), token_reps.cols() * 2);
  out << token_reps, mix;
  return out;
}

}  // namespace eta
