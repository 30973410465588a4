#pragma once

#include <cstdint>

#include "eta/encoder.hpp"
#include "eta/param.hpp"

namespace eta {

// Per-concept confidences p_k, each in [0, 1].
using ConfidenceVector = Vector;

// Concept prediction classifier: p_k = sigmoid(W_l e_k).
struct CpHead {
  Param w;  // 1 x d

  CpHead(int d, std::uint64_t seed);
  int dim() const { return static_cast<int>(w.value.cols()); }
};

ConfidenceVector predict_concepts(const Encoding& enc, const CpHead& head);

// Grounding module: g_{n,k} = (W_e e_k) . (W_q q_n) / sqrt(d).
struct GroundingHead {
  Param W_e;  // d x d
  Param W_q;  // d x d

  GroundingHead(int d, std::uint64_t seed);
  int dim() const { return static_cast<int>(W_e.value.cols()); }
};

Matrix grounding_scores(const Encoding& enc, const GroundingHead& head);

// Column-wise softmax of grounding scores over the token axis; the latent
// grounding alpha is column-stochastic.
Matrix normalize(const Matrix& scores);

}  // namespace eta
