#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eta/corpus.hpp"
#include "eta/param.hpp"
#include "eta/vocab.hpp"

namespace eta {

// Contextual representations for one instance: row n of token_reps is q_n,
// row k of concept_reps is e_k (taken at the first token of concept k).
struct Encoding {
  Matrix token_reps;    // N x d
  Matrix concept_reps;  // K x d
  int d = 0;
};

struct EncoderConfig {
  int d = 64;
  int layers = 2;
  int heads = 4;
  int ffn_mult = 4;
  int max_len = 256;

  void validate() const;  // d divisible by heads, positive sizes
};

// Contract every encoder implementation satisfies: build the sequence
// [CLS] x_1..x_N [SEP] c_1 [SEP] c_2 ... [SEP] c_K, optionally with question
// token n replaced by [UNK], and return word-level representations.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual Encoding encode(const GroundingInstance& instance,
                          std::optional<int> erased_token = std::nullopt) const = 0;
  virtual std::vector<Param*> trainable_parameters() = 0;  // empty when frozen
  virtual int dim() const = 0;
};

namespace nn {

struct LinearLayer {
  Param W;  // out x in
  Param b;  // 1 x out

  LinearLayer() = default;
  LinearLayer(const std::string& name, int in, int out);

  Matrix forward(const Matrix& X) const;
  // Accumulates into W.grad/b.grad, returns dX.
  Matrix backward(const Matrix& X, const Matrix& dY);
};

struct LayerNormLayer {
  Param gamma;  // 1 x d
  Param beta;   // 1 x d
  double eps = 1e-5;

  LayerNormLayer() = default;
  LayerNormLayer(const std::string& name, int d);

  struct Cache {
    Matrix xhat;
    Vector inv_std;
  };
  Matrix forward(const Matrix& X, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& dY);
};

struct MultiHeadAttention {
  int heads = 1;
  LinearLayer wq, wk, wv, wo;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int d, int heads);

  struct Cache {
    Matrix X, Q, K, V, O;
    std::vector<Matrix> probs;  // per-head T x T attention
  };
  Matrix forward(const Matrix& X, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& dOut);
};

struct FeedForward {
  LinearLayer lin1, lin2;

  FeedForward() = default;
  FeedForward(const std::string& name, int d, int hidden);

  struct Cache {
    Matrix X, H, A;  // input, pre-activation, post-activation
  };
  Matrix forward(const Matrix& X, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& dY);
};

// Pre-LN residual block: x + attn(ln1(x)), then + ffn(ln2(.)).
struct EncoderBlock {
  LayerNormLayer ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ffn;

  EncoderBlock() = default;
  EncoderBlock(const std::string& name, int d, int heads, int hidden);

  struct Cache {
    LayerNormLayer::Cache ln1c, ln2c;
    MultiHeadAttention::Cache attnc;
    FeedForward::Cache ffnc;
    Matrix X, H;  // block input, post-attention residual
  };
  Matrix forward(const Matrix& X, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& dOut);
};

}  // namespace nn

// Reference trainable encoder: learned token + position embeddings, pre-LN
// self-attention blocks, final LayerNorm. Deterministic construction from a
// seed; inference is const and safe for concurrent callers.
class MicroEncoder : public Encoder {
 public:
  MicroEncoder(EncoderConfig cfg, Vocabulary vocab, std::uint64_t seed);

  struct SequenceLayout {
    std::vector<int> ids;
    std::vector<int> question_pos;  // N positions
    std::vector<int> concept_pos;   // K positions (first token of each concept)
  };
  SequenceLayout layout(const GroundingInstance& instance,
                        std::optional<int> erased_token = std::nullopt) const;

  struct ForwardCache {
    std::vector<int> ids;
    Matrix X0;
    std::vector<nn::EncoderBlock::Cache> blocks;
    nn::LayerNormLayer::Cache lnf;
  };
  Matrix forward_ids(const std::vector<int>& ids, ForwardCache& cache) const;
  // Accumulates gradients for all weights reached from dOut (T x d).
  void backward_ids(const ForwardCache& cache, const Matrix& dOut);

  Encoding encode(const GroundingInstance& instance,
                  std::optional<int> erased_token = std::nullopt) const override;
  Encoding encode_cached(const GroundingInstance& instance, std::optional<int> erased_token,
                         ForwardCache& cache, SequenceLayout& layout_out) const;

  std::vector<Param*> trainable_parameters() override;
  std::vector<Param*> all_parameters();  // checkpoint surface, ignores frozen
  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  int dim() const override { return cfg_.d; }
  const EncoderConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  EncoderConfig cfg_;
  Vocabulary vocab_;
  Param tok_emb_;  // V x d
  Param pos_emb_;  // max_len x d
  std::vector<nn::EncoderBlock> blocks_;
  nn::LayerNormLayer ln_f_;
  bool frozen_ = false;
};

}  // namespace eta
