#include "eta/encoder.hpp"

#include <cmath>
#include <random>

#include "eta/errors.hpp"

namespace eta {

void EncoderConfig::validate() const {
  if (d <= 0 || layers <= 0 || heads <= 0 || ffn_mult <= 0 || max_len <= 0)
    throw ConfigError("encoder config: all sizes must be positive");
  if (d % heads != 0)
    throw ConfigError("encoder config: d = " + std::to_string(d) +
                      " not divisible by heads = " + std::to_string(heads));
}

namespace nn {

namespace {
constexpr double kInitStd = 0.02;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  double Phi = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return Phi + x * phi;
}
}  // namespace

LinearLayer::LinearLayer(const std::string& name, int in, int out)
    : W(name + ".W", out, in), b(name + ".b", 1, out, /*decay=*/false) {}

Matrix LinearLayer::forward(const Matrix& X) const {
  return (X * W.value.transpose()).rowwise() + b.value.row(0);
}

Matrix LinearLayer::backward(const Matrix& X, const Matrix& dY) {
  W.grad.noalias() += dY.transpose() * X;
  b.grad.row(0) += dY.colwise().sum();
  return dY * W.value;
}

LayerNormLayer::LayerNormLayer(const std::string& name, int d)
    : gamma(name + ".gamma", 1, d, /*decay=*/false), beta(name + ".beta", 1, d, /*decay=*/false) {
  gamma.value.setOnes();
}

Matrix LayerNormLayer::forward(const Matrix& X, Cache& cache) const {
  const Eigen::Index T = X.rows(), D = X.cols();
  cache.xhat.resize(T, D);
  cache.inv_std.resize(T);
  Matrix out(T, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    double mu = X.row(t).mean();
    double var = (X.row(t).array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + eps);
    cache.inv_std(t) = inv;
    cache.xhat.row(t) = (X.row(t).array() - mu) * inv;
    out.row(t) = cache.xhat.row(t).cwiseProduct(gamma.value.row(0)) + beta.value.row(0);
  }
  return out;
}

Matrix LayerNormLayer::backward(const Cache& cache, const Matrix& dY) {
  const Eigen::Index T = dY.rows(), D = dY.cols();
  gamma.grad.row(0) += (dY.array() * cache.xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dY.colwise().sum();
  Matrix dX(T, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::RowVectorXd dxhat = dY.row(t).cwiseProduct(gamma.value.row(0));
    double m1 = dxhat.mean();
    double m2 = dxhat.cwiseProduct(cache.xhat.row(t)).mean();
    dX.row(t) =
        cache.inv_std(t) * (dxhat.array() - m1 - cache.xhat.row(t).array() * m2).matrix();
  }
  return dX;
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, int d, int heads_)
    : heads(heads_),
      wq(name + ".wq", d, d),
      wk(name + ".wk", d, d),
      wv(name + ".wv", d, d),
      wo(name + ".wo", d, d) {}

Matrix MultiHeadAttention::forward(const Matrix& X, Cache& cache) const {
  const Eigen::Index T = X.rows(), D = X.cols();
  const Eigen::Index dh = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.X = X;
  cache.Q = wq.forward(X);
  cache.K = wk.forward(X);
  cache.V = wv.forward(X);
  cache.probs.assign(heads, Matrix());
  cache.O.resize(T, D);
  for (int h = 0; h < heads; ++h) {
    auto Qh = cache.Q.middleCols(h * dh, dh);
    auto Kh = cache.K.middleCols(h * dh, dh);
    auto Vh = cache.V.middleCols(h * dh, dh);
    Matrix scores = Qh * Kh.transpose() * scale;
    cache.probs[h] = row_softmax(scores);
    cache.O.middleCols(h * dh, dh) = cache.probs[h] * Vh;
  }
  return wo.forward(cache.O);
}

Matrix MultiHeadAttention::backward(const Cache& cache, const Matrix& dOut) {
  const Eigen::Index D = cache.X.cols();
  const Eigen::Index dh = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dO = wo.backward(cache.O, dOut);
  Matrix dQ = Matrix::Zero(cache.Q.rows(), D);
  Matrix dK = Matrix::Zero(cache.K.rows(), D);
  Matrix dV = Matrix::Zero(cache.V.rows(), D);
  for (int h = 0; h < heads; ++h) {
    const Matrix& P = cache.probs[h];
    auto Qh = cache.Q.middleCols(h * dh, dh);
    auto Kh = cache.K.middleCols(h * dh, dh);
    auto Vh = cache.V.middleCols(h * dh, dh);
    Matrix dOh = dO.middleCols(h * dh, dh);
    Matrix dP = dOh * Vh.transpose();
    dV.middleCols(h * dh, dh) = P.transpose() * dOh;
    Vector rowdot = (dP.array() * P.array()).rowwise().sum();
    Matrix dS = P.array() * (dP.colwise() - rowdot).array();
    dQ.middleCols(h * dh, dh) = dS * Kh * scale;
    dK.middleCols(h * dh, dh) = dS.transpose() * Qh * scale;
  }
  Matrix dX = wq.backward(cache.X, dQ);
  dX += wk.backward(cache.X, dK);
  dX += wv.backward(cache.X, dV);
  return dX;
}

FeedForward::FeedForward(const std::string& name, int d, int hidden)
    : lin1(name + ".lin1", d, hidden), lin2(name + ".lin2", hidden, d) {}

Matrix FeedForward::forward(const Matrix& X, Cache& cache) const {
  cache.X = X;
  cache.H = lin1.forward(X);
  cache.A = cache.H.unaryExpr([](double x) { return gelu(x); });
  return lin2.forward(cache.A);
}

Matrix FeedForward::backward(const Cache& cache, const Matrix& dY) {
  Matrix dA = lin2.backward(cache.A, dY);
  Matrix dH = dA.array() * cache.H.unaryExpr([](double x) { return gelu_grad(x); }).array();
  return lin1.backward(cache.X, dH);
}

EncoderBlock::EncoderBlock(const std::string& name, int d, int heads, int hidden)
    : ln1(name + ".ln1", d),
      ln2(name + ".ln2", d),
      attn(name + ".attn", d, heads),
      ffn(name + ".ffn", d, hidden) {}

Matrix EncoderBlock::forward(const Matrix& X, Cache& cache) const {
  cache.X = X;
  Matrix a1 = ln1.forward(X, cache.ln1c);
  cache.H = X + attn.forward(a1, cache.attnc);
  Matrix a2 = ln2.forward(cache.H, cache.ln2c);
  return cache.H + ffn.forward(a2, cache.ffnc);
}

Matrix EncoderBlock::backward(const Cache& cache, const Matrix& dOut) {
  Matrix dA2 = ffn.backward(cache.ffnc, dOut);
  Matrix dH = dOut + ln2.backward(cache.ln2c, dA2);
  Matrix dA1 = attn.backward(cache.attnc, dH);
  return dH + ln1.backward(cache.ln1c, dA1);
}

}  // namespace nn

MicroEncoder::MicroEncoder(EncoderConfig cfg, Vocabulary vocab, std::uint64_t seed)
    : cfg_(cfg),
      vocab_(std::move(vocab)),
      tok_emb_("enc.tok_emb", vocab_.size(), cfg.d),
      pos_emb_("enc.pos_emb", cfg.max_len, cfg.d),
      ln_f_("enc.final_ln", cfg.d) {
  cfg_.validate();
  for (int l = 0; l < cfg_.layers; ++l)
    blocks_.emplace_back("enc.layer" + std::to_string(l), cfg_.d, cfg_.heads,
                         cfg_.d * cfg_.ffn_mult);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.02);
  auto fill = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  };
  fill(tok_emb_.value);
  fill(pos_emb_.value);
  for (auto& blk : blocks_) {
    fill(blk.attn.wq.W.value);
    fill(blk.attn.wk.W.value);
    fill(blk.attn.wv.W.value);
    fill(blk.attn.wo.W.value);
    fill(blk.ffn.lin1.W.value);
    fill(blk.ffn.lin2.W.value);
  }
}

MicroEncoder::SequenceLayout MicroEncoder::layout(const GroundingInstance& instance,
                                                  std::optional<int> erased_token) const {
  if (erased_token && (*erased_token < 0 || *erased_token >= instance.num_tokens()))
    throw ValidationError("instance " + instance.id + ": erased token index " +
                          std::to_string(*erased_token) + " out of range");
  SequenceLayout out;
  out.ids.push_back(Vocabulary::kCls);
  for (int n = 0; n < instance.num_tokens(); ++n) {
    out.question_pos.push_back(static_cast<int>(out.ids.size()));
    if (erased_token && *erased_token == n)
      out.ids.push_back(Vocabulary::kUnk);
    else
      out.ids.push_back(vocab_.id(instance.question_tokens[n]));
  }
  for (const auto& c : instance.concepts) {
    out.ids.push_back(Vocabulary::kSep);
    out.concept_pos.push_back(static_cast<int>(out.ids.size()));
    for (const auto& t : c.tokens) out.ids.push_back(vocab_.id(t));
  }
  if (static_cast<int>(out.ids.size()) > cfg_.max_len)
    throw LengthError("instance " + instance.id + ": sequence length " +
                      std::to_string(out.ids.size()) + " exceeds max length " +
                      std::to_string(cfg_.max_len));
  return out;
}

Matrix MicroEncoder::forward_ids(const std::vector<int>& ids, ForwardCache& cache) const {
  const Eigen::Index T = static_cast<Eigen::Index>(ids.size());
  cache.ids = ids;
  cache.X0.resize(T, cfg_.d);
  for (Eigen::Index t = 0; t < T; ++t)
    cache.X0.row(t) = tok_emb_.value.row(ids[t]) + pos_emb_.value.row(t);
  cache.blocks.resize(blocks_.size());
  Matrix h = cache.X0;
  for (size_t l = 0; l < blocks_.size(); ++l) h = blocks_[l].forward(h, cache.blocks[l]);
  return ln_f_.forward(h, cache.lnf);
}

void MicroEncoder::backward_ids(const ForwardCache& cache, const Matrix& dOut) {
  Matrix dh = ln_f_.backward(cache.lnf, dOut);
  for (size_t l = blocks_.size(); l-- > 0;)
    dh = blocks_[l].backward(cache.blocks[l], dh);
  for (Eigen::Index t = 0; t < dh.rows(); ++t) {
    tok_emb_.grad.row(cache.ids[t]) += dh.row(t);
    pos_emb_.grad.row(t) += dh.row(t);
  }
}

Encoding MicroEncoder::encode_cached(const GroundingInstance& instance,
                                     std::optional<int> erased_token, ForwardCache& cache,
                                     SequenceLayout& layout_out) const {
  layout_out = layout(instance, erased_token);
  Matrix h = forward_ids(layout_out.ids, cache);
  Encoding enc;
  enc.d = cfg_.d;
  enc.token_reps.resize(layout_out.question_pos.size(), cfg_.d);
  for (size_t n = 0; n < layout_out.question_pos.size(); ++n)
    enc.token_reps.row(n) = h.row(layout_out.question_pos[n]);
  enc.concept_reps.resize(layout_out.concept_pos.size(), cfg_.d);
  for (size_t k = 0; k < layout_out.concept_pos.size(); ++k)
    enc.concept_reps.row(k) = h.row(layout_out.concept_pos[k]);
  return enc;
}

Encoding MicroEncoder::encode(const GroundingInstance& instance,
                              std::optional<int> erased_token) const {
  ForwardCache cache;
  SequenceLayout lay;
  return encode_cached(instance, erased_token, cache, lay);
}

std::vector<Param*> MicroEncoder::trainable_parameters() {
  if (frozen_) return {};
  return all_parameters();
}

std::vector<Param*> MicroEncoder::all_parameters() {
  std::vector<Param*> out{&tok_emb_, &pos_emb_};
  for (auto& blk : blocks_) {
    for (Param* p : {&blk.ln1.gamma, &blk.ln1.beta, &blk.attn.wq.W, &blk.attn.wq.b,
                     &blk.attn.wk.W, &blk.attn.wk.b, &blk.attn.wv.W, &blk.attn.wv.b,
                     &blk.attn.wo.W, &blk.attn.wo.b, &blk.ln2.gamma, &blk.ln2.beta,
                     &blk.ffn.lin1.W, &blk.ffn.lin1.b, &blk.ffn.lin2.W, &blk.ffn.lin2.b})
      out.push_back(p);
  }
  out.push_back(&ln_f_.gamma);
  out.push_back(&ln_f_.beta);
  return out;
}

}  // namespace eta
