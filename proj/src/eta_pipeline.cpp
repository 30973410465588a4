#include "eta/eta_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "eta/errors.hpp"
#include "eta/optim.hpp"

namespace eta {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("train config: field \"lr\" must be > 0");
  if (cp_epochs < 0) throw ConfigError("train config: field \"cp_epochs\" must be >= 0");
  if (awaken_epochs < 0) throw ConfigError("train config: field \"awaken_epochs\" must be >= 0");
  if (batch_size < 1) throw ConfigError("train config: field \"batch_size\" must be >= 1");
  if (patience < 1) throw ConfigError("train config: field \"patience\" must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("train config: field \"weight_decay\" must be >= 0");
  if (workers < 1) throw ConfigError("train config: field \"workers\" must be >= 1");
  if (contrast_margin <= 0.0) throw ConfigError("train config: field \"contrast_margin\" must be > 0");
}

std::vector<double> TrainTrace::losses(const std::string& phase, const std::string& split) const {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.phase == phase && r.split == split) out.push_back(r.loss);
  return out;
}

ConfidenceVector predict_concepts(const Encoding& enc, const CpHead& head) {
  if (enc.concept_reps.cols() != head.w.value.cols())
    throw ShapeError("predict_concepts: encoding d = " + std::to_string(enc.concept_reps.cols()) +
                     " but head d = " + std::to_string(head.w.value.cols()));
  Vector logits = enc.concept_reps * head.w.value.row(0).transpose();
  return logits.unaryExpr([](double z) { return sigmoid(z); });
}

CpHead::CpHead(int d, std::uint64_t seed) : w("cp.w", 1, d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.02);
  for (Eigen::Index j = 0; j < w.value.cols(); ++j) w.value(0, j) = dist(rng);
}

GroundingHead::GroundingHead(int d, std::uint64_t seed)
    : W_e("g.we", d, d), W_q("g.wq", d, d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.02);
  auto fill = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  };
  fill(W_e.value);
  fill(W_q.value);
}

Matrix grounding_scores(const Encoding& enc, const GroundingHead& head) {
  if (enc.token_reps.cols() != head.W_q.value.cols() ||
      enc.concept_reps.cols() != head.W_e.value.cols())
    throw ShapeError("grounding_scores: encoding d = " + std::to_string(enc.token_reps.cols()) +
                     " does not match head d = " + std::to_string(head.W_e.value.cols()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(enc.token_reps.cols()));
  Matrix A = enc.token_reps * head.W_q.value.transpose();    // N x d
  Matrix B = enc.concept_reps * head.W_e.value.transpose();  // K x d
  return A * B.transpose() * scale;
}

Matrix normalize(const Matrix& scores) { return column_softmax(scores); }

Matrix pseudo_alignment(const ConfidenceVector& baseline,
                        const std::vector<ConfidenceVector>& erased,
                        const std::vector<bool>& labels) {
  const Eigen::Index K = baseline.size();
  const Eigen::Index N = static_cast<Eigen::Index>(erased.size());
  if (static_cast<Eigen::Index>(labels.size()) != K)
    throw ShapeError("pseudo_alignment: labels length does not match K");
  Matrix delta = Matrix::Zero(N, K);
  for (Eigen::Index n = 0; n < N; ++n) {
    if (erased[n].size() != K) throw ShapeError("pseudo_alignment: erased confidence length mismatch");
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!labels[k]) continue;
      delta(n, k) = std::max(0.0, baseline(k) - erased[n](k));
    }
  }
  return delta;
}

Matrix erase_and_score(const GroundingInstance& instance, const Encoder& encoder,
                       const CpHead& head, int workers) {
  const int N = instance.num_tokens();
  ConfidenceVector baseline = predict_concepts(encoder.encode(instance), head);
  std::vector<ConfidenceVector> erased(N);
  auto run_range = [&](int begin, int end) {
    for (int n = begin; n < end; ++n)
      erased[n] = predict_concepts(encoder.encode(instance, n), head);
  };
  if (workers <= 1 || N <= 1) {
    run_range(0, N);
  } else {
    int count = std::min(workers, N);
    std::vector<std::thread> threads;
    int chunk = (N + count - 1) / count;
    for (int w = 0; w < count; ++w) {
      int begin = w * chunk, end = std::min(N, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back(run_range, begin, end);
    }
    for (auto& t : threads) t.join();
  }
  return pseudo_alignment(baseline, erased, instance.weak_labels);
}

namespace {

// Stable BCE from the logit: max(z,0) - z*l + log1p(exp(-|z|)).
double bce_from_logit(double z, double label) {
  return std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
}

std::vector<std::vector<size_t>> make_batches(size_t count, int batch_size,
                                              std::mt19937_64& rng) {
  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<size_t>> batches;
  for (size_t i = 0; i < count; i += batch_size)
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(count, i + batch_size));
  return batches;
}

}  // namespace

TrainTrace train_concept_prediction(const std::vector<GroundingInstance>& data,
                                    MicroEncoder& encoder, CpHead& head,
                                    const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train_concept_prediction: empty dataset");
  for (const auto& inst : data)
    if (inst.weak_labels.size() != inst.concepts.size())
      throw ValidationError("instance " + inst.id + ": weak labels missing");

  std::vector<Param*> params = encoder.trainable_parameters();
  params.push_back(&head.w);
  AdamW opt(params, cfg.lr, cfg.weight_decay);
  std::mt19937_64 rng(cfg.seed);

  TrainTrace trace;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < cfg.cp_epochs; ++epoch) {
    double epoch_loss = 0.0;
    long epoch_terms = 0;
    for (const auto& batch : make_batches(data.size(), cfg.batch_size, rng)) {
      opt.zero_grad();
      long batch_terms = 0;
      for (size_t idx : batch) batch_terms += data[idx].num_concepts();
      for (size_t idx : batch) {
        const GroundingInstance& inst = data[idx];
        MicroEncoder::ForwardCache cache;
        MicroEncoder::SequenceLayout lay;
        Encoding enc = encoder.encode_cached(inst, std::nullopt, cache, lay);
        Vector logits = enc.concept_reps * head.w.value.row(0).transpose();
        Matrix dOut = Matrix::Zero(static_cast<Eigen::Index>(lay.ids.size()), encoder.dim());
        for (int k = 0; k < inst.num_concepts(); ++k) {
          double label = inst.weak_labels[k] ? 1.0 : 0.0;
          epoch_loss += bce_from_logit(logits(k), label);
          double dlogit = (sigmoid(logits(k)) - label) / static_cast<double>(batch_terms);
          head.w.grad.row(0) += dlogit * enc.concept_reps.row(k);
          dOut.row(lay.concept_pos[k]) += dlogit * head.w.value.row(0);
        }
        epoch_terms += inst.num_concepts();
        if (!encoder.frozen()) encoder.backward_ids(cache, dOut);
      }
      opt.step();
    }
    double mean_loss = epoch_loss / static_cast<double>(epoch_terms);
    if (!std::isfinite(mean_loss))
      throw DivergenceError("concept prediction diverged at epoch " + std::to_string(epoch) +
                            " (lr = " + std::to_string(cfg.lr) + ")");
    trace.append({epoch, "cp", "train", mean_loss, std::nullopt});
    if (mean_loss < best - 1e-9) {
      best = mean_loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return trace;
}

CpEval evaluate_concept_prediction(const std::vector<GroundingInstance>& data,
                                   const Encoder& encoder, const CpHead& head) {
  CpEval out;
  long terms = 0, correct = 0;
  for (const auto& inst : data) {
    ConfidenceVector p = predict_concepts(encoder.encode(inst), head);
    for (int k = 0; k < inst.num_concepts(); ++k) {
      double label = inst.weak_labels[k] ? 1.0 : 0.0;
      double pk = std::clamp(p(k), 1e-12, 1.0 - 1e-12);
      out.bce -= label * std::log(pk) + (1.0 - label) * std::log(1.0 - pk);
      correct += ((p(k) > 0.5) == inst.weak_labels[k]) ? 1 : 0;
      ++terms;
    }
  }
  if (terms > 0) {
    out.bce /= static_cast<double>(terms);
    out.accuracy = static_cast<double>(correct) / static_cast<double>(terms);
  }
  return out;
}

GroundingGrads accumulate_grounding_grads(const Encoding& enc, GroundingHead& head,
                                          const Matrix& score_grad) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(enc.token_reps.cols()));
  Matrix A = enc.token_reps * head.W_q.value.transpose();    // N x d
  Matrix B = enc.concept_reps * head.W_e.value.transpose();  // K x d
  Matrix dA = score_grad * B * scale;                        // N x d
  Matrix dB = score_grad.transpose() * A * scale;            // K x d
  head.W_q.grad.noalias() += dA.transpose() * enc.token_reps;
  head.W_e.grad.noalias() += dB.transpose() * enc.concept_reps;
  GroundingGrads grads;
  grads.dQ = dA * head.W_q.value;
  grads.dE = dB * head.W_e.value;
  return grads;
}

TrainTrace awaken(const std::vector<GroundingInstance>& data, MicroEncoder& encoder,
                  const CpHead& cp_head, GroundingHead& g_head, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ValidationError("awaken: empty dataset");

  const bool joint = cfg.finetune == FineTune::joint;
  bool was_frozen = encoder.frozen();
  if (!joint) encoder.set_frozen(true);
  std::vector<Param*> params = encoder.trainable_parameters();
  params.push_back(&g_head.W_e);
  params.push_back(&g_head.W_q);
  AdamW opt(params, cfg.lr, cfg.weight_decay);
  std::mt19937_64 rng(cfg.seed + 1);

  TrainTrace trace;
  std::vector<Matrix> deltas(data.size());
  bool have_deltas = false;

  // With a frozen encoder the CP path never moves, so every sweep would
  // reproduce the same deltas; recomputing is skipped as pure optimization.
  const bool refresh_each_epoch = cfg.refresh == DeltaRefresh::every_epoch && joint;
  for (int epoch = 0; epoch < cfg.awaken_epochs; ++epoch) {
    if (!have_deltas || refresh_each_epoch) {
      // p and every p_hat are fixed within one sweep
      auto sweep = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i)
          deltas[i] = erase_and_score(data[i], encoder, cp_head, 1);
      };
      if (cfg.workers <= 1) {
        sweep(0, data.size());
      } else {
        int count = std::min<size_t>(cfg.workers, data.size());
        std::vector<std::thread> threads;
        size_t chunk = (data.size() + count - 1) / count;
        for (int w = 0; w < count; ++w) {
          size_t begin = w * chunk, end = std::min(data.size(), begin + chunk);
          if (begin >= end) break;
          threads.emplace_back(sweep, begin, end);
        }
        for (auto& t : threads) t.join();
      }
      have_deltas = true;
    }

    double epoch_loss = 0.0;
    for (const auto& batch : make_batches(data.size(), cfg.batch_size, rng)) {
      opt.zero_grad();
      const double inv_batch = 1.0 / static_cast<double>(batch.size());
      for (size_t idx : batch) {
        const GroundingInstance& inst = data[idx];
        MicroEncoder::ForwardCache cache;
        MicroEncoder::SequenceLayout lay;
        Encoding enc = encoder.encode_cached(inst, std::nullopt, cache, lay);
        Matrix alpha = normalize(grounding_scores(enc, g_head));
        epoch_loss += awakening_loss(alpha, deltas[idx]);
        Matrix dG = awakening_loss_score_grad(alpha, deltas[idx]) * inv_batch;
        GroundingGrads grads = accumulate_grounding_grads(enc, g_head, dG);
        if (joint) {
          Matrix dOut = Matrix::Zero(static_cast<Eigen::Index>(lay.ids.size()), encoder.dim());
          for (size_t n = 0; n < lay.question_pos.size(); ++n)
            dOut.row(lay.question_pos[n]) += grads.dQ.row(n);
          for (size_t k = 0; k < lay.concept_pos.size(); ++k)
            dOut.row(lay.concept_pos[k]) += grads.dE.row(k);
          encoder.backward_ids(cache, dOut);
        }
      }
      opt.step();
    }
    double mean_loss = epoch_loss / static_cast<double>(data.size());
    if (!std::isfinite(mean_loss)) {
      encoder.set_frozen(was_frozen);
      throw DivergenceError("awakening diverged at epoch " + std::to_string(epoch) +
                            " (lr = " + std::to_string(cfg.lr) + ", " +
                            std::to_string(trace.records.size()) + " trace records)");
    }
    EpochRecord rec{epoch, "awaken", "train", mean_loss, std::nullopt};
    trace.append(rec);
    if (on_epoch) {
      if (auto f1 = on_epoch(epoch))
        trace.append({epoch, "awaken", "dev", mean_loss, f1});
    }
  }
  encoder.set_frozen(was_frozen);
  return trace;
}

DeltaMode delta_mode_from_string(const std::string& s) {
  if (s == "raw") return DeltaMode::raw;
  if (s == "softmax") return DeltaMode::softmax;
  if (s == "sum") return DeltaMode::sum;
  throw ConfigError("unknown delta mode \"" + s + "\"");
}

Matrix delta_as_prediction(const Matrix& delta, DeltaMode mode) {
  switch (mode) {
    case DeltaMode::raw: return delta;
    case DeltaMode::softmax: return column_softmax(delta);
    case DeltaMode::sum: return column_sum_normalize(delta);
  }
  return delta;
}

}  // namespace eta
