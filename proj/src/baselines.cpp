#include "eta/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <random>

#include "eta/errors.hpp"
#include "eta/optim.hpp"

namespace eta {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string join_lower(const std::vector<std::string>& tokens, size_t begin, size_t end) {
  std::string out;
  for (size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += lower(tokens[i]);
  }
  return out;
}

size_t levenshtein(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

double normalized_edit_similarity(const std::string& a, const std::string& b) {
  size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

std::vector<GroundingPair> ngram_match(const GroundingInstance& instance, double min_sim) {
  if (min_sim < 0.0 || min_sim > 1.0)
    throw ConfigError("ngram_match: field \"min_sim\" must be in [0, 1]");
  const int N = instance.num_tokens();

  struct Candidate {
    MatchSpan span;
    int concept_index;
  };
  std::vector<Candidate> candidates;
  std::vector<std::string> concept_strings;
  for (const auto& c : instance.concepts)
    concept_strings.push_back(join_lower(c.tokens, 0, c.tokens.size()));

  for (int start = 0; start < N; ++start) {
    for (int len = 1; len <= 5 && start + len <= N; ++len) {
      std::string gram = join_lower(instance.question_tokens, start, start + len);
      for (size_t k = 0; k < instance.concepts.size(); ++k) {
        double sim = normalized_edit_similarity(gram, concept_strings[k]);
        if (sim >= min_sim)
          candidates.push_back(
              {MatchSpan{start, start + len, instance.concepts[k].id, sim},
               static_cast<int>(k)});
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.span.similarity != b.span.similarity) return a.span.similarity > b.span.similarity;
    int alen = a.span.end - a.span.start, blen = b.span.end - b.span.start;
    if (alen != blen) return alen > blen;
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    return a.concept_index < b.concept_index;
  });

  std::vector<bool> claimed(N, false);
  std::vector<GroundingPair> pairs;
  for (const auto& cand : candidates) {
    bool free = true;
    for (int t = cand.span.start; t < cand.span.end; ++t)
      if (claimed[t]) { free = false; break; }
    if (!free) continue;
    for (int t = cand.span.start; t < cand.span.end; ++t) {
      claimed[t] = true;
      pairs.push_back(GroundingPair{t, cand.span.concept_id, cand.span.similarity});
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

Matrix sim_scores(const Encoding& enc) {
  return enc.token_reps * enc.concept_reps.transpose();
}

Vector max_pool_scores(const Matrix& scores) {
  return scores.colwise().maxCoeff().transpose();
}

ConfidenceVector contrast_confidences(const Matrix& scores) {
  Vector pooled = max_pool_scores(scores);
  return pooled.unaryExpr([](double z) { return sigmoid(z); });
}

ContrastOutcome contrast_train(const std::vector<GroundingInstance>& data, MicroEncoder& encoder,
                               GroundingHead& scorer, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ValidationError("contrast_train: empty dataset");
  const double margin = cfg.contrast_margin;

  std::vector<Param*> params = encoder.trainable_parameters();
  params.push_back(&scorer.W_e);
  params.push_back(&scorer.W_q);
  AdamW opt(params, cfg.lr, cfg.weight_decay);
  std::mt19937_64 rng(cfg.seed + 2);

  ContrastOutcome out;
  for (int epoch = 0; epoch < cfg.cp_epochs; ++epoch) {
    double epoch_loss = 0.0;
    long counted = 0;
    long skipped_this_epoch = 0;

    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    for (size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      size_t batch_end = std::min(order.size(), pos + cfg.batch_size);
      opt.zero_grad();
      long effective = 0;
      struct Pending {
        size_t idx;
        Matrix dS;
        MicroEncoder::ForwardCache cache;
        MicroEncoder::SequenceLayout lay;
        Encoding enc;
        double loss;
      };
      std::vector<Pending> pending;
      for (size_t bi = pos; bi < batch_end; ++bi) {
        const GroundingInstance& inst = data[order[bi]];
        std::vector<int> mentioned, unmentioned;
        for (int k = 0; k < inst.num_concepts(); ++k)
          (inst.weak_labels[k] ? mentioned : unmentioned).push_back(k);
        if (mentioned.empty() || unmentioned.empty()) {
          ++skipped_this_epoch;
          continue;
        }
        Pending p;
        p.idx = order[bi];
        p.enc = encoder.encode_cached(inst, std::nullopt, p.cache, p.lay);
        Matrix S = grounding_scores(p.enc, scorer);
        Vector agg(inst.num_concepts());
        std::vector<int> arg(inst.num_concepts());
        for (int k = 0; k < inst.num_concepts(); ++k) {
          Eigen::Index best;
          agg(k) = S.col(k).maxCoeff(&best);
          arg[k] = static_cast<int>(best);
        }
        double pair_count = static_cast<double>(mentioned.size() * unmentioned.size());
        p.dS = Matrix::Zero(S.rows(), S.cols());
        p.loss = 0.0;
        for (int kp : mentioned) {
          for (int kn : unmentioned) {
            double h = margin - agg(kp) + agg(kn);
            if (h > 0.0) {
              p.loss += h / pair_count;
              p.dS(arg[kp], kp) -= 1.0 / pair_count;
              p.dS(arg[kn], kn) += 1.0 / pair_count;
            }
          }
        }
        epoch_loss += p.loss;
        ++counted;
        ++effective;
        pending.push_back(std::move(p));
      }
      if (pending.empty()) continue;
      for (auto& p : pending) {
        Matrix dS = p.dS / static_cast<double>(effective);
        GroundingGrads grads = accumulate_grounding_grads(p.enc, scorer, dS);
        if (!encoder.frozen()) {
          Matrix dOut =
              Matrix::Zero(static_cast<Eigen::Index>(p.lay.ids.size()), encoder.dim());
          for (size_t n = 0; n < p.lay.question_pos.size(); ++n)
            dOut.row(p.lay.question_pos[n]) += grads.dQ.row(n);
          for (size_t k = 0; k < p.lay.concept_pos.size(); ++k)
            dOut.row(p.lay.concept_pos[k]) += grads.dE.row(k);
          encoder.backward_ids(p.cache, dOut);
        }
      }
      opt.step();
    }
    if (epoch == 0) out.skipped = skipped_this_epoch;
    double mean_loss = counted > 0 ? epoch_loss / static_cast<double>(counted) : 0.0;
    if (!std::isfinite(mean_loss))
      throw DivergenceError("contrast training diverged at epoch " + std::to_string(epoch) +
                            " (lr = " + std::to_string(cfg.lr) + ")");
    out.trace.append({epoch, "contrast", "train", mean_loss, std::nullopt});
  }
  return out;
}

}  // namespace eta
