#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eta/corpus.hpp"
#include "eta/encoder.hpp"
#include "eta/matrix_ops.hpp"

namespace eta {

// A discrete (token, concept) link with the alpha value backing it.
struct GroundingPair {
  int token = 0;
  std::string concept_id;
  double score = 0.0;

  friend bool operator==(const GroundingPair& a, const GroundingPair& b) {
    return a.token == b.token && a.concept_id == b.concept_id;
  }
  friend bool operator<(const GroundingPair& a, const GroundingPair& b) {
    return a.token != b.token ? a.token < b.token : a.concept_id < b.concept_id;
  }
};

struct PairConfig {
  double tau = 0.2;      // 0.3 is the usual entity-linking choice
  double p_gate = 0.5;
  // Whether step 2's per-token argmax ranges over kept entries only instead
  // of the full row (keep-status then checked afterwards).
  bool argmax_over_kept_only = false;

  void validate() const;
};

// Three gates, in order: alpha(n,k) must exceed tau/|c_k|; only the highest
// alpha over row n survives (ties to the lowest k); p[k] must reach p_gate.
std::vector<GroundingPair> produce_pairs(const Matrix& alpha, const Vector& p,
                                         const std::vector<Concept>& concepts,
                                         const PairConfig& cfg);

struct ConceptSpan {
  std::string concept_id;
  int start = 0;
  int end = 0;  // exclusive

  friend bool operator==(const ConceptSpan& a, const ConceptSpan& b) {
    return a.concept_id == b.concept_id && a.start == b.start && a.end == b.end;
  }
  friend bool operator<(const ConceptSpan& a, const ConceptSpan& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.concept_id < b.concept_id;
  }
};

// Maximal runs of consecutive token indices sharing one concept id become one
// half-open span; gaps split spans.
std::vector<ConceptSpan> merge_spans(const std::vector<GroundingPair>& pairs);

// one_hot[n][k] = 1 iff (n, concept k) is a pair; column order follows the
// concept set. Out-of-range pairs are a validation error.
Eigen::MatrixXi export_one_hot(const std::vector<GroundingPair>& pairs, int num_tokens,
                               const std::vector<Concept>& concepts);

// Predictions file record (JSON-lines, one record per instance).
struct PredictionRecord {
  std::string id;
  std::string system;
  std::vector<GroundingPair> pairs;
  std::vector<ConceptSpan> spans;
  std::optional<Matrix> alpha;
  std::optional<Eigen::MatrixXi> one_hot;
  std::optional<Matrix> fused;
};

std::string serialize_prediction(const PredictionRecord& rec);
void save_predictions(const std::vector<PredictionRecord>& records, const std::string& path);
std::vector<PredictionRecord> load_predictions(const std::string& path);

}  // namespace eta
