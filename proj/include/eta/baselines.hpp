#pragma once

#include <string>
#include <vector>

#include "eta/corpus.hpp"
#include "eta/encoder.hpp"
#include "eta/eta_pipeline.hpp"
#include "eta/grounding_out.hpp"

namespace eta {

// Candidate n-gram/concept match; spans are at most 5 tokens wide.
struct MatchSpan {
  int start = 0;
  int end = 0;  // exclusive
  std::string concept_id;
  double similarity = 0.0;
};

// 1 - levenshtein(a, b) / max(|a|, |b|); 1.0 for two empty strings.
double normalized_edit_similarity(const std::string& a, const std::string& b);

// Fuzzy n-gram linker: every n-gram (n <= 5) is compared to every concept's
// surface string (both lowercased, tokens joined by spaces). Candidates at or
// above min_sim claim their tokens greedily in (similarity desc, length desc,
// start asc, concept order) order; a candidate touching a claimed token is
// dropped whole.
std::vector<GroundingPair> ngram_match(const GroundingInstance& instance, double min_sim = 0.8);

// Raw dot products q_n . e_k of an encoder's representations, no learned
// parts. Pair extraction happens downstream on the column softmax.
Matrix sim_scores(const Encoding& enc);

// Max-pooled concept score used by the contrast baseline.
Vector max_pool_scores(const Matrix& scores);

// sigmoid of the max-pooled score, the contrast stand-in for p_k.
ConfidenceVector contrast_confidences(const Matrix& scores);

// Margin training: for every (mentioned, unmentioned) concept pair within an
// instance, hinge on the max-pooled bilinear scores. Trains the scorer and
// the encoder jointly. Instances lacking a positive or a negative concept
// are skipped and counted.
struct ContrastOutcome {
  TrainTrace trace;
  long skipped = 0;
};
ContrastOutcome contrast_train(const std::vector<GroundingInstance>& data, MicroEncoder& encoder,
                               GroundingHead& scorer, const TrainConfig& cfg);

}  // namespace eta
