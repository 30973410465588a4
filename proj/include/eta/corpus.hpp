#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eta/errors.hpp"

namespace eta {

enum class ConceptKind { table, column, value, entity, other };

std::string to_string(ConceptKind kind);
ConceptKind concept_kind_from_string(const std::string& s);

// A named grounding target (table, column, cell value, KB entity) with its
// natural-language surface tokens.
struct Concept {
  std::string id;
  std::vector<std::string> tokens;  // non-empty
  ConceptKind kind = ConceptKind::other;
};

struct GoldLink {
  int token = 0;        // question token index
  std::string concept_id;  // concept id
};

// Counts every read of gold links. Training paths must leave it untouched;
// the audit test asserts exactly that.
std::uint64_t gold_access_count();

// One question with its candidate concepts and per-concept occurrence labels.
// Gold links are evaluation-only and live behind an audited accessor.
class GroundingInstance {
 public:
  std::string id;
  std::vector<std::string> question_tokens;  // x_1..x_N
  std::vector<Concept> concepts;             // c_1..c_K
  std::vector<bool> weak_labels;             // l_k, size K
  std::optional<std::string> sql;            // kept for round-tripping
  bool weak_from_sql = false;                // labels derived, not given

  int num_tokens() const { return static_cast<int>(question_tokens.size()); }
  int num_concepts() const { return static_cast<int>(concepts.size()); }

  bool has_gold() const { return gold_links_.has_value(); }
  // Evaluation-only: bumps the corpus gold-access counter.
  const std::vector<GoldLink>& gold_links() const;
  void set_gold_links(std::vector<GoldLink> links) { gold_links_ = std::move(links); }
  void clear_gold_links() { gold_links_.reset(); }

  // Throws ValidationError on any broken invariant (empty question, label
  // length, bad gold indices, duplicate concept ids).
  void validate() const;

 private:
  std::optional<std::vector<GoldLink>> gold_links_;
};

// Gold linking tuples for one instance: token-level for schema linking,
// span-level ([start, end), half open) for entity linking.
struct TokenTuple {
  std::string concept_id;
  int token = 0;
};

struct SpanTuple {
  std::string entity;
  int start = 0;
  int end = 0;  // exclusive
};

struct LinkingGold {
  std::string instance_id;
  std::vector<TokenTuple> tokens;
  std::vector<SpanTuple> spans;
};

// JSON-lines dataset IO. Each line is one instance; see README for the
// schema. Throws ParseError (naming line and field) or ValidationError
// (duplicate ids).
std::vector<GroundingInstance> load_dataset(const std::string& path);
std::vector<GroundingInstance> parse_dataset(std::istream& in, const std::string& origin);
void save_dataset(const std::vector<GroundingInstance>& instances, const std::string& path);
std::string serialize_instance(const GroundingInstance& inst);

// Marks concept k mentioned iff its normalized identifier occurs as a
// delimited identifier token in the SQL string. Case-insensitive; the SQL is
// split on anything outside [A-Za-z0-9_], so "semesters.semester_id" yields
// both parts. Dotted concept ids require every part to be present. Never
// throws; arbitrary strings degrade to token matching.
std::vector<bool> derive_weak_labels(const std::string& sql, const std::vector<Concept>& concepts);

struct SyntheticSpec {
  int vocab_size = 32;
  int concepts = 8;
  int synonyms_per_concept = 2;
  int questions = 200;
  int min_len = 6;
  int max_len = 12;
  double distractor_rate = 0.3;
  int min_mentions = 1;
  int max_mentions = 3;
  // chance a mentioned concept plants a second trigger token, making its
  // evidence redundant under single-token erasure
  double second_trigger_rate = 0.4;
  std::uint64_t seed = 7;
};

// Deterministic synthetic grounding corpus. Every question embeds one trigger
// token per mentioned concept; weak labels mark exactly the mentioned
// concepts and gold links map each trigger to its concept.
std::pair<std::vector<GroundingInstance>, std::vector<LinkingGold>>
generate_synthetic_corpus(const SyntheticSpec& spec);

// Pools gold links into eval tuples (evaluation path; reads gold).
// Span tuples merge maximal runs of adjacent gold links per concept.
std::vector<LinkingGold> linking_gold_from_instances(const std::vector<GroundingInstance>& instances);

}  // namespace eta
