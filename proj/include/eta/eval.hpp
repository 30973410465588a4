#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "eta/corpus.hpp"
#include "eta/grounding_out.hpp"

namespace eta {

struct PrfReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0;
  long pred_count = 0;
  long gold_count = 0;
};

// 0/0 ratios resolve to 0.
PrfReport prf_from_counts(long tp, long pred_count, long gold_count);

struct InstancePrediction {
  std::string instance_id;
  std::vector<GroundingPair> pairs;
  std::vector<ConceptSpan> spans;
};

using KindLookup = std::function<ConceptKind(const std::string& instance_id,
                                             const std::string& concept_id)>;
KindLookup kind_lookup_from_instances(const std::vector<GroundingInstance>& instances);

struct SchemaLinkingReport {
  PrfReport overall;
  std::map<std::string, PrfReport> by_kind;
};

// Micro-averaged exact (concept, token) tuple matching, pooled across the
// split; kinds are scored separately as well as pooled. Prediction for an
// instance id absent from gold is a validation error.
SchemaLinkingReport schema_linking_metrics(const std::vector<LinkingGold>& gold,
                                           const std::vector<InstancePrediction>& pred,
                                           const KindLookup& kind_of = nullptr);

// Weak matching: a predicted (entity, span) is correct iff gold holds the
// same entity with an overlapping span; |Gamma| counts distinct matched
// entities per instance while duplicates still inflate the prediction count.
PrfReport weak_match_entity_metrics(const std::vector<LinkingGold>& gold,
                                    const std::vector<InstancePrediction>& pred);

// Plain-text aligned table of named reports.
std::string render_report_table(const std::vector<std::pair<std::string, PrfReport>>& rows);

}  // namespace eta
