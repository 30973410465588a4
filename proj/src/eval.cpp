#include "eta/eval.hpp"

#include <algorithm>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "eta/errors.hpp"

namespace eta {

PrfReport prf_from_counts(long tp, long pred_count, long gold_count) {
  PrfReport r;
  r.tp = tp;
  r.pred_count = pred_count;
  r.gold_count = gold_count;
  r.precision = pred_count > 0 ? static_cast<double>(tp) / static_cast<double>(pred_count) : 0.0;
  r.recall = gold_count > 0 ? static_cast<double>(tp) / static_cast<double>(gold_count) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

KindLookup kind_lookup_from_instances(const std::vector<GroundingInstance>& instances) {
  auto table = std::make_shared<std::unordered_map<std::string, ConceptKind>>();
  for (const auto& inst : instances)
    for (const auto& c : inst.concepts) (*table)[inst.id + "\x1f" + c.id] = c.kind;
  return [table](const std::string& instance_id, const std::string& concept_id) {
    auto it = table->find(instance_id + "\x1f" + concept_id);
    return it == table->end() ? ConceptKind::other : it->second;
  };
}

SchemaLinkingReport schema_linking_metrics(const std::vector<LinkingGold>& gold,
                                           const std::vector<InstancePrediction>& pred,
                                           const KindLookup& kind_of) {
  using Tuple = std::tuple<std::string, std::string, int>;  // instance, concept, token
  std::set<Tuple> gold_set, pred_set;
  std::unordered_set<std::string> gold_instances;
  for (const auto& lg : gold) {
    gold_instances.insert(lg.instance_id);
    for (const auto& t : lg.tokens) gold_set.emplace(lg.instance_id, t.concept_id, t.token);
  }
  for (const auto& ip : pred) {
    if (!gold_instances.count(ip.instance_id))
      throw ValidationError("schema_linking_metrics: prediction for unknown instance id " +
                            ip.instance_id);
    for (const auto& p : ip.pairs) pred_set.emplace(ip.instance_id, p.concept_id, p.token);
  }

  auto kind_name = [&](const Tuple& t) {
    if (!kind_of) return std::string("other");
    return to_string(kind_of(std::get<0>(t), std::get<1>(t)));
  };

  std::map<std::string, long> tp_k, pred_k, gold_k;
  long tp = 0;
  for (const auto& t : pred_set) {
    ++pred_k[kind_name(t)];
    if (gold_set.count(t)) {
      ++tp;
      ++tp_k[kind_name(t)];
    }
  }
  for (const auto& t : gold_set) ++gold_k[kind_name(t)];

  SchemaLinkingReport report;
  report.overall = prf_from_counts(tp, static_cast<long>(pred_set.size()),
                                   static_cast<long>(gold_set.size()));
  std::set<std::string> kinds;
  for (const auto& [k, _] : pred_k) kinds.insert(k);
  for (const auto& [k, _] : gold_k) kinds.insert(k);
  for (const auto& k : kinds)
    report.by_kind[k] = prf_from_counts(tp_k[k], pred_k[k], gold_k[k]);
  return report;
}

PrfReport weak_match_entity_metrics(const std::vector<LinkingGold>& gold,
                                    const std::vector<InstancePrediction>& pred) {
  using SpanT = std::tuple<std::string, std::string, int, int>;  // instance, entity, start, end
  auto check = [](const std::string& inst, int start, int end) {
    if (start < 0 || end <= start)
      throw ValidationError("weak_match_entity_metrics: invalid span [" +
                            std::to_string(start) + ", " + std::to_string(end) +
                            ") in instance " + inst);
  };
  std::set<SpanT> gold_set, pred_set;
  for (const auto& lg : gold)
    for (const auto& s : lg.spans) {
      check(lg.instance_id, s.start, s.end);
      gold_set.emplace(lg.instance_id, s.entity, s.start, s.end);
    }
  for (const auto& ip : pred)
    for (const auto& s : ip.spans) {
      check(ip.instance_id, s.start, s.end);
      pred_set.emplace(ip.instance_id, s.concept_id, s.start, s.end);
    }

  // Gamma: distinct (instance, entity) with some overlapping gold/pred pair
  std::set<std::pair<std::string, std::string>> matched;
  for (const auto& g : gold_set)
    for (const auto& p : pred_set) {
      if (std::get<0>(g) != std::get<0>(p) || std::get<1>(g) != std::get<1>(p)) continue;
      int overlap_start = std::max(std::get<2>(g), std::get<2>(p));
      int overlap_end = std::min(std::get<3>(g), std::get<3>(p));
      if (overlap_start < overlap_end)
        matched.emplace(std::get<0>(g), std::get<1>(g));
    }
  return prf_from_counts(static_cast<long>(matched.size()), static_cast<long>(pred_set.size()),
                         static_cast<long>(gold_set.size()));
}

std::string render_report_table(const std::vector<std::pair<std::string, PrfReport>>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %9s %9s %9s %7s %7s %7s\n", "system/kind", "P", "R",
                "F1", "tp", "pred", "gold");
  out << line;
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof(line), "%-24s %9.4f %9.4f %9.4f %7ld %7ld %7ld\n", name.c_str(),
                  r.precision, r.recall, r.f1, r.tp, r.pred_count, r.gold_count);
    out << line;
  }
  return out.str();
}

}  // namespace eta
