#include "eta/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace eta {

using json = nlohmann::json;

namespace {
std::atomic<std::uint64_t> g_gold_reads{0};
}

std::uint64_t gold_access_count() { return g_gold_reads.load(); }

const std::vector<GoldLink>& GroundingInstance::gold_links() const {
  g_gold_reads.fetch_add(1, std::memory_order_relaxed);
  if (!gold_links_) {
    static const std::vector<GoldLink> empty;
    return empty;
  }
  return *gold_links_;
}

std::string to_string(ConceptKind kind) {
  switch (kind) {
    case ConceptKind::table: return "table";
    case ConceptKind::column: return "column";
    case ConceptKind::value: return "value";
    case ConceptKind::entity: return "entity";
    case ConceptKind::other: return "other";
  }
  return "other";
}

ConceptKind concept_kind_from_string(const std::string& s) {
  if (s == "table") return ConceptKind::table;
  if (s == "column") return ConceptKind::column;
  if (s == "value") return ConceptKind::value;
  if (s == "entity") return ConceptKind::entity;
  if (s == "other") return ConceptKind::other;
  throw ParseError("unknown concept kind \"" + s + "\"");
}

void GroundingInstance::validate() const {
  if (question_tokens.empty())
    throw ValidationError("instance " + id + ": question_tokens must be non-empty");
  if (concepts.empty())
    throw ValidationError("instance " + id + ": concepts must be non-empty");
  if (weak_labels.size() != concepts.size())
    throw ValidationError("instance " + id + ": weak_labels length " +
                          std::to_string(weak_labels.size()) + " != K = " +
                          std::to_string(concepts.size()));
  std::unordered_set<std::string> ids;
  for (const auto& c : concepts) {
    if (c.tokens.empty())
      throw ValidationError("instance " + id + ": concept " + c.id + " has no tokens");
    if (!ids.insert(c.id).second)
      throw ValidationError("instance " + id + ": duplicate concept id " + c.id);
  }
  if (gold_links_) {
    for (const auto& link : *gold_links_) {
      if (link.token < 0 || link.token >= num_tokens())
        throw ValidationError("instance " + id + ": gold link token index " +
                              std::to_string(link.token) + " out of range");
      if (!ids.count(link.concept_id))
        throw ValidationError("instance " + id + ": gold link concept " + link.concept_id +
                              " not in concept set");
    }
  }
}

namespace {

GroundingInstance instance_from_json(const json& j, const std::string& where) {
  auto need = [&](const char* field) -> const json& {
    auto it = j.find(field);
    if (it == j.end())
      throw ParseError(where + ": missing field \"" + std::string(field) + "\"");
    return *it;
  };
  auto type_err = [&](const char* field, const char* want) {
    return ParseError(where + ": field \"" + std::string(field) + "\" must be " + want);
  };

  GroundingInstance inst;
  const json& idj = need("id");
  if (!idj.is_string()) throw type_err("id", "a string");
  inst.id = idj.get<std::string>();

  const json& qt = need("question_tokens");
  if (!qt.is_array() || qt.empty()) throw type_err("question_tokens", "a non-empty array");
  for (const auto& t : qt) {
    if (!t.is_string()) throw type_err("question_tokens", "an array of strings");
    inst.question_tokens.push_back(t.get<std::string>());
  }

  const json& cs = need("concepts");
  if (!cs.is_array() || cs.empty()) throw type_err("concepts", "a non-empty array");
  for (const auto& cj : cs) {
    if (!cj.is_object()) throw type_err("concepts", "an array of objects");
    Concept c;
    auto cid = cj.find("id");
    if (cid == cj.end() || !cid->is_string())
      throw ParseError(where + ": concept missing string field \"id\"");
    c.id = cid->get<std::string>();
    auto ct = cj.find("tokens");
    if (ct == cj.end() || !ct->is_array() || ct->empty())
      throw ParseError(where + ": concept " + c.id + " field \"tokens\" must be a non-empty array");
    for (const auto& t : *ct) {
      if (!t.is_string()) throw ParseError(where + ": concept " + c.id + " tokens must be strings");
      c.tokens.push_back(t.get<std::string>());
    }
    auto ck = cj.find("kind");
    if (ck != cj.end()) {
      if (!ck->is_string()) throw ParseError(where + ": concept " + c.id + " field \"kind\" must be a string");
      try {
        c.kind = concept_kind_from_string(ck->get<std::string>());
      } catch (const ParseError&) {
        throw ParseError(where + ": concept " + c.id + ": unknown kind \"" +
                         ck->get<std::string>() + "\"");
      }
    }
    inst.concepts.push_back(std::move(c));
  }

  auto wl = j.find("weak_labels");
  auto sq = j.find("sql");
  if (sq != j.end()) {
    if (!sq->is_string()) throw type_err("sql", "a string");
    inst.sql = sq->get<std::string>();
  }
  if (wl != j.end()) {
    if (!wl->is_array()) throw type_err("weak_labels", "an array of booleans");
    for (const auto& b : *wl) {
      if (!b.is_boolean()) throw type_err("weak_labels", "an array of booleans");
      inst.weak_labels.push_back(b.get<bool>());
    }
    if (inst.weak_labels.size() != inst.concepts.size())
      throw ParseError(where + ": field \"weak_labels\" has length " +
                       std::to_string(inst.weak_labels.size()) + " but K = " +
                       std::to_string(inst.concepts.size()));
  } else if (inst.sql) {
    inst.weak_labels = derive_weak_labels(*inst.sql, inst.concepts);
    inst.weak_from_sql = true;
  } else {
    throw ParseError(where + ": missing field \"weak_labels\" (and no \"sql\" to derive it from)");
  }

  auto gl = j.find("gold_links");
  if (gl != j.end()) {
    if (!gl->is_array()) throw type_err("gold_links", "an array of objects");
    std::vector<GoldLink> links;
    for (const auto& lj : *gl) {
      auto tok = lj.find("token");
      auto con = lj.find("concept");
      if (tok == lj.end() || !tok->is_number_integer() || con == lj.end() || !con->is_string())
        throw ParseError(where + ": field \"gold_links\" entries need integer \"token\" and string \"concept\"");
      links.push_back(GoldLink{tok->get<int>(), con->get<std::string>()});
    }
    inst.set_gold_links(std::move(links));
  }

  try {
    inst.validate();
  } catch (const ValidationError& e) {
    throw ParseError(where + ": " + e.what());
  }
  return inst;
}

}  // namespace

std::vector<GroundingInstance> parse_dataset(std::istream& in, const std::string& origin) {
  std::vector<GroundingInstance> instances;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = origin + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": line is not a JSON object");
    GroundingInstance inst = instance_from_json(j, where);
    if (!seen_ids.insert(inst.id).second)
      throw ValidationError(where + ": duplicate instance id " + inst.id);
    instances.push_back(std::move(inst));
  }
  return instances;
}

std::vector<GroundingInstance> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file " + path);
  return parse_dataset(in, path);
}

std::string serialize_instance(const GroundingInstance& inst) {
  json j;
  j["id"] = inst.id;
  j["question_tokens"] = inst.question_tokens;
  json cs = json::array();
  for (const auto& c : inst.concepts) {
    cs.push_back({{"id", c.id}, {"tokens", c.tokens}, {"kind", to_string(c.kind)}});
  }
  j["concepts"] = cs;
  if (!inst.weak_from_sql) {
    j["weak_labels"] = std::vector<bool>(inst.weak_labels.begin(), inst.weak_labels.end());
  }
  if (inst.sql) j["sql"] = *inst.sql;
  if (inst.has_gold()) {
    json gl = json::array();
    for (const auto& link : inst.gold_links())
      gl.push_back({{"token", link.token}, {"concept", link.concept_id}});
    j["gold_links"] = gl;
  }
  return j.dump();
}

void save_dataset(const std::vector<GroundingInstance>& instances, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file " + path);
  for (const auto& inst : instances) out << serialize_instance(inst) << "\n";
}

namespace {

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::unordered_set<std::string> identifier_tokens(const std::string& text) {
  std::unordered_set<std::string> out;
  std::string cur;
  for (char c : text) {
    if (ident_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

}  // namespace

std::vector<bool> derive_weak_labels(const std::string& sql, const std::vector<Concept>& concepts) {
  auto sql_tokens = identifier_tokens(sql);
  std::vector<bool> labels(concepts.size(), false);
  for (size_t k = 0; k < concepts.size(); ++k) {
    std::string ident = lower(concepts[k].id);
    // dotted ids ("t.col") require every component to appear
    bool all = true, any = false;
    std::string part;
    std::stringstream ss(ident);
    while (std::getline(ss, part, '.')) {
      if (part.empty()) continue;
      any = true;
      if (!sql_tokens.count(part)) {
        all = false;
        break;
      }
    }
    labels[k] = any && all;
  }
  return labels;
}

std::pair<std::vector<GroundingInstance>, std::vector<LinkingGold>>
generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.concepts < 1) throw ValidationError("synthetic spec: concepts must be >= 1");
  if (spec.vocab_size < 1) throw ValidationError("synthetic spec: vocab_size must be >= 1");
  if (spec.synonyms_per_concept < 1)
    throw ValidationError("synthetic spec: synonyms_per_concept must be >= 1");
  if (spec.questions < 1) throw ValidationError("synthetic spec: questions must be >= 1");
  if (spec.min_len < 1 || spec.max_len < spec.min_len)
    throw ValidationError("synthetic spec: bad question length range");
  if (spec.distractor_rate < 0.0 || spec.distractor_rate > 1.0)
    throw ValidationError("synthetic spec: distractor_rate must be in [0, 1]");
  if (spec.second_trigger_rate < 0.0 || spec.second_trigger_rate > 1.0)
    throw ValidationError("synthetic spec: second_trigger_rate must be in [0, 1]");
  if (spec.min_mentions < 1 || spec.max_mentions < spec.min_mentions)
    throw ValidationError("synthetic spec: bad mention range");

  int trigger_words = spec.concepts * spec.synonyms_per_concept;
  // one filler word plus at least one distractor word beyond the trigger pool
  if (spec.vocab_size < trigger_words + 2)
    throw ValidationError("synthetic spec: vocab_size " + std::to_string(spec.vocab_size) +
                          " too small for " + std::to_string(trigger_words) +
                          " trigger words plus filler and distractors");

  std::mt19937_64 rng(spec.seed);

  // random distinct lowercase words; lengths 4..8 keep pairwise edit
  // similarity low
  std::set<std::string> used;
  std::vector<std::string> words;
  std::uniform_int_distribution<int> len_dist(4, 8);
  std::uniform_int_distribution<int> ch_dist(0, 25);
  while (static_cast<int>(words.size()) < spec.vocab_size) {
    int len = len_dist(rng);
    std::string w;
    for (int i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + ch_dist(rng)));
    if (used.insert(w).second) words.push_back(w);
  }

  std::vector<Concept> concepts;
  std::vector<std::vector<std::string>> synonyms(spec.concepts);
  for (int k = 0; k < spec.concepts; ++k) {
    for (int s = 0; s < spec.synonyms_per_concept; ++s)
      synonyms[k].push_back(words[k * spec.synonyms_per_concept + s]);
    Concept c;
    c.id = "c_" + synonyms[k][0];
    c.tokens = {synonyms[k][0]};
    c.kind = (k % 2 == 0) ? ConceptKind::column : ConceptKind::table;
    concepts.push_back(std::move(c));
  }
  const std::string filler = words[trigger_words];
  std::vector<std::string> distractors(words.begin() + trigger_words + 1, words.end());

  std::vector<GroundingInstance> instances;
  std::vector<LinkingGold> gold;
  std::uniform_int_distribution<int> qlen_dist(spec.min_len, spec.max_len);
  int max_m = std::min(spec.max_mentions, spec.concepts);
  std::uniform_int_distribution<int> mention_dist(spec.min_mentions, max_m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int q = 0; q < spec.questions; ++q) {
    int m = mention_dist(rng);

    std::vector<int> concept_ids(spec.concepts);
    for (int k = 0; k < spec.concepts; ++k) concept_ids[k] = k;
    std::shuffle(concept_ids.begin(), concept_ids.end(), rng);
    concept_ids.resize(m);

    // each mention plants one trigger, sometimes two
    std::vector<int> trigger_count(m, 1);
    int total_triggers = m;
    for (int i = 0; i < m; ++i)
      if (unit(rng) < spec.second_trigger_rate) {
        trigger_count[i] = 2;
        ++total_triggers;
      }
    int len = std::max(qlen_dist(rng), total_triggers);

    std::vector<int> positions(len);
    for (int i = 0; i < len; ++i) positions[i] = i;
    std::shuffle(positions.begin(), positions.end(), rng);
    positions.resize(total_triggers);

    GroundingInstance inst;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth-%04d", q);
    inst.id = buf;
    inst.concepts = concepts;
    inst.weak_labels.assign(concepts.size(), false);
    inst.question_tokens.assign(len, filler);

    std::vector<GoldLink> links;
    int slot = 0;
    for (int i = 0; i < m; ++i) {
      int k = concept_ids[i];
      inst.weak_labels[k] = true;
      for (int t = 0; t < trigger_count[i]; ++t) {
        int pos = positions[slot++];
        std::uniform_int_distribution<int> syn_dist(0, spec.synonyms_per_concept - 1);
        inst.question_tokens[pos] = synonyms[k][syn_dist(rng)];
        links.push_back(GoldLink{pos, concepts[k].id});
      }
    }
    std::sort(links.begin(), links.end(),
              [](const GoldLink& a, const GoldLink& b) { return a.token < b.token; });

    std::unordered_set<int> trigger_pos(positions.begin(), positions.end());
    for (int i = 0; i < len; ++i) {
      if (trigger_pos.count(i)) continue;
      if (unit(rng) < spec.distractor_rate) {
        std::uniform_int_distribution<size_t> d_dist(0, distractors.size() - 1);
        inst.question_tokens[i] = distractors[d_dist(rng)];
      }
    }

    inst.set_gold_links(links);
    inst.validate();
    instances.push_back(std::move(inst));
  }

  gold = linking_gold_from_instances(instances);
  return {std::move(instances), std::move(gold)};
}

std::vector<LinkingGold> linking_gold_from_instances(const std::vector<GroundingInstance>& instances) {
  std::vector<LinkingGold> out;
  for (const auto& inst : instances) {
    if (!inst.has_gold()) continue;
    LinkingGold lg;
    lg.instance_id = inst.id;
    auto links = inst.gold_links();
    std::sort(links.begin(), links.end(), [](const GoldLink& a, const GoldLink& b) {
      return a.token < b.token || (a.token == b.token && a.concept_id < b.concept_id);
    });
    for (const auto& link : links) lg.tokens.push_back(TokenTuple{link.concept_id, link.token});
    // spans: maximal runs of adjacent tokens sharing a concept
    size_t i = 0;
    while (i < links.size()) {
      size_t j = i;
      while (j + 1 < links.size() && links[j + 1].concept_id == links[i].concept_id &&
             links[j + 1].token == links[j].token + 1)
        ++j;
      lg.spans.push_back(SpanTuple{links[i].concept_id, links[i].token, links[j].token + 1});
      i = j + 1;
    }
    out.push_back(std::move(lg));
  }
  return out;
}

}  // namespace eta
