#include "eta/grounding_out.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eta/errors.hpp"

namespace eta {

using json = nlohmann::json;

void PairConfig::validate() const {
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("pair config: field \"tau\" must be in (0, 1]");
  if (p_gate < 0.0 || p_gate > 1.0)
    throw ConfigError("pair config: field \"p_gate\" must be in [0, 1]");
}

std::vector<GroundingPair> produce_pairs(const Matrix& alpha, const Vector& p,
                                         const std::vector<Concept>& concepts,
                                         const PairConfig& cfg) {
  cfg.validate();
  const Eigen::Index N = alpha.rows(), K = alpha.cols();
  if (K != static_cast<Eigen::Index>(concepts.size()) || p.size() != K)
    throw ShapeError("produce_pairs: alpha is " + std::to_string(N) + "x" + std::to_string(K) +
                     " but |concepts| = " + std::to_string(concepts.size()) +
                     ", |p| = " + std::to_string(p.size()));

  // step 1: per-concept threshold tau / |c_k|
  std::vector<std::vector<bool>> kept(N, std::vector<bool>(K, false));
  for (Eigen::Index k = 0; k < K; ++k) {
    double threshold = cfg.tau / static_cast<double>(concepts[k].tokens.size());
    for (Eigen::Index n = 0; n < N; ++n) kept[n][k] = alpha(n, k) > threshold;
  }

  // step 2: one concept per token (ties to the lowest k)
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::Index best = -1;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (cfg.argmax_over_kept_only && !kept[n][k]) continue;
      if (best < 0 || alpha(n, k) > alpha(n, best)) best = k;
    }
    for (Eigen::Index k = 0; k < K; ++k)
      if (k != best) kept[n][k] = false;
  }

  // step 3: concept prediction gate
  std::vector<GroundingPair> pairs;
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index k = 0; k < K; ++k)
      if (kept[n][k] && p(k) >= cfg.p_gate)
        pairs.push_back(GroundingPair{static_cast<int>(n), concepts[k].id, alpha(n, k)});
  return pairs;
}

std::vector<ConceptSpan> merge_spans(const std::vector<GroundingPair>& pairs) {
  std::vector<GroundingPair> sorted = pairs;
  std::sort(sorted.begin(), sorted.end());
  std::vector<ConceptSpan> spans;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1].concept_id == sorted[i].concept_id &&
           sorted[j + 1].token == sorted[j].token + 1)
      ++j;
    spans.push_back(ConceptSpan{sorted[i].concept_id, sorted[i].token, sorted[j].token + 1});
    i = j + 1;
  }
  return spans;
}

Eigen::MatrixXi export_one_hot(const std::vector<GroundingPair>& pairs, int num_tokens,
                               const std::vector<Concept>& concepts) {
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(num_tokens, static_cast<int>(concepts.size()));
  for (const auto& pair : pairs) {
    if (pair.token < 0 || pair.token >= num_tokens)
      throw ValidationError("export_one_hot: pair token " + std::to_string(pair.token) +
                            " out of range [0, " + std::to_string(num_tokens) + ")");
    auto it = std::find_if(concepts.begin(), concepts.end(),
                           [&](const Concept& c) { return c.id == pair.concept_id; });
    if (it == concepts.end())
      throw ValidationError("export_one_hot: pair concept " + pair.concept_id +
                            " not in concept set");
    out(pair.token, static_cast<int>(it - concepts.begin())) = 1;
  }
  return out;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json imatrix_to_json(const Eigen::MatrixXi& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows, const std::string& where) {
  if (!rows.is_array()) throw ParseError(where + ": matrix field must be an array of arrays");
  Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != static_cast<size_t>(m.cols()))
      throw ParseError(where + ": ragged matrix rows");
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

}  // namespace

std::string serialize_prediction(const PredictionRecord& rec) {
  json j;
  j["id"] = rec.id;
  if (!rec.system.empty()) j["system"] = rec.system;
  json pairs = json::array();
  for (const auto& p : rec.pairs)
    pairs.push_back({{"token", p.token}, {"concept", p.concept_id}, {"score", p.score}});
  j["pairs"] = pairs;
  json spans = json::array();
  for (const auto& s : rec.spans)
    spans.push_back({{"concept", s.concept_id}, {"start", s.start}, {"end", s.end}});
  j["spans"] = spans;
  if (rec.alpha) j["alpha"] = matrix_to_json(*rec.alpha);
  if (rec.one_hot) j["one_hot"] = imatrix_to_json(*rec.one_hot);
  if (rec.fused) j["fused"] = matrix_to_json(*rec.fused);
  return j.dump();
}

void save_predictions(const std::vector<PredictionRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open predictions file " + path + " for writing");
  for (const auto& rec : records) out << serialize_prediction(rec) << "\n";
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open predictions file " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    PredictionRecord rec;
    if (!j.contains("id") || !j["id"].is_string())
      throw ParseError(where + ": missing field \"id\"");
    rec.id = j["id"].get<std::string>();
    if (j.contains("system")) rec.system = j["system"].get<std::string>();
    if (j.contains("pairs")) {
      for (const auto& pj : j["pairs"]) {
        GroundingPair p;
        p.token = pj.at("token").get<int>();
        p.concept_id = pj.at("concept").get<std::string>();
        p.score = pj.value("score", 0.0);
        rec.pairs.push_back(std::move(p));
      }
    }
    if (j.contains("spans")) {
      for (const auto& sj : j["spans"]) {
        ConceptSpan s;
        s.concept_id = sj.at("concept").get<std::string>();
        s.start = sj.at("start").get<int>();
        s.end = sj.at("end").get<int>();
        rec.spans.push_back(std::move(s));
      }
    }
    if (j.contains("alpha")) rec.alpha = matrix_from_json(j["alpha"], where);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace eta
