#include "eta/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "eta/errors.hpp"

namespace eta {

using json = nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

json param_to_json(const Param& p) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < p.value.rows(); ++i)
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) arr.push_back(p.value(i, j));
  return json{{"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", std::move(arr)}};
}

void param_from_json(const json& j, Param& p, const std::string& name) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw ValidationError("checkpoint: malformed weight entry for " + name);
  Eigen::Index rows = j["rows"].get<Eigen::Index>();
  Eigen::Index cols = j["cols"].get<Eigen::Index>();
  if (rows != p.value.rows() || cols != p.value.cols())
    throw ValidationError("checkpoint: weight " + name + " has shape " + std::to_string(rows) +
                          "x" + std::to_string(cols) + ", expected " +
                          std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
  const json& data = j["data"];
  if (!data.is_array() || data.size() != static_cast<size_t>(rows * cols))
    throw ValidationError("checkpoint: weight " + name + " has wrong element count");
  size_t idx = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) p.value(i, j2) = data[idx++].get<double>();
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"cp_epochs", cfg.cp_epochs},
              {"awaken_epochs", cfg.awaken_epochs},
              {"patience", cfg.patience},
              {"lr", cfg.lr},
              {"weight_decay", cfg.weight_decay},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed},
              {"refresh", cfg.refresh == DeltaRefresh::once ? "once" : "every_epoch"},
              {"finetune", cfg.finetune == FineTune::frozen ? "frozen" : "joint"},
              {"workers", cfg.workers},
              {"contrast_margin", cfg.contrast_margin}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.cp_epochs = j.value("cp_epochs", cfg.cp_epochs);
  cfg.awaken_epochs = j.value("awaken_epochs", cfg.awaken_epochs);
  cfg.patience = j.value("patience", cfg.patience);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.refresh = j.value("refresh", std::string("every_epoch")) == std::string("once")
                    ? DeltaRefresh::once
                    : DeltaRefresh::every_epoch;
  cfg.finetune = j.value("finetune", std::string("frozen")) == std::string("joint")
                     ? FineTune::joint
                     : FineTune::frozen;
  cfg.workers = j.value("workers", cfg.workers);
  cfg.contrast_margin = j.value("contrast_margin", cfg.contrast_margin);
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& system, MicroEncoder& encoder,
                     CpHead& cp_head, GroundingHead& g_head, const TrainConfig& train_cfg) {
  json j;
  j["version"] = kCheckpointVersion;
  j["system"] = system;
  const EncoderConfig& ec = encoder.config();
  j["encoder"] = {{"d", ec.d},
                  {"layers", ec.layers},
                  {"heads", ec.heads},
                  {"ffn_mult", ec.ffn_mult},
                  {"max_len", ec.max_len}};
  j["train"] = train_config_to_json(train_cfg);
  j["vocab"] = encoder.vocab().tokens();
  json weights = json::object();
  for (Param* p : encoder.all_parameters()) weights[p->name] = param_to_json(*p);
  weights[cp_head.w.name] = param_to_json(cp_head.w);
  weights[g_head.W_e.name] = param_to_json(g_head.W_e);
  weights[g_head.W_q.name] = param_to_json(g_head.W_q);
  j["weights"] = std::move(weights);

  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open checkpoint file " + path + " for writing");
  out << j.dump() << "\n";
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open checkpoint file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("checkpoint " + path + ": invalid JSON: " + e.what());
  }
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw ValidationError("checkpoint " + path + ": missing version field");
  int version = j["version"].get<int>();
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint " + path + ": unsupported version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");

  LoadedModel model;
  model.system = j.value("system", std::string("eta"));
  const json& ej = j.at("encoder");
  model.encoder_config.d = ej.at("d").get<int>();
  model.encoder_config.layers = ej.at("layers").get<int>();
  model.encoder_config.heads = ej.at("heads").get<int>();
  model.encoder_config.ffn_mult = ej.value("ffn_mult", 4);
  model.encoder_config.max_len = ej.at("max_len").get<int>();
  model.train_config = train_config_from_json(j.value("train", json::object()));

  if (!j.contains("vocab") || !j["vocab"].is_array())
    throw ValidationError("checkpoint " + path + ": missing vocab");
  Vocabulary vocab(j["vocab"].get<std::vector<std::string>>());

  model.encoder =
      std::make_unique<MicroEncoder>(model.encoder_config, vocab, model.train_config.seed);
  model.cp_head = std::make_unique<CpHead>(model.encoder_config.d, model.train_config.seed);
  model.g_head = std::make_unique<GroundingHead>(model.encoder_config.d, model.train_config.seed);

  const json& weights = j.at("weights");
  auto load_param = [&](Param& p) {
    if (!weights.contains(p.name))
      throw ValidationError("checkpoint " + path + ": missing weight " + p.name);
    param_from_json(weights[p.name], p, p.name);
  };
  for (Param* p : model.encoder->all_parameters()) load_param(*p);
  load_param(model.cp_head->w);
  load_param(model.g_head->W_e);
  load_param(model.g_head->W_q);
  return model;
}

}  // namespace eta
