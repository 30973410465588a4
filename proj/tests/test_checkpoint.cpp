#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eta/checkpoint.hpp"
#include "eta/errors.hpp"

namespace fs = std::filesystem;

namespace {

eta::GroundingInstance sample_instance() {
  eta::GroundingInstance inst;
  inst.id = "s0";
  inst.question_tokens = {"oldest", "singer"};
  inst.concepts = {{"singer", {"singer"}, eta::ConceptKind::table},
                   {"age", {"age"}, eta::ConceptKind::column}};
  inst.weak_labels = {true, true};
  return inst;
}

}  // namespace

TEST_CASE("checkpoint round-trip restores weights and behavior") {
  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  auto inst = sample_instance();
  eta::Vocabulary vocab = eta::Vocabulary::build({inst});
  eta::MicroEncoder enc(cfg, vocab, 51);
  eta::CpHead cp(16, 52);
  eta::GroundingHead g(16, 53);
  // perturb away from the seeded init so the load has to do real work
  enc.all_parameters()[0]->value(0, 0) = 0.625;
  cp.w.value(0, 3) = -1.25;
  g.W_e.value(2, 2) = 0.5;

  fs::path path = fs::temp_directory_path() / "eta_test_checkpoint.json";
  eta::TrainConfig tc;
  tc.seed = 99;
  eta::save_checkpoint(path.string(), "eta", enc, cp, g, tc);

  auto model = eta::load_checkpoint(path.string());
  CHECK(model.system == "eta");
  CHECK(model.encoder_config.d == 16);
  CHECK(model.train_config.seed == 99);

  auto before = enc.all_parameters();
  auto after = model.encoder->all_parameters();
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i)
    CHECK((before[i]->value - after[i]->value).cwiseAbs().maxCoeff() == 0.0);
  CHECK((model.cp_head->w.value - cp.w.value).cwiseAbs().maxCoeff() == 0.0);
  CHECK((model.g_head->W_e.value - g.W_e.value).cwiseAbs().maxCoeff() == 0.0);

  eta::Encoding a = enc.encode(inst);
  eta::Encoding b = model.encoder->encode(inst);
  CHECK((a.token_reps - b.token_reps).cwiseAbs().maxCoeff() == 0.0);
  fs::remove(path);
}

TEST_CASE("checkpoint: unsupported version is rejected") {
  eta::EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  auto inst = sample_instance();
  eta::Vocabulary vocab = eta::Vocabulary::build({inst});
  eta::MicroEncoder enc(cfg, vocab, 61);
  eta::CpHead cp(8, 62);
  eta::GroundingHead g(8, 63);
  fs::path path = fs::temp_directory_path() / "eta_test_checkpoint_v.json";
  eta::save_checkpoint(path.string(), "eta", enc, cp, g, eta::TrainConfig{});

  nlohmann::json j;
  {
    std::ifstream in(path);
    in >> j;
  }
  j["version"] = 999;
  {
    std::ofstream out(path);
    out << j.dump();
  }
  try {
    eta::load_checkpoint(path.string());
    FAIL("expected ValidationError");
  } catch (const eta::ValidationError& e) {
    CHECK(std::string(e.what()).find("999") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("checkpoint: missing file raises a missing-artifact error") {
  CHECK_THROWS_AS(eta::load_checkpoint("/nonexistent/etacheckpoint.json"),
                  eta::MissingArtifactError);
}
