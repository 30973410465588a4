#include <doctest.h>

#include <random>

#include "eta/encoder.hpp"
#include "eta/errors.hpp"

using eta::EncoderConfig;
using eta::Encoding;
using eta::GroundingInstance;
using eta::Matrix;
using eta::MicroEncoder;
using eta::Vocabulary;

namespace {

GroundingInstance make_instance() {
  GroundingInstance inst;
  inst.id = "t0";
  inst.question_tokens = {"show", "oldest", "singer"};
  inst.concepts = {{"singer", {"singer"}, eta::ConceptKind::table},
                   {"age", {"age"}, eta::ConceptKind::column}};
  inst.weak_labels = {true, true};
  return inst;
}

MicroEncoder small_encoder(std::uint64_t seed = 5) {
  EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.max_len = 64;
  Vocabulary vocab = Vocabulary::build({make_instance()});
  return MicroEncoder(cfg, vocab, seed);
}

}  // namespace

TEST_CASE("vocabulary: reserved ids are distinct and lookup lowercases") {
  Vocabulary v;
  CHECK(v.id("[PAD]") == Vocabulary::kPad);
  CHECK(v.id("[UNK]") == Vocabulary::kUnk);
  CHECK(v.id("[CLS]") == Vocabulary::kCls);
  CHECK(v.id("[SEP]") == Vocabulary::kSep);
  v.add("Singer");
  CHECK(v.id("singer") == v.id("SINGER"));
  CHECK(v.id("never-seen") == Vocabulary::kUnk);
}

TEST_CASE("encode: shape contract") {
  MicroEncoder enc = small_encoder();
  Encoding e = enc.encode(make_instance());
  CHECK(e.token_reps.rows() == 3);
  CHECK(e.token_reps.cols() == 16);
  CHECK(e.concept_reps.rows() == 2);
  CHECK(e.concept_reps.cols() == 16);
  CHECK(e.token_reps.allFinite());
  CHECK(e.concept_reps.allFinite());
}

TEST_CASE("encode: erasing a token changes the encoding but not its shape") {
  MicroEncoder enc = small_encoder();
  GroundingInstance inst = make_instance();
  Encoding base = enc.encode(inst);
  Encoding erased = enc.encode(inst, 0);
  CHECK(erased.token_reps.rows() == base.token_reps.rows());
  CHECK(erased.concept_reps.rows() == base.concept_reps.rows());
  double diff = (erased.token_reps - base.token_reps).cwiseAbs().maxCoeff();
  CHECK(diff > 0.0);
}

TEST_CASE("encode: erased index out of range is rejected") {
  MicroEncoder enc = small_encoder();
  CHECK_THROWS_AS(enc.encode(make_instance(), 7), eta::ValidationError);
}

TEST_CASE("encode: deterministic for fixed weights and input") {
  MicroEncoder enc = small_encoder();
  GroundingInstance inst = make_instance();
  Encoding a = enc.encode(inst);
  Encoding b = enc.encode(inst);
  CHECK((a.token_reps - b.token_reps).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.concept_reps - b.concept_reps).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder: same seed, same weights; different seed, different weights") {
  MicroEncoder a = small_encoder(9), b = small_encoder(9), c = small_encoder(10);
  auto pa = a.all_parameters(), pb = b.all_parameters(), pc = c.all_parameters();
  REQUIRE(pa.size() == pb.size());
  double max_ab = 0.0, max_ac = 0.0;
  for (size_t i = 0; i < pa.size(); ++i) {
    max_ab = std::max(max_ab, (pa[i]->value - pb[i]->value).cwiseAbs().maxCoeff());
    max_ac = std::max(max_ac, (pa[i]->value - pc[i]->value).cwiseAbs().maxCoeff());
  }
  CHECK(max_ab == 0.0);
  CHECK(max_ac > 0.0);
}

TEST_CASE("encoder: permuting concepts keeps shapes and question length") {
  MicroEncoder enc = small_encoder();
  GroundingInstance inst = make_instance();
  GroundingInstance permuted = inst;
  std::swap(permuted.concepts[0], permuted.concepts[1]);
  std::vector<bool> swapped = {permuted.weak_labels[1], permuted.weak_labels[0]};
  permuted.weak_labels = swapped;

  Encoding a = enc.encode(inst);
  Encoding b = enc.encode(permuted);
  CHECK(a.token_reps.rows() == b.token_reps.rows());
  CHECK(a.concept_reps.rows() == b.concept_reps.rows());
  // row k is read at concept k's first token, so the binding follows the order
  auto lay = enc.layout(permuted);
  CHECK(lay.concept_pos.size() == 2);
}

TEST_CASE("encoder: frozen encoder exposes no trainable parameters") {
  MicroEncoder enc = small_encoder();
  CHECK(enc.trainable_parameters().size() > 0);
  enc.set_frozen(true);
  CHECK(enc.trainable_parameters().empty());
  enc.set_frozen(false);
  CHECK(enc.trainable_parameters().size() == enc.all_parameters().size());
}

TEST_CASE("encoder: over-long sequences raise a length error naming the instance") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.max_len = 6;
  GroundingInstance inst = make_instance();
  Vocabulary vocab = Vocabulary::build({inst});
  MicroEncoder enc(cfg, vocab, 1);
  try {
    enc.encode(inst);
    FAIL("expected LengthError");
  } catch (const eta::LengthError& e) {
    CHECK(std::string(e.what()).find("t0") != std::string::npos);
  }
}

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  cfg.d = 10;
  cfg.heads = 4;  // not divisible
  CHECK_THROWS_AS(cfg.validate(), eta::ConfigError);
}

TEST_CASE("encoder backward matches central finite differences") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.max_len = 16;
  GroundingInstance inst = make_instance();
  Vocabulary vocab = Vocabulary::build({inst});
  MicroEncoder enc(cfg, vocab, 3);

  auto lay = enc.layout(inst);
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix C(static_cast<int>(lay.ids.size()), cfg.d);
  for (int i = 0; i < C.rows(); ++i)
    for (int j = 0; j < C.cols(); ++j) C(i, j) = dist(rng);

  auto loss = [&]() {
    MicroEncoder::ForwardCache cache;
    Matrix out = enc.forward_ids(lay.ids, cache);
    return (out.array() * C.array()).sum();
  };

  MicroEncoder::ForwardCache cache;
  Matrix out = enc.forward_ids(lay.ids, cache);
  for (eta::Param* p : enc.all_parameters()) p->zero_grad();
  enc.backward_ids(cache, C);

  const double h = 1e-5;
  int checked = 0;
  for (eta::Param* p : enc.all_parameters()) {
    // probe a couple of entries per parameter
    for (int probe = 0; probe < 2; ++probe) {
      Eigen::Index i = probe % p->value.rows();
      Eigen::Index j = (probe * 3 + 1) % p->value.cols();
      double saved = p->value(i, j);
      p->value(i, j) = saved + h;
      double lp = loss();
      p->value(i, j) = saved - h;
      double lm = loss();
      p->value(i, j) = saved;
      double fd = (lp - lm) / (2 * h);
      double an = p->grad(i, j);
      double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      CHECK(std::abs(fd - an) / denom < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 20);
}
