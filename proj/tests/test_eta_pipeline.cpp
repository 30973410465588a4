#include <doctest.h>

#include <cmath>
#include <random>

#include "eta/errors.hpp"
#include "eta/eta_pipeline.hpp"

using eta::ConfidenceVector;
using eta::CpHead;
using eta::Encoding;
using eta::GroundingHead;
using eta::GroundingInstance;
using eta::Matrix;
using eta::MicroEncoder;
using eta::TrainConfig;
using eta::Vector;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

Encoding make_encoding(const Matrix& Q, const Matrix& E) {
  Encoding enc;
  enc.token_reps = Q;
  enc.concept_reps = E;
  enc.d = static_cast<int>(Q.cols());
  return enc;
}

// Test double returning canned concept logits through a unit cp head:
// concept rep k = (logit_k, 0, 0, ...) so sigmoid(w . e_k) hits the target.
class StubEncoder : public eta::Encoder {
 public:
  StubEncoder(int d, Vector baseline_logits, std::vector<Vector> erased_logits)
      : d_(d), baseline_(std::move(baseline_logits)), erased_(std::move(erased_logits)) {}

  Encoding encode(const GroundingInstance& inst,
                  std::optional<int> erased_token) const override {
    const Vector& logits = erased_token ? erased_.at(*erased_token) : baseline_;
    Encoding enc;
    enc.d = d_;
    enc.token_reps = Matrix::Zero(inst.num_tokens(), d_);
    enc.concept_reps = Matrix::Zero(logits.size(), d_);
    enc.concept_reps.col(0) = logits;
    return enc;
  }
  std::vector<eta::Param*> trainable_parameters() override { return {}; }
  int dim() const override { return d_; }

 private:
  int d_;
  Vector baseline_;
  std::vector<Vector> erased_;
};

CpHead unit_head(int d) {
  CpHead head(d, 0);
  head.w.value.setZero();
  head.w.value(0, 0) = 1.0;
  return head;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_CASE("predict_concepts: zero weights give 0.5 everywhere") {
  std::mt19937 rng(41);
  Encoding enc = make_encoding(random_matrix(2, 8, rng), random_matrix(3, 8, rng));
  CpHead head(8, 1);
  head.w.value.setZero();
  ConfidenceVector p = eta::predict_concepts(enc, head);
  REQUIRE(p.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(p(k) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("predict_concepts: saturated logit exceeds 0.999") {
  Encoding enc = make_encoding(Matrix::Zero(1, 4), Matrix::Zero(1, 4));
  enc.concept_reps(0, 0) = 20.0;
  CpHead head = unit_head(4);
  ConfidenceVector p = eta::predict_concepts(enc, head);
  CHECK(p(0) > 0.999);
}

TEST_CASE("predict_concepts: matches sigmoid-of-dot-product oracle") {
  std::mt19937 rng(43);
  Encoding enc = make_encoding(random_matrix(2, 8, rng), random_matrix(3, 8, rng));
  CpHead head(8, 2);
  ConfidenceVector p = eta::predict_concepts(enc, head);
  for (int k = 0; k < 3; ++k) {
    double dot = 0.0;
    for (int j = 0; j < 8; ++j) dot += head.w.value(0, j) * enc.concept_reps(k, j);
    double oracle = 1.0 / (1.0 + std::exp(-dot));
    CHECK(p(k) == doctest::Approx(oracle).epsilon(1e-6));
  }
}

TEST_CASE("predict_concepts: dimension mismatch is a shape error") {
  Encoding enc = make_encoding(Matrix::Zero(1, 4), Matrix::Zero(1, 4));
  CpHead head(8, 0);
  CHECK_THROWS_AS(eta::predict_concepts(enc, head), eta::ShapeError);
}

TEST_CASE("pseudo_alignment reproduces the 0.92 - 0.65 = 0.27 arithmetic exactly") {
  Vector p(1);
  p << 0.92;
  std::vector<Vector> erased{Vector(1)};
  erased[0] << 0.65;
  Matrix delta = eta::pseudo_alignment(p, erased, {true});
  CHECK(delta(0, 0) == 0.92 - 0.65);  // bit-exact against the formula
  CHECK(delta(0, 0) == doctest::Approx(0.27).epsilon(1e-12));
}

TEST_CASE("erase_and_score: Figure-2 confidences through the encoder path") {
  GroundingInstance inst;
  inst.id = "fig2";
  inst.question_tokens = {"stadium"};
  inst.concepts = {{"venue", {"venue"}, eta::ConceptKind::column}};
  inst.weak_labels = {true};

  Vector base(1);
  base << logit(0.92);
  std::vector<Vector> erased{Vector(1)};
  erased[0] << logit(0.65);
  StubEncoder enc(4, base, erased);
  CpHead head = unit_head(4);

  Matrix delta = eta::erase_and_score(inst, enc, head);
  REQUIRE(delta.rows() == 1);
  REQUIRE(delta.cols() == 1);
  CHECK(delta(0, 0) == doctest::Approx(0.27).epsilon(1e-12));
}

TEST_CASE("erase_and_score: unlabeled concepts are gated to zero") {
  GroundingInstance inst;
  inst.id = "gate";
  inst.question_tokens = {"a", "b"};
  inst.concepts = {{"c1", {"x"}, eta::ConceptKind::column},
                   {"c2", {"y"}, eta::ConceptKind::column}};
  inst.weak_labels = {false, true};

  Vector base(2);
  base << logit(0.9), logit(0.9);
  std::vector<Vector> erased{Vector(2), Vector(2)};
  erased[0] << logit(0.2), logit(0.95);  // c2 got MORE confident after erasing token 0
  erased[1] << logit(0.2), logit(0.4);
  StubEncoder enc(4, base, erased);
  CpHead head = unit_head(4);

  Matrix delta = eta::erase_and_score(inst, enc, head);
  CHECK(delta(0, 0) == 0.0);  // l = 0 kills the column
  CHECK(delta(1, 0) == 0.0);
  CHECK(delta(0, 1) == 0.0);  // p_hat > p clamps at zero
  CHECK(delta(1, 1) > 0.0);
}

TEST_CASE("erase_and_score: worker count does not change the result") {
  GroundingInstance inst;
  inst.id = "par";
  inst.question_tokens = {"a", "b", "c", "d", "e"};
  inst.concepts = {{"c1", {"a"}, eta::ConceptKind::column},
                   {"c2", {"d"}, eta::ConceptKind::table}};
  inst.weak_labels = {true, true};
  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  eta::Vocabulary vocab = eta::Vocabulary::build({inst});
  MicroEncoder enc(cfg, vocab, 11);
  CpHead head(16, 4);

  Matrix one = eta::erase_and_score(inst, enc, head, 1);
  Matrix four = eta::erase_and_score(inst, enc, head, 4);
  CHECK((one - four).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pseudo alignment invariants on random instances") {
  eta::SyntheticSpec spec;
  spec.questions = 6;
  spec.concepts = 4;
  spec.vocab_size = 24;
  spec.seed = 77;
  auto [data, golds] = eta::generate_synthetic_corpus(spec);
  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  eta::Vocabulary vocab = eta::Vocabulary::build(data);
  MicroEncoder enc(cfg, vocab, 13);
  CpHead head(16, 5);
  for (const auto& inst : data) {
    Matrix delta = eta::erase_and_score(inst, enc, head);
    CHECK(delta.minCoeff() >= 0.0);
    CHECK(delta.maxCoeff() <= 1.0);
    for (int k = 0; k < inst.num_concepts(); ++k)
      if (!inst.weak_labels[k]) CHECK(delta.col(k).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("grounding_scores: identity weights on identical vectors give norm^2/sqrt(d)") {
  std::mt19937 rng(47);
  Matrix Q = random_matrix(1, 8, rng);
  Encoding enc = make_encoding(Q, Q);
  GroundingHead head(8, 0);
  head.W_e.value.setIdentity();
  head.W_q.value.setIdentity();
  Matrix g = eta::grounding_scores(enc, head);
  CHECK(g(0, 0) ==
        doctest::Approx(Q.row(0).squaredNorm() / std::sqrt(8.0)).epsilon(1e-12));
}

TEST_CASE("grounding_scores: zero W_q annihilates") {
  std::mt19937 rng(53);
  Encoding enc = make_encoding(random_matrix(3, 8, rng), random_matrix(2, 8, rng));
  GroundingHead head(8, 1);
  head.W_q.value.setZero();
  Matrix g = eta::grounding_scores(enc, head);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grounding_scores: matches triple-loop oracle") {
  std::mt19937 rng(59);
  Encoding enc = make_encoding(random_matrix(2, 8, rng), random_matrix(3, 8, rng));
  GroundingHead head(8, 2);
  Matrix g = eta::grounding_scores(enc, head);
  REQUIRE(g.rows() == 2);
  REQUIRE(g.cols() == 3);
  for (int n = 0; n < 2; ++n)
    for (int k = 0; k < 3; ++k) {
      double dot = 0.0;
      for (int a = 0; a < 8; ++a) {
        double we = 0.0, wq = 0.0;
        for (int b = 0; b < 8; ++b) {
          we += head.W_e.value(a, b) * enc.concept_reps(k, b);
          wq += head.W_q.value(a, b) * enc.token_reps(n, b);
        }
        dot += we * wq;
      }
      CHECK(g(n, k) == doctest::Approx(dot / std::sqrt(8.0)).epsilon(1e-6));
    }
}

TEST_CASE("grounding_scores: dimension mismatch is a shape error") {
  std::mt19937 rng(61);
  Encoding enc = make_encoding(random_matrix(2, 4, rng), random_matrix(3, 4, rng));
  GroundingHead head(8, 0);
  CHECK_THROWS_AS(eta::grounding_scores(enc, head), eta::ShapeError);
}

TEST_CASE("normalize output is column-stochastic within 1e-6") {
  std::mt19937 rng(67);
  for (int trial = 0; trial < 25; ++trial) {
    Matrix g = random_matrix(4, 3, rng, 1e4);
    Matrix alpha = eta::normalize(g);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(alpha.col(k).sum() - 1.0) < 1e-6);
    CHECK(alpha.minCoeff() >= 0.0);
    CHECK(alpha.maxCoeff() <= 1.0);
  }
}

TEST_CASE("awakening gradients match central finite differences") {
  std::mt19937 rng(71);
  const int N = 3, K = 3, d = 8;
  for (int trial = 0; trial < 5; ++trial) {
    Matrix Q = random_matrix(N, d, rng);
    Matrix E = random_matrix(K, d, rng);
    Matrix delta = random_matrix(N, K, rng, 0.5).cwiseAbs();
    Encoding enc = make_encoding(Q, E);
    GroundingHead head(d, 100 + trial);

    auto loss = [&]() {
      return eta::awakening_loss(eta::normalize(eta::grounding_scores(enc, head)), delta);
    };

    head.W_e.zero_grad();
    head.W_q.zero_grad();
    Matrix alpha = eta::normalize(eta::grounding_scores(enc, head));
    Matrix dG = eta::awakening_loss_score_grad(alpha, delta);
    eta::GroundingGrads grads = eta::accumulate_grounding_grads(enc, head, dG);

    const double h = 1e-5;
    auto check_param = [&](eta::Param& p) {
      for (int probe = 0; probe < 6; ++probe) {
        Eigen::Index i = (probe * 5 + 1) % p.value.rows();
        Eigen::Index j = (probe * 3 + 2) % p.value.cols();
        double saved = p.value(i, j);
        p.value(i, j) = saved + h;
        double lp = loss();
        p.value(i, j) = saved - h;
        double lm = loss();
        p.value(i, j) = saved;
        double fd = (lp - lm) / (2 * h);
        double an = p.grad(i, j);
        double denom = std::max({std::abs(fd), std::abs(an), 1e-10});
        CHECK(std::abs(fd - an) / denom < 1e-4);
      }
    };
    check_param(head.W_e);
    check_param(head.W_q);

    // dQ and dE feed the joint fine-tune mode; probe them the same way
    for (int probe = 0; probe < 4; ++probe) {
      Eigen::Index i = probe % N, j = (probe * 3 + 1) % d;
      double saved = Q(i, j);
      enc.token_reps(i, j) = saved + h;
      double lp = loss();
      enc.token_reps(i, j) = saved - h;
      double lm = loss();
      enc.token_reps(i, j) = saved;
      double fd = (lp - lm) / (2 * h);
      double an = grads.dQ(i, j);
      double denom = std::max({std::abs(fd), std::abs(an), 1e-10});
      CHECK(std::abs(fd - an) / denom < 1e-4);
    }
  }
}

TEST_CASE("delta_as_prediction modes") {
  Matrix delta(2, 2);
  delta << 0.2, 0.0, 0.2, 0.0;

  Matrix raw = eta::delta_as_prediction(delta, eta::DeltaMode::raw);
  CHECK((raw - delta).cwiseAbs().maxCoeff() == 0.0);

  Matrix summed = eta::delta_as_prediction(delta, eta::DeltaMode::sum);
  CHECK(summed(0, 0) == doctest::Approx(0.5));
  CHECK(summed(1, 0) == doctest::Approx(0.5));
  CHECK(summed(0, 1) == 0.0);  // all-zero column stays all-zero
  CHECK(summed(1, 1) == 0.0);

  Matrix soft = eta::delta_as_prediction(delta, eta::DeltaMode::softmax);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(soft.col(k).sum() - 1.0) < 1e-12);
}

TEST_CASE("train config validation names the offending field") {
  TrainConfig cfg;
  cfg.lr = 0.0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const eta::ConfigError& e) {
    CHECK(std::string(e.what()).find("lr") != std::string::npos);
  }
}

TEST_CASE("awaken: zero epochs leave the grounding head unchanged") {
  eta::SyntheticSpec spec;
  spec.questions = 4;
  spec.concepts = 3;
  spec.vocab_size = 16;
  spec.seed = 5;
  auto [data, golds] = eta::generate_synthetic_corpus(spec);
  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  eta::Vocabulary vocab = eta::Vocabulary::build(data);
  MicroEncoder enc(cfg, vocab, 21);
  CpHead cp(16, 6);
  GroundingHead g(16, 7);
  Matrix we = g.W_e.value, wq = g.W_q.value;

  TrainConfig tc;
  tc.awaken_epochs = 0;
  eta::awaken(data, enc, cp, g, tc);
  CHECK((g.W_e.value - we).cwiseAbs().maxCoeff() == 0.0);
  CHECK((g.W_q.value - wq).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("awaken: refresh=once keeps the pseudo alignment bit-identical when frozen") {
  eta::SyntheticSpec spec;
  spec.questions = 5;
  spec.concepts = 3;
  spec.vocab_size = 16;
  spec.seed = 9;
  auto [data, golds] = eta::generate_synthetic_corpus(spec);
  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  eta::Vocabulary vocab = eta::Vocabulary::build(data);
  MicroEncoder enc(cfg, vocab, 23);
  CpHead cp(16, 8);
  GroundingHead g(16, 9);

  std::vector<Matrix> before;
  for (const auto& inst : data) before.push_back(eta::erase_and_score(inst, enc, cp));

  TrainConfig tc;
  tc.awaken_epochs = 3;
  tc.refresh = eta::DeltaRefresh::once;
  tc.finetune = eta::FineTune::frozen;
  eta::awaken(data, enc, cp, g, tc);

  for (size_t i = 0; i < data.size(); ++i) {
    Matrix after = eta::erase_and_score(data[i], enc, cp);
    CHECK((after - before[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("training paths never read gold links") {
  eta::SyntheticSpec spec;
  spec.questions = 6;
  spec.concepts = 3;
  spec.vocab_size = 16;
  spec.seed = 12;
  auto [data, golds] = eta::generate_synthetic_corpus(spec);
  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  eta::Vocabulary vocab = eta::Vocabulary::build(data);
  MicroEncoder enc(cfg, vocab, 31);
  CpHead cp(16, 10);
  GroundingHead g(16, 11);

  TrainConfig tc;
  tc.cp_epochs = 2;
  tc.awaken_epochs = 2;
  auto before = eta::gold_access_count();
  eta::train_concept_prediction(data, enc, cp, tc);
  eta::awaken(data, enc, cp, g, tc);
  for (const auto& inst : data) eta::erase_and_score(inst, enc, cp);
  CHECK(eta::gold_access_count() == before);
}

TEST_CASE("train_concept_prediction: constant-zero labels push confidences low") {
  eta::SyntheticSpec spec;
  spec.questions = 8;
  spec.concepts = 3;
  spec.vocab_size = 16;
  spec.seed = 15;
  auto [data, golds] = eta::generate_synthetic_corpus(spec);
  for (auto& inst : data) inst.weak_labels.assign(inst.weak_labels.size(), false);

  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  eta::Vocabulary vocab = eta::Vocabulary::build(data);
  MicroEncoder enc(cfg, vocab, 33);
  CpHead cp(16, 12);
  TrainConfig tc;
  tc.cp_epochs = 40;
  tc.lr = 0.02;
  tc.batch_size = 4;
  tc.patience = 40;
  eta::train_concept_prediction(data, enc, cp, tc);

  for (const auto& inst : data) {
    ConfidenceVector p = eta::predict_concepts(enc.encode(inst), cp);
    for (int k = 0; k < p.size(); ++k) CHECK(p(k) < 0.1);
  }
}

TEST_CASE("train_concept_prediction: overfits a single instance") {
  eta::SyntheticSpec spec;
  spec.questions = 1;
  spec.concepts = 3;
  spec.vocab_size = 16;
  spec.seed = 18;
  auto [data, golds] = eta::generate_synthetic_corpus(spec);

  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  eta::Vocabulary vocab = eta::Vocabulary::build(data);
  MicroEncoder enc(cfg, vocab, 35);
  CpHead cp(16, 13);
  TrainConfig tc;
  tc.cp_epochs = 50;
  tc.patience = 50;
  tc.lr = 0.02;
  tc.batch_size = 1;
  eta::train_concept_prediction(data, enc, cp, tc);
  eta::CpEval eval = eta::evaluate_concept_prediction(data, enc, cp);
  CHECK(eval.bce < 0.05);
}

TEST_CASE("train_concept_prediction: loss non-increasing over the first three epochs") {
  eta::SyntheticSpec spec;
  spec.questions = 24;
  spec.concepts = 4;
  spec.vocab_size = 24;
  spec.seed = 19;
  auto [data, golds] = eta::generate_synthetic_corpus(spec);

  eta::EncoderConfig cfg;
  cfg.d = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  eta::Vocabulary vocab = eta::Vocabulary::build(data);
  MicroEncoder enc(cfg, vocab, 37);
  CpHead cp(16, 14);
  TrainConfig tc;
  tc.cp_epochs = 3;
  auto trace = eta::train_concept_prediction(data, enc, cp, tc);
  auto losses = trace.losses("cp");
  REQUIRE(losses.size() == 3);
  CHECK(losses[1] <= losses[0]);
  CHECK(losses[2] <= losses[1]);
}
