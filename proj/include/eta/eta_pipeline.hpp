#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eta/corpus.hpp"
#include "eta/encoder.hpp"
#include "eta/heads.hpp"
#include "eta/matrix_ops.hpp"

namespace eta {

enum class DeltaRefresh { once, every_epoch };
enum class FineTune { frozen, joint };

struct TrainConfig {
  int cp_epochs = 50;      // upper bound; patience-based early stop applies
  int awaken_epochs = 15;
  int patience = 5;
  double lr = 3e-4;        // 3e-5 is the usual choice for pretrained encoders
  double weight_decay = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 7;
  DeltaRefresh refresh = DeltaRefresh::every_epoch;
  FineTune finetune = FineTune::frozen;
  int workers = 1;
  double contrast_margin = 0.5;

  void validate() const;  // throws ConfigError naming the offending field
};

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "cp" | "awaken" | "contrast"
  std::string split;  // "train" | "dev"
  double loss = 0.0;
  std::optional<double> f1;
};

struct TrainTrace {
  std::vector<EpochRecord> records;

  std::vector<double> losses(const std::string& phase, const std::string& split = "train") const;
  void append(EpochRecord rec) { records.push_back(std::move(rec)); }
};

// Pseudo alignment from confidences: delta[n][k] = l_k * max(0, p_k - p_hat[n][k]).
// Pure formula; erase_and_score drives it with encoder passes.
Matrix pseudo_alignment(const ConfidenceVector& baseline,
                        const std::vector<ConfidenceVector>& erased,
                        const std::vector<bool>& labels);

// Baseline pass plus one erased pass per question token; the N+1 passes are
// independent and run on `workers` threads when workers > 1.
Matrix erase_and_score(const GroundingInstance& instance, const Encoder& encoder,
                       const CpHead& head, int workers = 1);

// Binary cross-entropy training of the concept prediction module against the
// weak labels. Fine-tunes the encoder unless it is frozen. Early-stops when
// the epoch BCE has not improved for cfg.patience epochs.
TrainTrace train_concept_prediction(const std::vector<GroundingInstance>& data,
                                    MicroEncoder& encoder, CpHead& head,
                                    const TrainConfig& cfg);

// Mean BCE and thresholded accuracy of the CP module over a dataset.
struct CpEval {
  double bce = 0.0;
  double accuracy = 0.0;
};
CpEval evaluate_concept_prediction(const std::vector<GroundingInstance>& data,
                                   const Encoder& encoder, const CpHead& head);

// Called once per awakening epoch; may report a dev metric for the trace.
// Reporting-only: the training loop never reads gold links itself.
using EpochCallback = std::function<std::optional<double>(int epoch)>;

// Iterated erasing + awakening: per epoch, (re)build pseudo alignments per
// cfg.refresh, then fit the grounding head (and the encoder when
// cfg.finetune == joint) by minimizing the delta-weighted NLL.
TrainTrace awaken(const std::vector<GroundingInstance>& data, MicroEncoder& encoder,
                  const CpHead& cp_head, GroundingHead& g_head, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

enum class DeltaMode { raw, softmax, sum };
DeltaMode delta_mode_from_string(const std::string& s);

// RQ2 probe: use the pseudo alignment itself as the prediction, optionally
// column-normalized. An all-zero column stays all-zero under sum.
Matrix delta_as_prediction(const Matrix& delta, DeltaMode mode);

// Gradients of the awakening loss through g = (Q Wq^T)(E We^T)^T / sqrt(d).
struct GroundingGrads {
  Matrix dQ, dE;  // for joint fine-tuning
};
GroundingGrads accumulate_grounding_grads(const Encoding& enc, GroundingHead& head,
                                          const Matrix& score_grad);

}  // namespace eta
