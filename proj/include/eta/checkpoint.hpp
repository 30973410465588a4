#pragma once

#include <memory>
#include <string>

#include "eta/encoder.hpp"
#include "eta/eta_pipeline.hpp"
#include "eta/heads.hpp"

namespace eta {

// Everything needed to resume grounding: config, vocabulary, weights.
struct LoadedModel {
  std::string system;  // "eta" | "contrast"
  EncoderConfig encoder_config;
  TrainConfig train_config;
  std::unique_ptr<MicroEncoder> encoder;
  std::unique_ptr<CpHead> cp_head;
  std::unique_ptr<GroundingHead> g_head;
};

// Versioned JSON archive; the version field is checked on load and the
// weight arrays round-trip losslessly.
void save_checkpoint(const std::string& path, const std::string& system, MicroEncoder& encoder,
                     CpHead& cp_head, GroundingHead& g_head, const TrainConfig& train_cfg);

LoadedModel load_checkpoint(const std::string& path);

}  // namespace eta
