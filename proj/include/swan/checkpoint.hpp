#pragma once

#include <string>

#include "swan/model.hpp"

namespace swan {

struct TrainMeta {
  int64_t steps = 0;
  uint64_t seed = 0;
  std::string corpus_id;
  std::string stage = "init";        // init | train | cpt
  std::vector<double> loss_digest;   // mean loss per 100-step bucket
};

struct Checkpoint {
  Model model;
  TrainMeta meta;

  const ModelConfig& config() const { return model.config; }
};

// Little-endian container: magic, format version, JSON block with config and
// training metadata, then raw named float32 parameter records. Save/load
// round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Re-labels attention layers onto a new schedule; every parameter value is
// copied verbatim. Layers that become GlobalNoPE stop applying rotary
// rotation, layers that become LocalSWARoPE pick up the window mask.
Checkpoint convert_rope_to_swan(const Checkpoint& src, const LayerSchedule& target,
                                int64_t window_size);

}  // namespace swan
