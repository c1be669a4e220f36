#pragma once

#include "swan/checkpoint.hpp"
#include "swan/corpus.hpp"
#include "swan/optim.hpp"

namespace swan {

struct TrainConfig {
  ModelConfig model;
  LrSchedule schedule;
  AdamWParams adamw;
  int64_t batch_tokens = 512;
  int64_t total_steps = 0;
  uint64_t seed = 42;
  double grad_clip_norm = 1.0;

  void validate() const {
    model.validate();
    if (batch_tokens < model.train_seq_len || batch_tokens % model.train_seq_len != 0)
      fail("train config: batch_tokens ", batch_tokens, " not divisible by train_seq_len ",
           model.train_seq_len);
    if (total_steps < 0) fail("train config: negative total_steps");
    if (schedule.total_steps < total_steps)
      fail("train config: lr schedule covers ", schedule.total_steps, " steps, training needs ",
           total_steps);
    if (grad_clip_norm <= 0) fail("train config: grad_clip_norm must be > 0");
  }
};

struct StepMetric {
  int64_t step = 0;
  double loss = 0;
  double lr = 0;
  std::string stage;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepMetric> metrics;
};

TrainResult train(const TrainConfig& cfg, const Corpus& corpus);

// Constant-LR resume from existing parameters with a fresh optimizer; the
// trailing ramp_frac of steps decay linearly to lr * ramp_floor_factor.
struct CptConfig {
  int64_t steps = 0;
  double lr = 1e-5;
  double ramp_frac = 0.05;
  double ramp_floor_factor = 0.005;
  int64_t batch_tokens = 512;
  uint64_t seed = 43;
  double grad_clip_norm = 1.0;
  AdamWParams adamw;
};

TrainResult continue_pretraining(const Checkpoint& start, const CptConfig& cfg,
                                 const Corpus& corpus);

}  // namespace swan
