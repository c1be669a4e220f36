#pragma once

#include "swan/checkpoint.hpp"

namespace swan {

struct NllCurve {
  std::vector<double> mean_nll;  // entry i is the NLL of the token at position i+1
  int64_t n_sequences = 0;
  int64_t eval_len = 0;  // == mean_nll.size()
};

// Mean NLL at each position over same-length sequences (positions 1..T-1;
// position 0 is never predicted).
NllCurve per_position_nll(const Checkpoint& ckpt,
                          const std::vector<std::vector<int>>& sequences,
                          const ScalingPolicy& policy = ScalingPolicy::none());

struct PositionProbe {
  int layer_index = 0;
  std::vector<double> weights;  // [d_model]
  double bias = 0.0;
  double ridge_lambda = 0.0;
  int64_t range_lo = 0, range_hi = 0;
  double train_mae = 0.0;

  double predict(const double* h, int64_t d) const;
};

// Closed-form ridge regression with an unpenalized (centered) intercept.
// X is row-major [n x d]. Fails if the regularized normal equations are
// still singular.
struct RidgeFit {
  std::vector<double> weights;
  double bias = 0.0;
};
RidgeFit fit_ridge(const std::vector<double>& x, const std::vector<double>& y, int64_t d,
                   double lambda);

// Linear probe from the residual stream after block layer_index (pre final
// norm) to the raw token index, trained on positions in [lo, hi).
PositionProbe train_position_probe(const Checkpoint& ckpt,
                                   const std::vector<std::vector<int>>& sequences,
                                   int layer_index, int64_t range_lo, int64_t range_hi,
                                   double ridge_lambda, uint64_t seed);

struct ProbeEval {
  std::vector<int64_t> positions;
  std::vector<double> mean_pred;
  std::vector<double> mae;
};

ProbeEval eval_probe(const PositionProbe& probe, const Checkpoint& ckpt,
                     const std::vector<std::vector<int>>& sequences,
                     const std::vector<int64_t>& eval_positions);

struct AttnMap {
  int layer_index = 0;
  int64_t t = 0;
  std::vector<double> probs;  // [T x T], head- and batch-averaged

  double at(int64_t i, int64_t j) const { return probs[static_cast<size_t>(i * t + j)]; }
  std::vector<double> row(int64_t i) const;
};

// Head- and batch-averaged post-softmax attention at one layer; with
// shuffle_tokens each sequence is independently permuted first.
AttnMap average_attention_map(const Checkpoint& ckpt,
                              const std::vector<std::vector<int>>& batches, int layer_index,
                              bool shuffle_tokens, uint64_t seed);

}  // namespace swan
