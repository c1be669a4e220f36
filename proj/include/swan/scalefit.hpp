#pragma once

#include <functional>

#include "swan/checkpoint.hpp"

namespace swan {

struct ScalePoint {
  int64_t window_start = 0;
  double optimal_scale = 1.0;
  double window_ppl = 0.0;  // exp(mean NLL) at the optimum
};

struct FitResult {
  enum class Family { Log, Yarn };
  Family family = Family::Log;
  double param = 0.0;  // Log base a, or the Yarn train_len
  double rmse = 0.0;
};

// Core of the per-window grid search: nll_of_scale(s) returns the
// per-window mean NLL under a constant scale s. Ties go to the smaller
// scale (grid must be sorted ascending).
std::vector<ScalePoint> estimate_scales_core(
    const std::function<std::vector<double>(double)>& nll_of_scale,
    const std::vector<double>& grid, const std::vector<int64_t>& window_starts);

// Per window of window_len positions, the grid scale minimizing mean NLL over
// all docs, with the constant scale applied at the policy's layer kinds.
std::vector<ScalePoint> estimate_optimal_scales(
    const Checkpoint& ckpt, const std::vector<std::vector<int>>& docs, int64_t window_len,
    const std::vector<double>& grid, int64_t max_context,
    const ScalingPolicy& policy = ScalingPolicy::none());

// Least squares of log_a(a + n) against the estimated scales; 1-D search on
// ln a. Needs >= 3 points with at least two distinct positions.
FitResult fit_log_curve(const std::vector<ScalePoint>& points);

// The Yarn comparison curve has no free parameter beyond train_len; this just
// reports its rmse on the points.
FitResult fit_yarn_curve(const std::vector<ScalePoint>& points, int64_t train_len);

// Mean over docs of per-window perplexity exp(mean window NLL) under a policy.
std::vector<std::pair<int64_t, double>> ppl_curve(const Checkpoint& ckpt,
                                                  const std::vector<std::vector<int>>& docs,
                                                  const ScalingPolicy& policy,
                                                  int64_t window_len, int64_t max_context);

inline std::vector<double> scale_grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (double v = lo; v <= hi + 1e-12; v += step) g.push_back(v);
  return g;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace swan
