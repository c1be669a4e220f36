#pragma once

#include <map>
#include <string>

#include "swan/tensor.hpp"

namespace swan {

struct AdamWParams {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
};

template <class S>
struct AdamWStateT {
  std::vector<S> first_moment;
  std::vector<S> second_moment;
  int64_t step_count = 0;
};

// Decoupled weight decay acts on the parameter, never on the moments.
template <class S>
void adamw_step(TensorT<S>& param, AdamWStateT<S>& state, const AdamWParams& hp) {
  auto p = param.values();
  auto g = param.grad();
  if (state.first_moment.empty()) {
    state.first_moment.assign(p.size(), S(0));
    state.second_moment.assign(p.size(), S(0));
  }
  if (state.first_moment.size() != p.size())
    fail("adamw_step: state has ", state.first_moment.size(), " entries for ", p.size(),
         " parameters");
  state.step_count += 1;
  const S b1 = static_cast<S>(hp.beta1), b2 = static_cast<S>(hp.beta2);
  const S c1 = static_cast<S>(1.0 - std::pow(hp.beta1, static_cast<double>(state.step_count)));
  const S c2 = static_cast<S>(1.0 - std::pow(hp.beta2, static_cast<double>(state.step_count)));
  const S lr = static_cast<S>(hp.lr);
  const S eps = static_cast<S>(hp.eps);
  const S decay = static_cast<S>(1.0 - hp.lr * hp.weight_decay);
  S* m = state.first_moment.data();
  S* v = state.second_moment.data();
  for (size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (S(1) - b1) * g[i];
    v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
    const S mhat = m[i] / c1;
    const S vhat = v[i] / c2;
    p[i] = p[i] * decay - lr * mhat / (std::sqrt(vhat) + eps);
  }
}

struct LrSchedule {
  double peak = 3e-3;
  int64_t warmup_steps = 100;
  int64_t total_steps = 1000;
  double floor = 0.0;
};

// Linear ramp 0 -> peak over warmup, cosine decay peak -> floor afterward.
inline double lr_at(const LrSchedule& s, int64_t step) {
  if (s.warmup_steps > s.total_steps)
    fail("lr schedule: warmup ", s.warmup_steps, " exceeds total ", s.total_steps);
  if (s.floor > s.peak) fail("lr schedule: floor ", s.floor, " above peak ", s.peak);
  if (step < 0 || step > s.total_steps)
    fail("lr_at: step ", step, " outside [0,", s.total_steps, "]");
  if (step < s.warmup_steps)
    return s.peak * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  if (s.total_steps == s.warmup_steps) return s.peak;
  double frac = static_cast<double>(step - s.warmup_steps) /
                static_cast<double>(s.total_steps - s.warmup_steps);
  return s.floor + (s.peak - s.floor) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

// Scales gradients in place so the global norm is at most max_norm.
// Returns the pre-clip norm.
template <class S>
double clip_grad_norm(std::map<std::string, TensorT<S>>& params, double max_norm) {
  double sq = 0;
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (S g : p.grad()) sq += static_cast<double>(g) * g;
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const S s = static_cast<S>(max_norm / norm);
    for (auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      for (S& g : p.grad()) g *= s;
    }
  }
  return norm;
}

}  // namespace swan
