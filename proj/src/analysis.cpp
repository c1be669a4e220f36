#include "swan/analysis.hpp"

#include <algorithm>

namespace swan {

namespace {

// Cholesky solve of (A + lambda*I) w = b for SPD A, in place.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, int64_t d,
                              double lambda) {
  for (int64_t i = 0; i < d; ++i) a[static_cast<size_t>(i * d + i)] += lambda;
  // decompose A = L L^T
  for (int64_t i = 0; i < d; ++i) {
    for (int64_t j = 0; j <= i; ++j) {
      double s = a[static_cast<size_t>(i * d + j)];
      for (int64_t k = 0; k < j; ++k)
        s -= a[static_cast<size_t>(i * d + k)] * a[static_cast<size_t>(j * d + k)];
      if (i == j) {
        if (s <= 0) fail("ridge fit: normal equations singular despite lambda=", lambda);
        a[static_cast<size_t>(i * d + i)] = std::sqrt(s);
      } else {
        a[static_cast<size_t>(i * d + j)] = s / a[static_cast<size_t>(j * d + j)];
      }
    }
  }
  // forward then backward substitution
  for (int64_t i = 0; i < d; ++i) {
    double s = b[static_cast<size_t>(i)];
    for (int64_t k = 0; k < i; ++k) s -= a[static_cast<size_t>(i * d + k)] * b[static_cast<size_t>(k)];
    b[static_cast<size_t>(i)] = s / a[static_cast<size_t>(i * d + i)];
  }
  for (int64_t i = d - 1; i >= 0; --i) {
    double s = b[static_cast<size_t>(i)];
    for (int64_t k = i + 1; k < d; ++k)
      s -= a[static_cast<size_t>(k * d + i)] * b[static_cast<size_t>(k)];
    b[static_cast<size_t>(i)] = s / a[static_cast<size_t>(i * d + i)];
  }
  return b;
}

// hidden rows for one sequence at one layer, converted to double
std::vector<double> hidden_rows(const Model& model, const std::vector<int>& tokens,
                                int layer_index) {
  NoGradGuard ng;
  ForwardOptions<float> opt;
  opt.taps.hidden_layers = {layer_index};
  auto result = model.forward(tokens, opt);
  if (result.hidden.empty()) fail("analysis: layer ", layer_index, " tapped nothing");
  auto vals = result.hidden.front().second.values();
  return std::vector<double>(vals.begin(), vals.end());
}

void check_layer(const Checkpoint& ckpt, int layer_index) {
  if (layer_index < 0 || layer_index >= ckpt.model.config.n_layers)
    fail("analysis: layer index ", layer_index, " outside [0,", ckpt.model.config.n_layers, ")");
}

}  // namespace

NllCurve per_position_nll(const Checkpoint& ckpt, const std::vector<std::vector<int>>& sequences,
                          const ScalingPolicy& policy) {
  if (sequences.empty()) fail("per_position_nll: empty sequence set");
  const int64_t T = static_cast<int64_t>(sequences.front().size());
  if (T < 2) fail("per_position_nll: sequences must have >= 2 tokens");
  for (size_t i = 0; i < sequences.size(); ++i)
    if (static_cast<int64_t>(sequences[i].size()) != T)
      fail("per_position_nll: sequence ", i, " has length ", sequences[i].size(), ", expected ", T);

  NllCurve curve;
  curve.n_sequences = static_cast<int64_t>(sequences.size());
  curve.eval_len = T - 1;
  curve.mean_nll.assign(static_cast<size_t>(T - 1), 0.0);
  ForwardOptions<float> opt;
  opt.policy = policy;

  std::vector<std::vector<float>> per_seq(sequences.size());
  parallel_for(static_cast<int64_t>(sequences.size()), [&](int64_t s) {
    NoGradGuard ng;
    const auto& seq = sequences[static_cast<size_t>(s)];
    std::vector<int> inputs(seq.begin(), seq.end() - 1);
    std::vector<int> targets(seq.begin() + 1, seq.end());
    std::vector<float> nll;
    cross_entropy(ckpt.model.forward(inputs, opt).logits, targets, &nll);
    per_seq[static_cast<size_t>(s)] = std::move(nll);
  });
  for (const auto& nll : per_seq)
    for (size_t p = 0; p < nll.size(); ++p) curve.mean_nll[p] += static_cast<double>(nll[p]);
  for (double& v : curve.mean_nll) v /= static_cast<double>(sequences.size());
  return curve;
}

double PositionProbe::predict(const double* h, int64_t d) const {
  double s = bias;
  for (int64_t j = 0; j < d; ++j) s += weights[static_cast<size_t>(j)] * h[j];
  return s;
}

RidgeFit fit_ridge(const std::vector<double>& x, const std::vector<double>& y, int64_t d,
                   double lambda) {
  if (d < 1) fail("ridge fit: feature dim must be >= 1");
  const int64_t n = static_cast<int64_t>(y.size());
  if (static_cast<int64_t>(x.size()) != n * d)
    fail("ridge fit: ", x.size(), " features for ", n, " targets of dim ", d);
  if (n < 2) fail("ridge fit: needs >= 2 rows");

  std::vector<double> xm(static_cast<size_t>(d), 0.0);
  double ym = 0;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j) xm[static_cast<size_t>(j)] += x[static_cast<size_t>(i * d + j)];
    ym += y[static_cast<size_t>(i)];
  }
  for (double& v : xm) v /= static_cast<double>(n);
  ym /= static_cast<double>(n);

  std::vector<double> gram(static_cast<size_t>(d * d), 0.0), rhs(static_cast<size_t>(d), 0.0);
  std::vector<double> row(static_cast<size_t>(d));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < d; ++j)
      row[static_cast<size_t>(j)] = x[static_cast<size_t>(i * d + j)] - xm[static_cast<size_t>(j)];
    const double yc = y[static_cast<size_t>(i)] - ym;
    for (int64_t j = 0; j < d; ++j) {
      const double rj = row[static_cast<size_t>(j)];
      rhs[static_cast<size_t>(j)] += rj * yc;
      double* g = gram.data() + j * d;
      for (int64_t k = j; k < d; ++k) g[k] += rj * row[static_cast<size_t>(k)];
    }
  }
  for (int64_t j = 0; j < d; ++j)
    for (int64_t k = 0; k < j; ++k)
      gram[static_cast<size_t>(j * d + k)] = gram[static_cast<size_t>(k * d + j)];

  RidgeFit fit;
  fit.weights = solve_spd(std::move(gram), std::move(rhs), d, lambda);
  fit.bias = ym;
  for (int64_t j = 0; j < d; ++j) fit.bias -= fit.weights[static_cast<size_t>(j)] * xm[static_cast<size_t>(j)];
  return fit;
}

PositionProbe train_position_probe(const Checkpoint& ckpt,
                                   const std::vector<std::vector<int>>& sequences,
                                   int layer_index, int64_t range_lo, int64_t range_hi,
                                   double ridge_lambda, uint64_t seed) {
  check_layer(ckpt, layer_index);
  if (sequences.empty()) fail("train_position_probe: empty sequence set");
  const int64_t T = static_cast<int64_t>(sequences.front().size());
  if (range_lo < 0 || range_hi <= range_lo || range_hi > T)
    fail("train_position_probe: range [", range_lo, ",", range_hi, ") outside sequence length ",
         T);
  const int64_t d = ckpt.model.config.d_model;

  std::vector<double> feats;
  std::vector<double> targets;
  for (const auto& seq : sequences) {
    if (static_cast<int64_t>(seq.size()) != T)
      fail("train_position_probe: sequences must share length");
    std::vector<double> h = hidden_rows(ckpt.model, seq, layer_index);
    for (int64_t p = range_lo; p < range_hi; ++p) {
      feats.insert(feats.end(), h.begin() + p * d, h.begin() + (p + 1) * d);
      targets.push_back(static_cast<double>(p));
    }
  }
  const int64_t n = static_cast<int64_t>(targets.size());
  if (n < 10 * d)
    fail("train_position_probe: ", n, " tokens in range, need >= ", 10 * d,
         " (10x d_model); add sequences or widen the range");

  // held-in subsample keeps the fit independent of how many sequences arrive
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  const int64_t keep = std::max<int64_t>(10 * d, (n * 4) / 5);
  std::vector<double> xs, ys;
  for (int64_t i = 0; i < std::min(keep, n); ++i) {
    const int64_t r = idx[static_cast<size_t>(i)];
    xs.insert(xs.end(), feats.begin() + r * d, feats.begin() + (r + 1) * d);
    ys.push_back(targets[static_cast<size_t>(r)]);
  }
  RidgeFit fit = fit_ridge(xs, ys, d, ridge_lambda);

  PositionProbe probe;
  probe.layer_index = layer_index;
  probe.weights = fit.weights;
  probe.bias = fit.bias;
  probe.ridge_lambda = ridge_lambda;
  probe.range_lo = range_lo;
  probe.range_hi = range_hi;
  double mae = 0;
  const int64_t m = static_cast<int64_t>(ys.size());
  for (int64_t i = 0; i < m; ++i)
    mae += std::abs(probe.predict(xs.data() + i * d, d) - ys[static_cast<size_t>(i)]);
  probe.train_mae = mae / static_cast<double>(m);
  return probe;
}

ProbeEval eval_probe(const PositionProbe& probe, const Checkpoint& ckpt,
                     const std::vector<std::vector<int>>& sequences,
                     const std::vector<int64_t>& eval_positions) {
  check_layer(ckpt, probe.layer_index);
  if (sequences.empty()) fail("eval_probe: empty sequence set");
  const int64_t T = static_cast<int64_t>(sequences.front().size());
  const int64_t d = ckpt.model.config.d_model;
  for (int64_t p : eval_positions)
    if (p < 0 || p >= T) fail("eval_probe: position ", p, " outside sequence length ", T);

  ProbeEval out;
  out.positions = eval_positions;
  out.mean_pred.assign(eval_positions.size(), 0.0);
  out.mae.assign(eval_positions.size(), 0.0);
  for (const auto& seq : sequences) {
    std::vector<double> h = hidden_rows(ckpt.model, seq, probe.layer_index);
    for (size_t i = 0; i < eval_positions.size(); ++i) {
      const int64_t p = eval_positions[i];
      const double pred = probe.predict(h.data() + p * d, d);
      out.mean_pred[i] += pred;
      out.mae[i] += std::abs(pred - static_cast<double>(p));
    }
  }
  const double inv = 1.0 / static_cast<double>(sequences.size());
  for (size_t i = 0; i < eval_positions.size(); ++i) {
    out.mean_pred[i] *= inv;
    out.mae[i] *= inv;
  }
  return out;
}

std::vector<double> AttnMap::row(int64_t i) const {
  if (i < 0 || i >= t) fail("attention map: row ", i, " outside [0,", t, ")");
  return std::vector<double>(probs.begin() + i * t, probs.begin() + (i + 1) * t);
}

AttnMap average_attention_map(const Checkpoint& ckpt,
                              const std::vector<std::vector<int>>& batches, int layer_index,
                              bool shuffle_tokens, uint64_t seed) {
  check_layer(ckpt, layer_index);
  if (batches.empty()) fail("average_attention_map: no batches");
  const int64_t T = static_cast<int64_t>(batches.front().size());

  AttnMap map;
  map.layer_index = layer_index;
  map.t = T;
  map.probs.assign(static_cast<size_t>(T * T), 0.0);

  for (size_t b = 0; b < batches.size(); ++b) {
    std::vector<int> seq = batches[b];
    if (static_cast<int64_t>(seq.size()) != T)
      fail("average_attention_map: batch ", b, " has length ", seq.size(), ", expected ", T);
    if (shuffle_tokens) {
      Rng rng(seed + 0x517cc1b727220a95ULL * static_cast<uint64_t>(b));
      rng.shuffle(seq);
    }
    NoGradGuard ng;
    ForwardOptions<float> opt;
    opt.taps.attn_layers = {layer_index};
    auto result = ckpt.model.forward(seq, opt);
    if (result.attn_taps.empty()) fail("average_attention_map: tap missing");
    const auto& tap = result.attn_taps.front();
    for (size_t i = 0; i < map.probs.size(); ++i)
      map.probs[i] += static_cast<double>(tap.probs[i]);
  }
  const double inv = 1.0 / static_cast<double>(batches.size());
  for (double& v : map.probs) v *= inv;
  return map;
}

}  // namespace swan
