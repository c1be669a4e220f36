#include "swan/scalefit.hpp"

#include <algorithm>
#include <numeric>

namespace swan {

namespace {

// Per-window mean NLL for one doc prefix of max_context tokens. Entry w
// averages token positions [w*wl, (w+1)*wl); position 0 has no prediction.
std::vector<double> doc_window_nll(const Model& model, const std::vector<int>& tokens,
                                   int64_t window_len, int64_t max_context,
                                   const ForwardOptions<float>& opt) {
  NoGradGuard ng;
  std::vector<int> inputs(tokens.begin(), tokens.begin() + max_context - 1);
  std::vector<int> targets(tokens.begin() + 1, tokens.begin() + max_context);
  std::vector<float> per_pos;
  cross_entropy(model.forward(inputs, opt).logits, targets, &per_pos);
  const int64_t n_windows = max_context / window_len;
  std::vector<double> out(static_cast<size_t>(n_windows), 0.0);
  for (int64_t w = 0; w < n_windows; ++w) {
    const int64_t lo = std::max<int64_t>(w * window_len, 1);
    const int64_t hi = (w + 1) * window_len;
    double acc = 0;
    for (int64_t p = lo; p < hi; ++p) acc += static_cast<double>(per_pos[static_cast<size_t>(p - 1)]);
    out[static_cast<size_t>(w)] = acc / static_cast<double>(hi - lo);
  }
  return out;
}

void check_docs(const std::vector<std::vector<int>>& docs, int64_t window_len,
                int64_t max_context) {
  if (docs.empty()) fail("scale estimation: no documents");
  if (window_len < 1 || max_context < window_len || max_context % window_len != 0)
    fail("scale estimation: max_context ", max_context, " must be a positive multiple of ",
         window_len);
  for (size_t d = 0; d < docs.size(); ++d) {
    if (static_cast<int64_t>(docs[d].size()) < max_context)
      fail("scale estimation: doc ", d, " has ", docs[d].size(), " tokens, needs ", max_context);
  }
}

double log_curve(double a, double n) { return std::log(a + n) / std::log(a); }

double yarn_curve(int64_t train_len, double n) {
  if (n <= static_cast<double>(train_len)) return 1.0;
  return std::max(1.0, 0.1 * std::log(n / static_cast<double>(train_len)) + 1.0);
}

double rmse_of(const std::vector<ScalePoint>& points, const std::function<double(double)>& f) {
  double acc = 0;
  for (const auto& p : points) {
    const double d = f(static_cast<double>(p.window_start)) - p.optimal_scale;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(points.size()));
}

}  // namespace

std::vector<ScalePoint> estimate_scales_core(
    const std::function<std::vector<double>(double)>& nll_of_scale,
    const std::vector<double>& grid, const std::vector<int64_t>& window_starts) {
  if (grid.empty()) fail("scale estimation: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end()))
    fail("scale estimation: grid must be sorted ascending");
  if (grid.front() > 1.0 || grid.back() < 1.0)
    fail("scale estimation: grid must bracket 1.0, got [", grid.front(), ",", grid.back(), "]");

  const size_t W = window_starts.size();
  std::vector<double> best_nll(W, std::numeric_limits<double>::infinity());
  std::vector<double> best_scale(W, grid.front());
  for (double s : grid) {
    std::vector<double> nll = nll_of_scale(s);
    if (nll.size() != W)
      fail("scale estimation: evaluator returned ", nll.size(), " windows, expected ", W);
    for (size_t w = 0; w < W; ++w) {
      if (nll[w] < best_nll[w]) {  // strict: ties stay at the smaller scale
        best_nll[w] = nll[w];
        best_scale[w] = s;
      }
    }
  }
  std::vector<ScalePoint> points(W);
  for (size_t w = 0; w < W; ++w)
    points[w] = {window_starts[w], best_scale[w], std::exp(best_nll[w])};
  return points;
}

std::vector<ScalePoint> estimate_optimal_scales(const Checkpoint& ckpt,
                                                const std::vector<std::vector<int>>& docs,
                                                int64_t window_len,
                                                const std::vector<double>& grid,
                                                int64_t max_context,
                                                const ScalingPolicy& policy) {
  check_docs(docs, window_len, max_context);
  const int64_t n_windows = max_context / window_len;
  std::vector<int64_t> starts(static_cast<size_t>(n_windows));
  for (int64_t w = 0; w < n_windows; ++w) starts[static_cast<size_t>(w)] = w * window_len;

  auto nll_of_scale = [&](double s) {
    std::vector<float> constant(static_cast<size_t>(max_context - 1), static_cast<float>(s));
    ForwardOptions<float> opt;
    opt.policy = policy;
    opt.scale_override = &constant;
    std::vector<std::vector<double>> per_doc(docs.size());
    parallel_for(static_cast<int64_t>(docs.size()), [&](int64_t d) {
      per_doc[static_cast<size_t>(d)] =
          doc_window_nll(ckpt.model, docs[static_cast<size_t>(d)], window_len, max_context, opt);
    });
    std::vector<double> mean(static_cast<size_t>(n_windows), 0.0);
    for (const auto& doc_nll : per_doc)
      for (size_t w = 0; w < doc_nll.size(); ++w) mean[w] += doc_nll[w];
    for (double& v : mean) v /= static_cast<double>(docs.size());
    return mean;
  };
  return estimate_scales_core(nll_of_scale, grid, starts);
}

FitResult fit_log_curve(const std::vector<ScalePoint>& points) {
  if (points.size() < 3) fail("fit_log_curve: needs >= 3 points, got ", points.size());
  bool distinct = false;
  for (const auto& p : points)
    if (p.window_start != points.front().window_start) distinct = true;
  if (!distinct) fail("fit_log_curve: degenerate points (all positions equal)");

  auto objective = [&](double ln_a) {
    const double a = std::exp(ln_a);
    double acc = 0;
    for (const auto& p : points) {
      const double d = log_curve(a, static_cast<double>(p.window_start)) - p.optimal_scale;
      acc += d * d;
    }
    return acc;
  };

  // coarse scan, then golden-section refinement
  const double lo = std::log(1.0 + 1e-9), hi = std::log(1e15);
  double best_x = lo, best_f = objective(lo);
  const int kScan = 400;
  for (int i = 1; i <= kScan; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / kScan;
    const double f = objective(x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  double a_lo = std::max(lo, best_x - (hi - lo) / kScan);
  double b_hi = std::min(hi, best_x + (hi - lo) / kScan);
  const double gr = 0.6180339887498949;
  double c = b_hi - gr * (b_hi - a_lo), d = a_lo + gr * (b_hi - a_lo);
  double fc = objective(c), fd = objective(d);
  for (int it = 0; it < 200 && (b_hi - a_lo) > 1e-12; ++it) {
    if (fc < fd) {
      b_hi = d;
      d = c;
      fd = fc;
      c = b_hi - gr * (b_hi - a_lo);
      fc = objective(c);
    } else {
      a_lo = c;
      c = d;
      fc = fd;
      d = a_lo + gr * (b_hi - a_lo);
      fd = objective(d);
    }
  }
  const double a = std::exp(0.5 * (a_lo + b_hi));
  FitResult r;
  r.family = FitResult::Family::Log;
  r.param = a;
  r.rmse = rmse_of(points, [&](double n) { return log_curve(a, n); });
  return r;
}

FitResult fit_yarn_curve(const std::vector<ScalePoint>& points, int64_t train_len) {
  if (points.empty()) fail("fit_yarn_curve: no points");
  if (train_len < 1) fail("fit_yarn_curve: train_len must be >= 1, got ", train_len);
  FitResult r;
  r.family = FitResult::Family::Yarn;
  r.param = static_cast<double>(train_len);
  r.rmse = rmse_of(points, [&](double n) { return yarn_curve(train_len, n); });
  return r;
}

std::vector<std::pair<int64_t, double>> ppl_curve(const Checkpoint& ckpt,
                                                  const std::vector<std::vector<int>>& docs,
                                                  const ScalingPolicy& policy,
                                                  int64_t window_len, int64_t max_context) {
  check_docs(docs, window_len, max_context);
  const int64_t n_windows = max_context / window_len;
  ForwardOptions<float> opt;
  opt.policy = policy;
  std::vector<std::vector<double>> per_doc(docs.size());
  parallel_for(static_cast<int64_t>(docs.size()), [&](int64_t d) {
    per_doc[static_cast<size_t>(d)] =
        doc_window_nll(ckpt.model, docs[static_cast<size_t>(d)], window_len, max_context, opt);
  });
  std::vector<std::pair<int64_t, double>> out;
  for (int64_t w = 0; w < n_windows; ++w) {
    double acc = 0;
    for (const auto& doc_nll : per_doc) acc += std::exp(doc_nll[static_cast<size_t>(w)]);
    out.emplace_back(w * window_len, acc / static_cast<double>(docs.size()));
  }
  return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) fail("spearman: need two same-length series");
  auto ranks = [](const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n, 0.0);
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank, 1-based
      for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace swan
