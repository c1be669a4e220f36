#pragma once

#include <map>

#include "swan/attention.hpp"
#include "swan/schedule.hpp"
#include "swan/tensor.hpp"

namespace swan {

inline constexpr double kNormEps = 1e-5;

struct ModelConfig {
  int64_t n_layers = 8;
  int64_t d_model = 128;
  int64_t n_heads = 4;
  int64_t head_dim = 32;
  int64_t ffn_dim = 512;
  int64_t vocab_size = 260;  // bytes plus reserved specials
  int64_t window_size = 64;
  double rope_base = 1e6;
  int64_t train_seq_len = 256;
  LayerSchedule schedule = build_schedule("global_start", 8);

  void validate() const {
    if (d_model != n_heads * head_dim)
      fail("model config: d_model ", d_model, " != n_heads*head_dim ", n_heads * head_dim);
    if (head_dim < 2 || head_dim % 2 != 0)
      fail("model config: head_dim must be even and >= 2, got ", head_dim);
    if (window_size < 1) fail("model config: window_size must be >= 1, got ", window_size);
    if (vocab_size < 2) fail("model config: vocab_size must be >= 2, got ", vocab_size);
    if (ffn_dim < 1) fail("model config: ffn_dim must be >= 1, got ", ffn_dim);
    if (train_seq_len < 2) fail("model config: train_seq_len must be >= 2");
    if (schedule.n_layers() != n_layers)
      fail("model config: schedule has ", schedule.n_layers(), " layers, expected ", n_layers);
    if (!(rope_base > 1.0)) fail("model config: rope_base must be > 1, got ", rope_base);
  }

  RopeParams rope() const { return RopeParams{head_dim, rope_base}; }
};

struct TapRequest {
  std::vector<int> attn_layers;    // capture head-averaged attention
  std::vector<int> hidden_layers;  // capture residual stream after the block

  bool wants_attn(int l) const {
    return std::find(attn_layers.begin(), attn_layers.end(), l) != attn_layers.end();
  }
  bool wants_hidden(int l) const {
    return std::find(hidden_layers.begin(), hidden_layers.end(), l) != hidden_layers.end();
  }
};

template <class S>
struct ForwardOptions {
  ScalingPolicy policy;
  // When set, replaces the policy-derived per-query scales on every layer kind
  // the policy applies to (used by the optimal-scale estimator).
  const std::vector<S>* scale_override = nullptr;
  TapRequest taps;
};

template <class S>
struct ForwardResult {
  TensorT<S> logits;  // [T x V]
  std::vector<AttentionTap<S>> attn_taps;
  std::vector<std::pair<int, TensorT<S>>> hidden;
};

// Deterministic GPT-style init; residual output projections are damped by
// sqrt(2*n_layers) and the head is small enough that the initial loss sits at
// ln(vocab_size) to within a few percent.
template <class S>
std::map<std::string, TensorT<S>> init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::map<std::string, TensorT<S>> params;
  auto make = [&](const std::string& name, std::vector<int64_t> shape, double std_dev) {
    TensorT<S> t(std::move(shape));
    if (std_dev > 0) {
      for (S& v : t.values()) v = static_cast<S>(rng.normal() * std_dev);
    }
    params.emplace(name, std::move(t));
  };
  auto ones = [&](const std::string& name, int64_t n) {
    TensorT<S> t({n});
    std::fill(t.values().begin(), t.values().end(), S(1));
    params.emplace(name, std::move(t));
  };

  const double base_std = 0.02;
  const double resid_std = base_std / std::sqrt(2.0 * static_cast<double>(cfg.n_layers));
  make("tok_embed", {cfg.vocab_size, cfg.d_model}, base_std);
  for (int64_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    ones(p + "attn_norm", cfg.d_model);
    make(p + "attn_wq", {cfg.d_model, cfg.d_model}, base_std);
    make(p + "attn_wk", {cfg.d_model, cfg.d_model}, base_std);
    make(p + "attn_wv", {cfg.d_model, cfg.d_model}, base_std);
    make(p + "attn_wo", {cfg.d_model, cfg.d_model}, resid_std);
    ones(p + "ffn_norm", cfg.d_model);
    make(p + "ffn_w1", {cfg.d_model, cfg.ffn_dim}, base_std);
    make(p + "ffn_w2", {cfg.ffn_dim, cfg.d_model}, resid_std);
  }
  ones("final_norm", cfg.d_model);
  make("head", {cfg.d_model, cfg.vocab_size}, base_std);
  return params;
}

template <class S>
std::map<std::string, TensorT<S>> clone_params(const std::map<std::string, TensorT<S>>& params) {
  std::map<std::string, TensorT<S>> out;
  for (const auto& [name, p] : params) out.emplace(name, p.clone());
  return out;
}

template <class S>
struct ModelT {
  ModelConfig config;
  std::map<std::string, TensorT<S>> params;

  static ModelT init(const ModelConfig& cfg, uint64_t seed) {
    return ModelT{cfg, init_params<S>(cfg, seed)};
  }

  ModelT clone() const { return ModelT{config, clone_params(params)}; }

  const TensorT<S>& param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) fail("model: missing parameter '", name, "'");
    return it->second;
  }

  void set_requires_grad(bool v) {
    for (auto& [name, p] : params) p.set_requires_grad(v);
  }

  void zero_grads() {
    for (auto& [name, p] : params) p.zero_grad();
  }

  // Pre-norm decoder stack:
  //   x += Wo * attend(rmsnorm(x))     with the layer's mask / rotary / scaling
  //   x += W2 * silu(W1 * rmsnorm(x))
  // followed by a final RMSNorm and an untied output head.
  ForwardResult<S> forward(const std::vector<int>& tokens,
                           const ForwardOptions<S>& opt = {}) const {
    config.validate();
    const int64_t T = static_cast<int64_t>(tokens.size());
    if (T < 1) fail("forward: empty token sequence");
    const int64_t H = config.n_heads, Dh = config.head_dim, D = config.d_model;

    std::vector<int64_t> positions(static_cast<size_t>(T));
    for (int64_t t = 0; t < T; ++t) positions[static_cast<size_t>(t)] = t;

    Mask causal, window;
    bool need_causal = false, need_window = false;
    for (LayerKind k : config.schedule.kinds) {
      if (k == LayerKind::LocalSWARoPE) need_window = true;
      else need_causal = true;
    }
    if (need_causal) causal = causal_mask(T);
    if (need_window) window = sliding_window_mask(T, config.window_size);

    std::vector<S> ones_vec(static_cast<size_t>(T), S(1));
    std::vector<S> policy_scales;
    if (opt.scale_override) {
      if (static_cast<int64_t>(opt.scale_override->size()) != T)
        fail("forward: scale override has ", opt.scale_override->size(), " entries for T=", T);
      policy_scales = *opt.scale_override;
    } else {
      policy_scales = scale_vector<S>(opt.policy, T);
    }

    ForwardResult<S> result;
    const S eps = static_cast<S>(kNormEps);
    TensorT<S> x = embedding(param("tok_embed"), tokens);
    for (int64_t l = 0; l < config.n_layers; ++l) {
      const LayerKind kind = config.schedule.kinds[static_cast<size_t>(l)];
      const std::string p = "layers." + std::to_string(l) + ".";
      TensorT<S> a_in = rmsnorm(x, param(p + "attn_norm"), eps);
      TensorT<S> q = reshape(matmul(a_in, param(p + "attn_wq")), {T, H, Dh});
      TensorT<S> k = reshape(matmul(a_in, param(p + "attn_wk")), {T, H, Dh});
      TensorT<S> v = reshape(matmul(a_in, param(p + "attn_wv")), {T, H, Dh});
      if (kind != LayerKind::GlobalNoPE) {
        q = rope_rotate(q, positions, config.rope());
        k = rope_rotate(k, positions, config.rope());
      }
      const Mask& mask = (kind == LayerKind::LocalSWARoPE) ? window : causal;
      const std::vector<S>& scales =
          opt.policy.applies(kind) ? policy_scales : ones_vec;
      AttentionTap<S>* tap = nullptr;
      if (opt.taps.wants_attn(static_cast<int>(l))) {
        result.attn_taps.emplace_back();
        tap = &result.attn_taps.back();
        tap->layer_index = static_cast<int>(l);
      }
      TensorT<S> att = attend(q, k, v, mask, scales, tap);
      x = add(x, matmul(reshape(att, {T, D}), param(p + "attn_wo")));
      TensorT<S> f_in = rmsnorm(x, param(p + "ffn_norm"), eps);
      x = add(x, matmul(silu(matmul(f_in, param(p + "ffn_w1"))), param(p + "ffn_w2")));
      if (opt.taps.wants_hidden(static_cast<int>(l)))
        result.hidden.emplace_back(static_cast<int>(l), x);
    }
    TensorT<S> final = rmsnorm(x, param("final_norm"), eps);
    result.logits = matmul(final, param("head"));
    return result;
  }
};

using Model = ModelT<float>;

}  // namespace swan
