#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "swan/checkpoint.hpp"
#include "swan/io.hpp"
#include "swan/model.hpp"
#include "test_helpers.hpp"

using namespace swan;

namespace {

ModelConfig tiny_config(const std::string& pattern, int64_t n_layers = 4) {
  ModelConfig cfg;
  cfg.n_layers = n_layers;
  cfg.d_model = 32;
  cfg.n_heads = 2;
  cfg.head_dim = 16;
  cfg.ffn_dim = 64;
  cfg.vocab_size = 64;
  cfg.window_size = 4;
  cfg.train_seq_len = 16;
  cfg.schedule = build_schedule(pattern, n_layers);
  return cfg;
}

// Straight-line forward pass with plain loops over the parameter map; no
// tensors, no tape. Used as a duplicate-implementation oracle.
std::vector<double> oracle_forward(const ModelConfig& cfg,
                                   const std::map<std::string, TensorT<double>>& P,
                                   const std::vector<int>& tokens) {
  const int64_t T = static_cast<int64_t>(tokens.size());
  const int64_t D = cfg.d_model, H = cfg.n_heads, Dh = cfg.head_dim, V = cfg.vocab_size;
  const int64_t F = cfg.ffn_dim;
  auto vals = [&](const std::string& name) { return P.at(name).values(); };

  auto norm_rows = [&](std::vector<double>& rows, std::span<const double> gamma) {
    for (int64_t t = 0; t < T; ++t) {
      double ms = 0;
      for (int64_t d = 0; d < D; ++d) ms += rows[t * D + d] * rows[t * D + d];
      const double r = 1.0 / std::sqrt(ms / static_cast<double>(D) + kNormEps);
      for (int64_t d = 0; d < D; ++d) rows[t * D + d] *= gamma[static_cast<size_t>(d)] * r;
    }
  };
  auto matvec_rows = [&](const std::vector<double>& rows, std::span<const double> w, int64_t in,
                         int64_t out) {
    std::vector<double> y(static_cast<size_t>(T * out), 0.0);
    for (int64_t t = 0; t < T; ++t)
      for (int64_t i = 0; i < in; ++i)
        for (int64_t j = 0; j < out; ++j)
          y[t * out + j] += rows[t * in + i] * w[static_cast<size_t>(i * out + j)];
    return y;
  };

  std::vector<double> x(static_cast<size_t>(T * D));
  for (int64_t t = 0; t < T; ++t)
    for (int64_t d = 0; d < D; ++d)
      x[t * D + d] = vals("tok_embed")[static_cast<size_t>(tokens[static_cast<size_t>(t)] * D + d)];

  for (int64_t l = 0; l < cfg.n_layers; ++l) {
    const LayerKind kind = cfg.schedule.kinds[static_cast<size_t>(l)];
    const std::string p = "layers." + std::to_string(l) + ".";
    std::vector<double> a = x;
    norm_rows(a, vals(p + "attn_norm"));
    std::vector<double> q = matvec_rows(a, vals(p + "attn_wq"), D, D);
    std::vector<double> k = matvec_rows(a, vals(p + "attn_wk"), D, D);
    std::vector<double> v = matvec_rows(a, vals(p + "attn_wv"), D, D);
    if (kind != LayerKind::GlobalNoPE) {
      for (int64_t t = 0; t < T; ++t)
        for (int64_t h = 0; h < H; ++h)
          for (int64_t i = 0; i < Dh / 2; ++i) {
            const double theta =
                std::pow(cfg.rope_base, -2.0 * static_cast<double>(i) / static_cast<double>(Dh));
            const double c = std::cos(static_cast<double>(t) * theta);
            const double s = std::sin(static_cast<double>(t) * theta);
            for (auto* vec : {&q, &k}) {
              double& e0 = (*vec)[t * D + h * Dh + 2 * i];
              double& e1 = (*vec)[t * D + h * Dh + 2 * i + 1];
              const double r0 = e0 * c - e1 * s, r1 = e0 * s + e1 * c;
              e0 = r0;
              e1 = r1;
            }
          }
    }
    std::vector<double> att(static_cast<size_t>(T * D), 0.0);
    for (int64_t h = 0; h < H; ++h)
      for (int64_t i = 0; i < T; ++i) {
        const int64_t lo =
            (kind == LayerKind::LocalSWARoPE) ? std::max<int64_t>(0, i - cfg.window_size + 1) : 0;
        std::vector<double> logits;
        for (int64_t j = lo; j <= i; ++j) {
          double acc = 0;
          for (int64_t d = 0; d < Dh; ++d)
            acc += q[i * D + h * Dh + d] * k[j * D + h * Dh + d];
          logits.push_back(acc / std::sqrt(static_cast<double>(Dh)));
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double denom = 0;
        for (double& lg : logits) {
          lg = std::exp(lg - mx);
          denom += lg;
        }
        for (int64_t j = lo; j <= i; ++j)
          for (int64_t d = 0; d < Dh; ++d)
            att[i * D + h * Dh + d] += logits[static_cast<size_t>(j - lo)] / denom *
                                       v[j * D + h * Dh + d];
      }
    std::vector<double> proj = matvec_rows(att, vals(p + "attn_wo"), D, D);
    for (int64_t i = 0; i < T * D; ++i) x[static_cast<size_t>(i)] += proj[static_cast<size_t>(i)];

    std::vector<double> f = x;
    norm_rows(f, vals(p + "ffn_norm"));
    std::vector<double> h1 = matvec_rows(f, vals(p + "ffn_w1"), D, F);
    for (double& e : h1) e = e / (1.0 + std::exp(-e));
    std::vector<double> h2 = matvec_rows(h1, vals(p + "ffn_w2"), F, D);
    for (int64_t i = 0; i < T * D; ++i) x[static_cast<size_t>(i)] += h2[static_cast<size_t>(i)];
  }
  norm_rows(x, vals("final_norm"));
  return matvec_rows(x, vals("head"), D, V);
}

std::vector<int> random_tokens(Rng& rng, int64_t n, int64_t vocab) {
  std::vector<int> out;
  for (int64_t i = 0; i < n; ++i) out.push_back(static_cast<int>(rng.randint(0, vocab - 1)));
  return out;
}

}  // namespace

TEST_CASE("build_schedule realizes the named patterns") {
  const LayerKind G = LayerKind::GlobalNoPE, L = LayerKind::LocalSWARoPE;
  CHECK(build_schedule("global_start", 8).kinds ==
        std::vector<LayerKind>{G, L, L, L, G, L, L, L});
  CHECK(build_schedule("local_start", 8).kinds ==
        std::vector<LayerKind>{L, L, L, G, L, L, L, G});
  CHECK(build_schedule("all_global_first", 8).kinds ==
        std::vector<LayerKind>{G, G, L, L, L, L, L, L});
  CHECK(build_schedule("all_local_first", 8).kinds ==
        std::vector<LayerKind>{L, L, L, L, L, L, G, G});
  CHECK(build_schedule("swa_only", 3).kinds == std::vector<LayerKind>{L, L, L});
  CHECK(build_schedule("nope_only", 2).kinds == std::vector<LayerKind>{G, G});
  CHECK(build_schedule("rope_only", 2).uniform(LayerKind::GlobalRoPE));

  CHECK_THROWS_WITH_AS(build_schedule("global_start", 6), doctest::Contains("divisible by 4"),
                       Error);
  CHECK_THROWS_WITH_AS(build_schedule("spiral", 8), doctest::Contains("unknown pattern"), Error);
}

TEST_CASE("interleaved schedules keep the 1:3 global:local ratio") {
  for (int64_t n = 4; n <= 32; n += 4) {
    for (const char* pattern : {"global_start", "local_start", "all_global_first",
                                "all_local_first"}) {
      LayerSchedule s = build_schedule(pattern, n);
      CHECK(s.count(LayerKind::GlobalNoPE) == n / 4);
      CHECK(s.count(LayerKind::LocalSWARoPE) == 3 * n / 4);
    }
  }
}

TEST_CASE("init is seed-deterministic and calibrated to uniform loss") {
  ModelConfig cfg = tiny_config("global_start");
  auto p1 = init_params<float>(cfg, 7), p2 = init_params<float>(cfg, 7);
  for (const auto& [name, t] : p1) {
    auto other = p2.at(name).values();
    auto mine = t.values();
    REQUIRE(mine.size() == other.size());
    for (size_t i = 0; i < mine.size(); ++i) CHECK(mine[i] == other[i]);
  }
  auto p3 = init_params<float>(cfg, 8);
  bool differ = false;
  for (const auto& [name, t] : p1) {
    auto other = p3.at(name).values();
    for (size_t i = 0; i < other.size(); ++i) differ |= (t.values()[i] != other[i]);
  }
  CHECK(differ);

  Rng rng(11);
  Model model = Model::init(cfg, 7);
  auto tokens = random_tokens(rng, 65, cfg.vocab_size);
  std::vector<int> inputs(tokens.begin(), tokens.end() - 1);
  std::vector<int> targets(tokens.begin() + 1, tokens.end());
  NoGradGuard ng;
  const double loss = cross_entropy(model.forward(inputs).logits, targets).item();
  const double uniform = std::log(static_cast<double>(cfg.vocab_size));
  CHECK(loss == doctest::Approx(uniform).epsilon(0.05));
}

TEST_CASE("forward with one token is finite and kind-independent") {
  Rng rng(12);
  NoGradGuard ng;
  std::vector<TensorT<float>> outs;
  for (const char* pattern : {"rope_only", "nope_only", "swa_only"}) {
    ModelConfig cfg = tiny_config(pattern, 3);
    Model model{cfg, init_params<float>(cfg, 99)};  // same seed: identical weights
    auto logits = model.forward({5}).logits;
    REQUIRE(logits.shape() == std::vector<int64_t>{1, cfg.vocab_size});
    for (float v : logits.values()) CHECK(std::isfinite(v));
    outs.push_back(logits);
  }
  for (size_t i = 1; i < outs.size(); ++i)
    for (int64_t j = 0; j < outs[0].numel(); ++j)
      CHECK(outs[i].values()[j] == outs[0].values()[j]);
}

TEST_CASE("forward rejects out-of-vocab tokens with the position") {
  ModelConfig cfg = tiny_config("swa_only", 2);
  Model model = Model::init(cfg, 1);
  NoGradGuard ng;
  CHECK_THROWS_WITH_AS(model.forward({1, 2, static_cast<int>(cfg.vocab_size)}),
                       doctest::Contains("position 2"), Error);
}

TEST_CASE("forward matches the straight-line oracle on every layer kind") {
  Rng rng(13);
  NoGradGuard ng;
  for (const char* pattern : {"rope_only", "nope_only", "swa_only", "global_start"}) {
    ModelConfig cfg = tiny_config(pattern);
    ModelT<double> model{cfg, init_params<double>(cfg, 31)};
    auto tokens = random_tokens(rng, cfg.train_seq_len, cfg.vocab_size);
    auto logits = model.forward(tokens).logits;
    auto oracle = oracle_forward(cfg, model.params, tokens);
    for (int64_t i = 0; i < logits.numel(); ++i)
      CHECK(std::abs(logits.values()[i] - oracle[static_cast<size_t>(i)]) <=
            1e-5 * std::max(1.0, std::abs(oracle[static_cast<size_t>(i)])));
  }
}

TEST_CASE("pure swa stacks have the receptive field bound, tight at one layer") {
  Rng rng(14);
  NoGradGuard ng;
  const int64_t W = 4, T = 40, t = 30;

  for (int64_t layers : {1, 3}) {
    ModelConfig cfg = tiny_config("swa_only", layers);
    cfg.window_size = W;
    Model model = Model::init(cfg, 5);
    auto tokens = random_tokens(rng, T, cfg.vocab_size);
    auto base = model.forward(tokens).logits;

    const int64_t bound = t - layers * (W - 1);
    auto replaced = tokens;
    for (int64_t p = 0; p < bound; ++p)
      replaced[static_cast<size_t>(p)] = (tokens[static_cast<size_t>(p)] + 17) % 61;
    auto moved = model.forward(replaced).logits;
    const int64_t V = cfg.vocab_size;
    for (int64_t v = 0; v < V; ++v)
      CHECK(moved.values()[t * V + v] == base.values()[t * V + v]);

    if (layers == 1) {
      // replacing the oldest in-window token must change the output
      auto tight = tokens;
      tight[static_cast<size_t>(t - (W - 1))] = (tokens[static_cast<size_t>(t - (W - 1))] + 17) % 61;
      auto tmoved = model.forward(tight).logits;
      bool changed = false;
      for (int64_t v = 0; v < V; ++v)
        changed |= (tmoved.values()[t * V + v] != base.values()[t * V + v]);
      CHECK(changed);
    }
  }
}

TEST_CASE("causality holds end to end for every schedule and policy") {
  Rng rng(15);
  NoGradGuard ng;
  for (const char* pattern : {"rope_only", "global_start", "nope_only"}) {
    ModelConfig cfg = tiny_config(pattern);
    Model model = Model::init(cfg, 23);
    ForwardOptions<float> opt;
    opt.policy = ScalingPolicy::log_policy(64.0);
    const int64_t T = 24, t = 9;
    auto tokens = random_tokens(rng, T, cfg.vocab_size);
    auto base = model.forward(tokens, opt).logits;
    auto replaced = tokens;
    for (int64_t p = t + 1; p < T; ++p) replaced[static_cast<size_t>(p)] = 3;
    auto moved = model.forward(replaced, opt).logits;
    const int64_t V = cfg.vocab_size;
    for (int64_t p = 0; p <= t; ++p)
      for (int64_t v = 0; v < V; ++v)
        CHECK(moved.values()[p * V + v] == base.values()[p * V + v]);
  }
}

TEST_CASE("scaling policy only touches the layer kinds it applies to") {
  Rng rng(16);
  NoGradGuard ng;
  ModelConfig cfg = tiny_config("rope_only");
  Model model = Model::init(cfg, 77);
  auto tokens = random_tokens(rng, 20, cfg.vocab_size);
  ForwardOptions<float> none;
  ForwardOptions<float> scaled;
  scaled.policy = ScalingPolicy::log_policy(8.0);  // applies to GlobalNoPE only
  auto a = model.forward(tokens, none).logits;
  auto b = model.forward(tokens, scaled).logits;
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.values()[i] == b.values()[i]);

  scaled.policy.applies_to = {LayerKind::GlobalRoPE};
  auto c = model.forward(tokens, scaled).logits;
  bool changed = false;
  for (int64_t i = 0; i < a.numel(); ++i) changed |= (a.values()[i] != c.values()[i]);
  CHECK(changed);
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
  ModelConfig cfg = tiny_config("global_start");
  Checkpoint ckpt;
  ckpt.model = Model::init(cfg, 3);
  ckpt.meta.steps = 123;
  ckpt.meta.seed = 3;
  ckpt.meta.corpus_id = "synthetic-xyz";
  ckpt.meta.stage = "train";
  ckpt.meta.loss_digest = {5.5, 3.25, 2.125};

  const std::string path = "/tmp/swan_test_ckpt.bin";
  save_checkpoint(path, ckpt);
  Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.meta.steps == ckpt.meta.steps);
  CHECK(loaded.meta.corpus_id == ckpt.meta.corpus_id);
  CHECK(loaded.meta.stage == ckpt.meta.stage);
  CHECK(loaded.meta.loss_digest == ckpt.meta.loss_digest);
  CHECK(loaded.model.config.schedule.pattern_name == "global_start");
  REQUIRE(loaded.model.params.size() == ckpt.model.params.size());
  for (const auto& [name, t] : ckpt.model.params) {
    auto other = loaded.model.params.at(name);
    REQUIRE(other.shape() == t.shape());
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(other.values()[i] == t.values()[i]);
  }

  // saving the loaded model again produces identical bytes
  const std::string path2 = "/tmp/swan_test_ckpt2.bin";
  save_checkpoint(path2, loaded);
  CHECK(read_file(path) == read_file(path2));

  CHECK_THROWS_AS(load_checkpoint("/tmp/does_not_exist.ckpt"), Error);
}

TEST_CASE("conversion relabels layers without touching parameters") {
  Rng rng(17);
  NoGradGuard ng;
  ModelConfig cfg = tiny_config("rope_only");
  Checkpoint rope;
  rope.model = Model::init(cfg, 9);

  Checkpoint swan_ckpt =
      convert_rope_to_swan(rope, build_schedule("global_start", cfg.n_layers), 4);
  REQUIRE(swan_ckpt.model.params.size() == rope.model.params.size());
  for (const auto& [name, t] : rope.model.params) {
    auto other = swan_ckpt.model.params.at(name);
    REQUIRE(other.shape() == t.shape());
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(other.values()[i] == t.values()[i]);
  }

  // converting back restores bit-identical behavior
  Checkpoint back =
      convert_rope_to_swan(swan_ckpt, build_schedule("rope_only", cfg.n_layers), cfg.window_size);
  auto tokens = random_tokens(rng, 20, cfg.vocab_size);
  auto a = rope.model.forward(tokens).logits;
  auto b = back.model.forward(tokens).logits;
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.values()[i] == b.values()[i]);

  // at T <= W a swa relabel is bit-identical to the rope source
  Checkpoint local = convert_rope_to_swan(rope, build_schedule("swa_only", cfg.n_layers), 8);
  auto short_tokens = random_tokens(rng, 8, cfg.vocab_size);
  auto c = rope.model.forward(short_tokens).logits;
  auto d = local.model.forward(short_tokens).logits;
  for (int64_t i = 0; i < c.numel(); ++i) CHECK(c.values()[i] == d.values()[i]);

  CHECK_THROWS_AS(convert_rope_to_swan(rope, build_schedule("global_start", 8), 4), Error);
}

TEST_CASE("full transformer gradients pass finite differences") {
  ModelConfig cfg = tiny_config("global_start");
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.head_dim = 8;
  cfg.ffn_dim = 24;
  cfg.vocab_size = 11;
  ModelT<double> model{cfg, init_params<double>(cfg, 55)};
  Rng rng(18);
  auto tokens = random_tokens(rng, 9, cfg.vocab_size);
  std::vector<int> inputs(tokens.begin(), tokens.end() - 1);
  std::vector<int> targets(tokens.begin() + 1, tokens.end());

  std::vector<TensorT<double>> leaves;
  for (auto& [name, p] : model.params) leaves.push_back(p);
  const double err = swan::testing::max_grad_rel_err(
      [&] { return cross_entropy(model.forward(inputs).logits, targets); }, leaves, 1e-5, 8);
  CHECK(err <= 1e-5);
}
