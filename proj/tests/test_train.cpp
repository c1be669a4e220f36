#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "swan/train.hpp"

using namespace swan;

namespace {

ModelConfig small_model(const std::string& pattern, int64_t n_layers, int64_t d_model,
                        int64_t ffn_dim, int64_t seq_len) {
  ModelConfig cfg;
  cfg.n_layers = n_layers;
  cfg.d_model = d_model;
  cfg.n_heads = 4;
  cfg.head_dim = d_model / 4;
  cfg.ffn_dim = ffn_dim;
  cfg.window_size = 16;
  cfg.train_seq_len = seq_len;
  cfg.schedule = build_schedule(pattern, n_layers);
  return cfg;
}

Corpus one_doc(const std::string& text) {
  Corpus c;
  c.id = "inline";
  c.train = {text};
  return c;
}

std::string repeated_text(size_t n) {
  const std::string unit = "the quick vexing zebra jumps over 1307 lazy dogs. ";
  std::string out;
  while (out.size() < n) out += unit;
  out.resize(n);
  return out;
}

bool params_equal(const std::map<std::string, Tensor>& a, const std::map<std::string, Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.shape() != t.shape()) return false;
    for (int64_t i = 0; i < t.numel(); ++i)
      if (it->second.values()[i] != t.values()[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("a doc of twice the block size yields exactly two covering blocks") {
  const std::string doc = repeated_text(128);
  BatchStream stream(one_doc(doc), 64, 1, 7);
  CHECK(stream.blocks_per_epoch() == 2);
  auto b1 = stream.next(), b2 = stream.next();
  std::vector<int> joined;
  if (b1[0][0] == doc_tokens(doc)[0] && b1[0][1] == doc_tokens(doc)[1]) {
    joined = b1[0];
    joined.insert(joined.end(), b2[0].begin(), b2[0].end());
  } else {
    joined = b2[0];
    joined.insert(joined.end(), b1[0].begin(), b1[0].end());
  }
  CHECK(joined == doc_tokens(doc));
}

TEST_CASE("batch stream is reproducible for a fixed seed") {
  Corpus c;
  c.id = "multi";
  for (int i = 0; i < 5; ++i) c.train.push_back(repeated_text(300 + 17 * i));
  BatchStream a(c, 32, 3, 99), b(c, 32, 3, 99);
  for (int step = 0; step < 30; ++step) CHECK(a.next() == b.next());
  BatchStream других(c, 32, 3, 100);
  bool same = true;
  BatchStream a2(c, 32, 3, 99);
  for (int step = 0; step < 5; ++step) same &= (a2.next() == других.next());
  CHECK_FALSE(same);
}

TEST_CASE("blocks match the concatenate-then-slice oracle") {
  Corpus c;
  c.id = "oracle";
  c.train = {repeated_text(100), repeated_text(70), repeated_text(130)};

  // oracle: join with the separator byte, slice off seq_len chunks
  std::vector<int> joined;
  for (size_t d = 0; d < c.train.size(); ++d) {
    if (d) joined.push_back(kDocSeparator);
    for (unsigned char ch : c.train[d]) joined.push_back(ch);
  }
  const int64_t seq_len = 24;
  std::vector<std::vector<int>> oracle;
  for (size_t s = 0; s + seq_len <= joined.size(); s += seq_len)
    oracle.emplace_back(joined.begin() + s, joined.begin() + s + seq_len);

  BatchStream stream(c, seq_len, 1, 5);
  REQUIRE(stream.blocks_per_epoch() == static_cast<int64_t>(oracle.size()));
  std::vector<std::vector<int>> got;
  for (int64_t i = 0; i < stream.blocks_per_epoch(); ++i) got.push_back(stream.next()[0]);
  std::sort(got.begin(), got.end());
  std::sort(oracle.begin(), oracle.end());
  CHECK(got == oracle);
}

TEST_CASE("too-short corpora are rejected") {
  CHECK_THROWS_WITH_AS(BatchStream(one_doc("tiny"), 64, 1, 0), doctest::Contains("shorter"),
                       Error);
  Corpus empty;
  empty.id = "none";
  CHECK_THROWS_AS(BatchStream(empty, 64, 1, 0), Error);
}

TEST_CASE("zero training steps returns the initialization") {
  TrainConfig cfg;
  cfg.model = small_model("swa_only", 2, 32, 64, 32);
  cfg.total_steps = 0;
  cfg.batch_tokens = 32;
  cfg.schedule.total_steps = 1;
  cfg.seed = 5;
  TrainResult r = train(cfg, one_doc(repeated_text(512)));
  CHECK(r.metrics.empty());
  CHECK(r.checkpoint.meta.stage == "init");
  CHECK(params_equal(r.checkpoint.model.params, init_params<float>(cfg.model, 5)));
}

TEST_CASE("training is bit-deterministic in the seed") {
  TrainConfig cfg;
  cfg.model = small_model("global_start", 4, 32, 64, 32);
  cfg.total_steps = 25;
  cfg.batch_tokens = 64;
  cfg.schedule = {1e-3, 5, 25, 1e-4};
  cfg.seed = 11;
  Corpus c = one_doc(repeated_text(4096));
  TrainResult a = train(cfg, c), b = train(cfg, c);
  CHECK(params_equal(a.checkpoint.model.params, b.checkpoint.model.params));
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (size_t i = 0; i < a.metrics.size(); ++i) CHECK(a.metrics[i].loss == b.metrics[i].loss);

  cfg.seed = 12;
  TrainResult d = train(cfg, c);
  CHECK_FALSE(params_equal(a.checkpoint.model.params, d.checkpoint.model.params));
}

TEST_CASE("loss decreases and the metrics account for every step") {
  TrainConfig cfg;
  cfg.model = small_model("global_start", 4, 32, 64, 32);
  cfg.total_steps = 120;
  cfg.batch_tokens = 64;
  cfg.schedule = {2e-3, 10, 120, 2e-4};
  cfg.seed = 3;
  TrainResult r = train(cfg, one_doc(repeated_text(4096)));
  REQUIRE(static_cast<int64_t>(r.metrics.size()) == cfg.total_steps);
  for (int64_t i = 0; i < cfg.total_steps; ++i) CHECK(r.metrics[static_cast<size_t>(i)].step == i);
  double first = 0, last = 0;
  for (int i = 0; i < 20; ++i) {
    first += r.metrics[static_cast<size_t>(i)].loss;
    last += r.metrics[r.metrics.size() - 1 - static_cast<size_t>(i)].loss;
  }
  CHECK(last < first);
  CHECK(r.checkpoint.meta.steps == cfg.total_steps);
  CHECK(r.checkpoint.meta.stage == "train");
  CHECK_FALSE(r.checkpoint.meta.loss_digest.empty());
}

TEST_CASE("a wide model memorizes one repeated block") {
  TrainConfig cfg;
  cfg.model = small_model("nope_only", 2, 128, 256, 256);
  cfg.total_steps = 200;
  cfg.batch_tokens = 256;  // the single block, every step
  cfg.schedule = {3e-3, 20, 200, 3e-4};
  cfg.seed = 21;
  TrainResult r = train(cfg, one_doc(repeated_text(256)));
  CHECK(r.metrics.back().loss < 0.1);
}

TEST_CASE("divergence aborts with a diagnostic") {
  TrainConfig cfg;
  cfg.model = small_model("swa_only", 2, 32, 64, 32);
  cfg.total_steps = 400;
  cfg.batch_tokens = 32;
  cfg.schedule = {1e9, 0, 400, 1e9};  // guaranteed blowup
  cfg.seed = 2;
  CHECK_THROWS_WITH_AS(train(cfg, one_doc(repeated_text(2048))), doctest::Contains("diverged"),
                       Error);
}

TEST_CASE("zero-step continued pretraining leaves parameters untouched") {
  ModelConfig mc = small_model("rope_only", 2, 32, 64, 32);
  Checkpoint start;
  start.model = Model::init(mc, 8);
  start.meta.steps = 50;
  CptConfig cpt;
  cpt.steps = 0;
  cpt.batch_tokens = 32;
  TrainResult r = continue_pretraining(start, cpt, one_doc(repeated_text(1024)));
  CHECK(params_equal(r.checkpoint.model.params, start.model.params));
  CHECK(r.checkpoint.meta.steps == 50);
}

TEST_CASE("continued pretraining resumes with a fresh stage tag") {
  ModelConfig mc = small_model("global_start", 4, 32, 64, 32);
  Corpus c = one_doc(repeated_text(4096));
  TrainConfig base;
  base.model = mc;
  base.total_steps = 40;
  base.batch_tokens = 64;
  base.schedule = {2e-3, 5, 40, 2e-4};
  base.seed = 31;
  TrainResult first = train(base, c);

  CptConfig cpt;
  cpt.steps = 20;
  cpt.lr = 5e-4;
  cpt.batch_tokens = 64;
  cpt.seed = 32;
  TrainResult resumed = continue_pretraining(first.checkpoint, cpt, c);
  CHECK(resumed.checkpoint.meta.stage == "cpt");
  CHECK(resumed.checkpoint.meta.steps == 60);
  CHECK(resumed.metrics.size() == 20);
  for (const auto& m : resumed.metrics) CHECK(m.stage == "cpt");
  CHECK_FALSE(params_equal(resumed.checkpoint.model.params, first.checkpoint.model.params));
  // the source checkpoint is not mutated by the resumed run
  TrainResult again = train(base, c);
  CHECK(params_equal(first.checkpoint.model.params, again.checkpoint.model.params));

  // constant then ramped-down lr
  CHECK(resumed.metrics.front().lr == doctest::Approx(5e-4));
  CHECK(resumed.metrics.back().lr < 5e-4);
}
