#include "swan/train.hpp"

#include <functional>

namespace swan {

namespace {

std::vector<double> digest_losses(const std::vector<StepMetric>& metrics) {
  std::vector<double> digest;
  double acc = 0;
  int64_t n = 0;
  for (const auto& m : metrics) {
    acc += m.loss;
    if (++n == 100) {
      digest.push_back(acc / 100.0);
      acc = 0;
      n = 0;
    }
  }
  if (n > 0) digest.push_back(acc / static_cast<double>(n));
  return digest;
}

std::vector<StepMetric> run_loop(Model& model, BatchStream& stream, int64_t steps,
                                 const std::function<double(int64_t)>& lr_of_step,
                                 const AdamWParams& adamw, double clip_norm,
                                 const std::string& stage) {
  model.set_requires_grad(true);
  std::map<std::string, AdamWStateT<float>> opt_state;
  std::vector<StepMetric> metrics;
  metrics.reserve(static_cast<size_t>(steps));
  double initial_loss = 0;
  int64_t high_loss_streak = 0;

  for (int64_t step = 0; step < steps; ++step) {
    auto batch = stream.next();
    Tensor loss_sum;
    for (const auto& block : batch) {
      std::vector<int> inputs(block.begin(), block.end() - 1);
      std::vector<int> targets(block.begin() + 1, block.end());
      Tensor block_loss = cross_entropy(model.forward(inputs).logits, targets);
      loss_sum = loss_sum.defined() ? add(loss_sum, block_loss) : block_loss;
    }
    Tensor loss = scale(loss_sum, 1.0f / static_cast<float>(batch.size()));
    const double loss_value = static_cast<double>(loss.item());
    const double lr = lr_of_step(step);
    metrics.push_back({step, loss_value, lr, stage});

    if (!std::isfinite(loss_value))
      fail("training diverged: non-finite loss at step ", step, " (stage ", stage, ")");
    if (step == 0) initial_loss = loss_value;
    high_loss_streak = (loss_value > 2.0 * initial_loss) ? high_loss_streak + 1 : 0;
    if (high_loss_streak >= 200)
      fail("training diverged: loss above 2x initial (", initial_loss, ") for 200 steps, at step ",
           step);

    loss.backward();
    clip_grad_norm(model.params, clip_norm);
    AdamWParams hp = adamw;
    hp.lr = lr;
    for (auto& [name, p] : model.params) adamw_step(p, opt_state[name], hp);
    model.zero_grads();
  }
  model.set_requires_grad(false);
  return metrics;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Corpus& corpus) {
  cfg.validate();
  const int64_t batch_size = cfg.batch_tokens / cfg.model.train_seq_len;
  BatchStream stream(corpus, cfg.model.train_seq_len, batch_size, cfg.seed ^ 0xb10c5eedULL);

  TrainResult result;
  result.checkpoint.model = Model::init(cfg.model, cfg.seed);
  result.metrics = run_loop(result.checkpoint.model, stream, cfg.total_steps,
                            [&](int64_t s) { return lr_at(cfg.schedule, s); }, cfg.adamw,
                            cfg.grad_clip_norm, "train");
  result.checkpoint.meta.steps = cfg.total_steps;
  result.checkpoint.meta.seed = cfg.seed;
  result.checkpoint.meta.corpus_id = corpus.id;
  result.checkpoint.meta.stage = cfg.total_steps > 0 ? "train" : "init";
  result.checkpoint.meta.loss_digest = digest_losses(result.metrics);
  return result;
}

TrainResult continue_pretraining(const Checkpoint& start, const CptConfig& cfg,
                                 const Corpus& corpus) {
  start.model.config.validate();
  if (cfg.steps < 0) fail("cpt config: negative steps");
  if (cfg.batch_tokens < start.model.config.train_seq_len ||
      cfg.batch_tokens % start.model.config.train_seq_len != 0)
    fail("cpt config: batch_tokens ", cfg.batch_tokens, " not divisible by train_seq_len ",
         start.model.config.train_seq_len);

  const int64_t ramp_start =
      cfg.steps - static_cast<int64_t>(std::floor(cfg.ramp_frac * static_cast<double>(cfg.steps)));
  auto lr_of_step = [&](int64_t s) {
    if (s < ramp_start || cfg.steps == ramp_start) return cfg.lr;
    const double frac = static_cast<double>(s - ramp_start) /
                        static_cast<double>(cfg.steps - ramp_start);
    const double lo = cfg.lr * cfg.ramp_floor_factor;
    return cfg.lr + (lo - cfg.lr) * frac;
  };

  const int64_t batch_size = cfg.batch_tokens / start.model.config.train_seq_len;
  BatchStream stream(corpus, start.model.config.train_seq_len, batch_size,
                     cfg.seed ^ 0xc91e5eedULL);

  TrainResult result;
  result.checkpoint.model = start.model.clone();
  result.metrics = run_loop(result.checkpoint.model, stream, cfg.steps, lr_of_step, cfg.adamw,
                            cfg.grad_clip_norm, "cpt");
  result.checkpoint.meta = start.meta;
  result.checkpoint.meta.steps = start.meta.steps + cfg.steps;
  result.checkpoint.meta.seed = cfg.seed;
  result.checkpoint.meta.corpus_id = corpus.id;
  if (cfg.steps > 0) result.checkpoint.meta.stage = "cpt";
  auto digest = digest_losses(result.metrics);
  result.checkpoint.meta.loss_digest.insert(result.checkpoint.meta.loss_digest.end(),
                                            digest.begin(), digest.end());
  return result;
}

}  // namespace swan
