#include "swan/cli.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

#include "swan/analysis.hpp"
#include "swan/io.hpp"
#include "swan/niah.hpp"
#include "swan/scalefit.hpp"
#include "swan/serialize.hpp"
#include "swan/train.hpp"

namespace swan {

namespace {

namespace fs = std::filesystem;

class ConfigError : public Error {
 public:
  using Error::Error;
};
class MissingInputError : public Error {
 public:
  using Error::Error;
};

struct RunContext {
  std::string command;
  json config;
  std::string out_dir;
  uint64_t seed = 0;
  bool deterministic = false;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  std::string out_path(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }
  void emit(const std::string& name, const std::string& contents) {
    write_file_atomic(out_path(name), contents);
    outputs.push_back(name);
  }
};

// ------------------------------- config access ------------------------------

json load_json_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw MissingInputError("missing " + std::string(what) + " '" + path + "'");
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  try {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config is missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

// Dotted-path override: --set train.total_steps=100
void apply_override(json& config, const std::string& kv) {
  const size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted strings pass through
  }
  json* node = &config;
  size_t start = 0;
  while (true) {
    const size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("--set key has an empty path segment: '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

// ------------------------------- shared pieces ------------------------------

ModelConfig model_config_from(const json& j) {
  ModelConfig c;
  c.n_layers = get_or<int64_t>(j, "n_layers", c.n_layers);
  c.d_model = get_or<int64_t>(j, "d_model", c.d_model);
  c.n_heads = get_or<int64_t>(j, "n_heads", c.n_heads);
  c.head_dim = get_or<int64_t>(j, "head_dim", c.d_model / std::max<int64_t>(c.n_heads, 1));
  c.ffn_dim = get_or<int64_t>(j, "ffn_dim", 4 * c.d_model);
  c.vocab_size = get_or<int64_t>(j, "vocab_size", c.vocab_size);
  c.window_size = get_or<int64_t>(j, "window_size", c.window_size);
  c.rope_base = get_or<double>(j, "rope_base", c.rope_base);
  c.train_seq_len = get_or<int64_t>(j, "train_seq_len", c.train_seq_len);
  const std::string pattern = get_or<std::string>(j, "pattern", "global_start");
  c.schedule = build_schedule(pattern, c.n_layers);
  c.validate();
  return c;
}

Corpus corpus_from(const json& j, RunContext& ctx) {
  if (j.contains("dir")) {
    const std::string dir = j.at("dir").get<std::string>();
    if (!fs::is_directory(dir)) throw MissingInputError("missing corpus dir '" + dir + "'");
    ctx.inputs.push_back(dir);
    return load_corpus_dir(dir);
  }
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    SyntheticSpec spec;
    spec.train_docs = get_or<int64_t>(s, "train_docs", spec.train_docs);
    spec.validation_docs = get_or<int64_t>(s, "validation_docs", spec.validation_docs);
    spec.heldout_docs = get_or<int64_t>(s, "heldout_docs", spec.heldout_docs);
    spec.doc_len = get_or<int64_t>(s, "doc_len", spec.doc_len);
    spec.seed = get_or<uint64_t>(s, "seed", spec.seed);
    return synthetic_corpus(spec);
  }
  throw ConfigError("corpus config needs either 'dir' or 'synthetic'");
}

Checkpoint checkpoint_from(const json& config, RunContext& ctx,
                           const std::string& key = "checkpoint") {
  const std::string path = require<std::string>(config, key);
  if (!fs::exists(path)) throw MissingInputError("missing checkpoint '" + path + "'");
  ctx.inputs.push_back(path);
  return load_checkpoint(path);
}

ScalingPolicy policy_from(const json& config) {
  if (!config.contains("policy")) return ScalingPolicy::none();
  try {
    return config.at("policy").get<ScalingPolicy>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
}

const std::vector<std::string>& split_docs(const Corpus& corpus, const std::string& split) {
  if (split == "train") return corpus.train;
  if (split == "validation") return corpus.validation;
  if (split == "heldout") return corpus.heldout;
  throw ConfigError("unknown corpus split '" + split + "'");
}

// Non-overlapping seq_len-token slices walked doc by doc.
std::vector<std::vector<int>> slice_sequences(const std::vector<std::string>& docs,
                                              int64_t seq_len, int64_t count) {
  std::vector<std::vector<int>> out;
  for (const auto& doc : docs) {
    const std::vector<int> tokens = doc_tokens(doc);
    for (int64_t start = 0; start + seq_len <= static_cast<int64_t>(tokens.size());
         start += seq_len) {
      out.emplace_back(tokens.begin() + start, tokens.begin() + start + seq_len);
      if (static_cast<int64_t>(out.size()) == count) return out;
    }
  }
  fail("corpus split yields only ", out.size(), " sequences of length ", seq_len, ", need ",
       count);
}

std::vector<std::vector<int>> docs_as_token_seqs(const std::vector<std::string>& docs,
                                                 int64_t n_docs, int64_t min_len) {
  if (static_cast<int64_t>(docs.size()) < n_docs)
    fail("corpus split has ", docs.size(), " docs, need ", n_docs);
  std::vector<std::vector<int>> out;
  for (int64_t d = 0; d < n_docs; ++d) {
    std::vector<int> tokens = doc_tokens(docs[static_cast<size_t>(d)]);
    if (static_cast<int64_t>(tokens.size()) < min_len)
      fail("doc ", d, " has ", tokens.size(), " tokens, needs ", min_len);
    out.push_back(std::move(tokens));
  }
  return out;
}

void write_metrics_csv(RunContext& ctx, const std::vector<StepMetric>& metrics) {
  CsvWriter csv({"step", "loss", "lr", "stage"});
  for (const auto& m : metrics) {
    csv.field(m.step).field(m.loss).field(m.lr).field(m.stage);
    csv.endrow();
  }
  ctx.emit("metrics.csv", csv.str());
}

// --------------------------------- commands ---------------------------------

void cmd_train(RunContext& ctx) {
  const json& cfg = ctx.config;
  Corpus corpus = corpus_from(cfg.at("corpus"), ctx);

  if (cfg.contains("cpt")) {
    const json& c = cfg.at("cpt");
    Checkpoint start = checkpoint_from(c, ctx, "from_checkpoint");
    CptConfig cpt;
    cpt.steps = require<int64_t>(c, "steps");
    cpt.lr = get_or<double>(c, "lr", cpt.lr);
    cpt.ramp_frac = get_or<double>(c, "ramp_frac", cpt.ramp_frac);
    cpt.ramp_floor_factor = get_or<double>(c, "ramp_floor_factor", cpt.ramp_floor_factor);
    cpt.batch_tokens = get_or<int64_t>(c, "batch_tokens", cpt.batch_tokens);
    cpt.grad_clip_norm = get_or<double>(c, "grad_clip_norm", cpt.grad_clip_norm);
    if (c.contains("adamw")) cpt.adamw = c.at("adamw").get<AdamWParams>();
    cpt.seed = ctx.seed;
    TrainResult result = continue_pretraining(start, cpt, corpus);
    const std::string name = get_or<std::string>(cfg, "out_checkpoint", "model.ckpt");
    save_checkpoint(ctx.out_path(name), result.checkpoint);
    ctx.outputs.push_back(name);
    write_metrics_csv(ctx, result.metrics);
    std::cout << "cpt: " << cpt.steps << " steps, final loss "
              << (result.metrics.empty() ? 0.0 : result.metrics.back().loss) << "\n";
    return;
  }

  TrainConfig tc;
  tc.model = model_config_from(cfg.value("model", json::object()));
  const json& t = cfg.value("train", json::object());
  tc.total_steps = require<int64_t>(t, "total_steps");
  tc.batch_tokens = get_or<int64_t>(t, "batch_tokens", tc.batch_tokens);
  tc.grad_clip_norm = get_or<double>(t, "grad_clip_norm", tc.grad_clip_norm);
  tc.schedule.peak = get_or<double>(t, "peak_lr", tc.schedule.peak);
  tc.schedule.warmup_steps = get_or<int64_t>(t, "warmup_steps", tc.schedule.warmup_steps);
  tc.schedule.floor = get_or<double>(t, "floor_lr", tc.schedule.floor);
  tc.schedule.total_steps = std::max<int64_t>(tc.total_steps, 1);
  if (tc.schedule.warmup_steps > tc.schedule.total_steps)
    tc.schedule.warmup_steps = tc.schedule.total_steps;
  if (t.contains("adamw")) tc.adamw = t.at("adamw").get<AdamWParams>();
  tc.seed = ctx.seed;

  TrainResult result = train(tc, corpus);
  const std::string name = get_or<std::string>(cfg, "out_checkpoint", "model.ckpt");
  save_checkpoint(ctx.out_path(name), result.checkpoint);
  ctx.outputs.push_back(name);
  write_metrics_csv(ctx, result.metrics);
  std::cout << "train: " << tc.total_steps << " steps, final loss "
            << (result.metrics.empty() ? 0.0 : result.metrics.back().loss) << "\n";
}

void cmd_convert(RunContext& ctx) {
  const json& cfg = ctx.config;
  Checkpoint src = checkpoint_from(cfg, ctx);
  const std::string pattern = require<std::string>(cfg, "target_pattern");
  const int64_t window = get_or<int64_t>(cfg, "window_size", src.model.config.window_size);
  Checkpoint converted =
      convert_rope_to_swan(src, build_schedule(pattern, src.model.config.n_layers), window);
  const std::string name = get_or<std::string>(cfg, "out_checkpoint", "converted.ckpt");
  save_checkpoint(ctx.out_path(name), converted);
  ctx.outputs.push_back(name);
  std::cout << "convert: " << src.model.config.schedule.pattern_name << " -> " << pattern
            << ", window " << window << "\n";
}

void cmd_nll_curve(RunContext& ctx) {
  const json& cfg = ctx.config;
  Checkpoint ckpt = checkpoint_from(cfg, ctx);
  Corpus corpus = corpus_from(cfg.at("corpus"), ctx);
  const int64_t eval_len = get_or<int64_t>(cfg, "eval_len", 4 * ckpt.model.config.train_seq_len);
  const int64_t n_sequences = get_or<int64_t>(cfg, "n_sequences", 16);
  const auto& docs = split_docs(corpus, get_or<std::string>(cfg, "split", "validation"));
  NllCurve curve =
      per_position_nll(ckpt, slice_sequences(docs, eval_len, n_sequences), policy_from(cfg));

  CsvWriter csv({"position", "nll"});
  for (size_t i = 0; i < curve.mean_nll.size(); ++i) {
    csv.field(static_cast<int64_t>(i + 1)).field(curve.mean_nll[i]);
    csv.endrow();
  }
  ctx.emit("nll_curve.csv", csv.str());
}

void cmd_probe(RunContext& ctx) {
  const json& cfg = ctx.config;
  Checkpoint ckpt = checkpoint_from(cfg, ctx);
  Corpus corpus = corpus_from(cfg.at("corpus"), ctx);
  const int layer = get_or<int>(cfg, "layer_index",
                                static_cast<int>(ckpt.model.config.n_layers / 2));
  const int64_t seq_len = get_or<int64_t>(cfg, "seq_len", 2 * ckpt.model.config.train_seq_len);
  const auto range = require<std::vector<int64_t>>(cfg, "train_range");
  if (range.size() != 2) throw ConfigError("train_range must be [lo, hi)");
  const double lambda =
      get_or<double>(cfg, "ridge_lambda", 1e-3 * static_cast<double>(ckpt.model.config.d_model));
  const int64_t n_train = get_or<int64_t>(cfg, "n_train_sequences", 24);
  const int64_t n_eval = get_or<int64_t>(cfg, "n_eval_sequences", 8);

  auto train_seqs = slice_sequences(split_docs(corpus, "validation"), seq_len, n_train);
  auto eval_seqs = slice_sequences(split_docs(corpus, "heldout"), seq_len, n_eval);
  PositionProbe probe =
      train_position_probe(ckpt, train_seqs, layer, range[0], range[1], lambda, ctx.seed);

  std::vector<int64_t> positions;
  if (cfg.contains("eval_positions")) {
    positions = cfg.at("eval_positions").get<std::vector<int64_t>>();
  } else {
    const int64_t stride = get_or<int64_t>(cfg, "eval_stride", 16);
    for (int64_t p = 0; p < seq_len; p += stride) positions.push_back(p);
  }
  ProbeEval eval = eval_probe(probe, ckpt, eval_seqs, positions);

  CsvWriter csv({"position", "mean_pred", "mae"});
  for (size_t i = 0; i < eval.positions.size(); ++i) {
    csv.field(eval.positions[i]).field(eval.mean_pred[i]).field(eval.mae[i]);
    csv.endrow();
  }
  ctx.emit("probe_eval.csv", csv.str());
  std::cout << "probe: layer " << layer << " range [" << range[0] << "," << range[1]
            << ") train mae " << probe.train_mae << "\n";
}

void cmd_attn_map(RunContext& ctx) {
  const json& cfg = ctx.config;
  Checkpoint ckpt = checkpoint_from(cfg, ctx);
  Corpus corpus = corpus_from(cfg.at("corpus"), ctx);
  const int layer = require<int>(cfg, "layer_index");
  const int64_t T = get_or<int64_t>(cfg, "t", 3 * ckpt.model.config.train_seq_len);
  const int64_t n_batches = get_or<int64_t>(cfg, "n_batches", 8);
  const bool shuffle = get_or<bool>(cfg, "shuffle_tokens", true);
  auto seqs = slice_sequences(split_docs(corpus, "validation"), T, n_batches);
  AttnMap map = average_attention_map(ckpt, seqs, layer, shuffle, ctx.seed);

  std::vector<int64_t> rows;
  if (cfg.contains("rows")) {
    rows = cfg.at("rows").get<std::vector<int64_t>>();
  } else {
    rows = {T / 3 - 1, 2 * T / 3 - 1, T - 1};
  }
  CsvWriter csv({"row", "key", "prob"});
  for (int64_t r : rows) {
    const std::vector<double> slice = map.row(r);
    for (int64_t j = 0; j < map.t; ++j) {
      csv.field(r).field(j).field(slice[static_cast<size_t>(j)]);
      csv.endrow();
    }
  }
  ctx.emit("attn_rows.csv", csv.str());

  if (get_or<bool>(cfg, "dense", false)) {
    CsvWriter dense({"query", "key", "prob"});
    for (int64_t i = 0; i < map.t; ++i)
      for (int64_t j = 0; j < map.t; ++j) {
        dense.field(i).field(j).field(map.at(i, j));
        dense.endrow();
      }
    ctx.emit("attn_map.csv", dense.str());
  }
}

std::vector<double> grid_from(const json& cfg) {
  if (cfg.contains("grid") && cfg.at("grid").is_array())
    return cfg.at("grid").get<std::vector<double>>();
  const json g = cfg.value("grid", json::object());
  return scale_grid(get_or<double>(g, "lo", 1.0), get_or<double>(g, "hi", 2.0),
                    get_or<double>(g, "step", 0.025));
}

void cmd_scale_fit(RunContext& ctx) {
  const json& cfg = ctx.config;
  Checkpoint ckpt = checkpoint_from(cfg, ctx);
  Corpus corpus = corpus_from(cfg.at("corpus"), ctx);
  const int64_t window_len = get_or<int64_t>(cfg, "window_len", 64);
  const int64_t max_context =
      get_or<int64_t>(cfg, "max_context", 32 * ckpt.model.config.train_seq_len);
  const int64_t n_docs = get_or<int64_t>(cfg, "n_docs", 20);
  const auto& docs = split_docs(corpus, get_or<std::string>(cfg, "split", "heldout"));
  auto doc_seqs = docs_as_token_seqs(docs, n_docs, max_context);

  std::vector<ScalePoint> points =
      estimate_optimal_scales(ckpt, doc_seqs, window_len, grid_from(cfg), max_context);
  FitResult log_fit = fit_log_curve(points);
  FitResult yarn_fit = fit_yarn_curve(
      points, get_or<int64_t>(cfg, "yarn_train_len", ckpt.model.config.train_seq_len));

  CsvWriter csv({"position", "optimal_scale", "ppl"});
  for (const auto& p : points) {
    csv.field(p.window_start).field(p.optimal_scale).field(p.window_ppl);
    csv.endrow();
  }
  ctx.emit("scale_points.csv", csv.str());

  json summary = {{"log", {{"a", log_fit.param}, {"rmse", log_fit.rmse}}},
                  {"yarn", {{"train_len", yarn_fit.param}, {"rmse", yarn_fit.rmse}}}};
  ctx.emit("fit_summary.json", summary.dump(2) + "\n");
  std::cout << "scale-fit: log a=" << log_fit.param << " rmse=" << log_fit.rmse
            << ", yarn rmse=" << yarn_fit.rmse << "\n";
}

void cmd_ppl_curve(RunContext& ctx) {
  const json& cfg = ctx.config;
  Checkpoint ckpt = checkpoint_from(cfg, ctx);
  Corpus corpus = corpus_from(cfg.at("corpus"), ctx);
  const int64_t window_len = get_or<int64_t>(cfg, "window_len", 64);
  const int64_t max_context =
      get_or<int64_t>(cfg, "max_context", 32 * ckpt.model.config.train_seq_len);
  const int64_t n_docs = get_or<int64_t>(cfg, "n_docs", 20);
  const auto& docs = split_docs(corpus, get_or<std::string>(cfg, "split", "heldout"));
  auto doc_seqs = docs_as_token_seqs(docs, n_docs, max_context);
  auto curve = ppl_curve(ckpt, doc_seqs, policy_from(cfg), window_len, max_context);

  CsvWriter csv({"window_start", "ppl"});
  for (const auto& [start, ppl] : curve) {
    csv.field(start).field(ppl);
    csv.endrow();
  }
  ctx.emit("ppl_curve.csv", csv.str());
}

void cmd_niah(RunContext& ctx) {
  const json& cfg = ctx.config;
  Checkpoint ckpt = checkpoint_from(cfg, ctx);
  const auto context_lens = require<std::vector<int64_t>>(cfg, "context_lens");
  const auto depths = get_or<std::vector<double>>(cfg, "depths", {0.1, 0.3, 0.5, 0.7, 0.9});
  const int64_t trials = get_or<int64_t>(cfg, "trials", 2);
  const int64_t decode_len = get_or<int64_t>(cfg, "decode_len", 8);
  NiahReport report =
      niah_sweep(ckpt, context_lens, depths, trials, policy_from(cfg), ctx.seed, decode_len);

  CsvWriter csv({"context_len", "depth", "mean_score"});
  for (const auto& cell : report.cells) {
    csv.field(cell.context_len).field(cell.depth).field(cell.mean_score);
    csv.endrow();
  }
  ctx.emit("niah.csv", csv.str());

  CsvWriter by_len({"context_len", "mean_score"});
  for (const auto& [len, score] : report.mean_by_len) {
    by_len.field(len).field(score);
    by_len.endrow();
  }
  ctx.emit("niah_by_len.csv", by_len.str());
  for (const auto& err : report.task_errors) std::cerr << "niah task error: " << err << "\n";
}

using CommandFn = std::function<void(RunContext&)>;

const std::map<std::string, CommandFn>& command_table() {
  static const std::map<std::string, CommandFn> table = {
      {"train", cmd_train},         {"convert", cmd_convert},
      {"nll-curve", cmd_nll_curve}, {"probe", cmd_probe},
      {"attn-map", cmd_attn_map},   {"scale-fit", cmd_scale_fit},
      {"ppl-curve", cmd_ppl_curve}, {"niah", cmd_niah},
  };
  return table;
}

int dispatch(RunContext& ctx) {
  const auto it = command_table().find(ctx.command);
  if (it == command_table().end()) {
    std::cerr << "unknown command '" << ctx.command << "'\n";
    return kExitUsage;
  }
  fs::create_directories(ctx.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  it->second(ctx);
  const auto t1 = std::chrono::steady_clock::now();

  json manifest = {
      {"command", ctx.command},
      {"config", ctx.config},
      {"seed", ctx.seed},
      {"deterministic", ctx.deterministic},
      {"inputs", ctx.inputs},
      {"outputs", ctx.outputs},
      {"tool_version", kToolVersion},
      {"duration_ms",
       std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()},
  };
  write_file_atomic(ctx.out_path("manifest.json"), manifest.dump(2) + "\n");
  return kExitOk;
}

void usage(std::ostream& os) {
  os << "usage: swanlab <command> --config PATH [--out DIR] [--seed N]"
        " [--deterministic] [--set key=value ...]\n"
        "       swanlab replay --manifest PATH --out DIR\n"
        "commands: train convert nll-curve probe attn-map scale-fit ppl-curve niah replay\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  try {
    if (argc < 2) {
      usage(std::cerr);
      return kExitUsage;
    }
    const std::string command = argv[1];
    if (command == "--help" || command == "-h" || command == "help") {
      usage(std::cout);
      return kExitOk;
    }

    std::string config_path, out_dir = ".", manifest_path;
    std::optional<uint64_t> seed_flag;
    bool deterministic = false;
    std::vector<std::string> overrides;
    for (int i = 2; i < argc; ++i) {
      const std::string arg = argv[i];
      auto next = [&]() -> std::string {
        if (i + 1 >= argc) throw ConfigError("flag " + arg + " needs a value");
        return argv[++i];
      };
      if (arg == "--config") config_path = next();
      else if (arg == "--out") out_dir = next();
      else if (arg == "--seed") seed_flag = std::stoull(next());
      else if (arg == "--deterministic") deterministic = true;
      else if (arg == "--set") overrides.push_back(next());
      else if (arg == "--manifest") manifest_path = next();
      else {
        std::cerr << "unknown flag '" << arg << "'\n";
        usage(std::cerr);
        return kExitUsage;
      }
    }

    RunContext ctx;
    ctx.deterministic = deterministic;
    ctx.out_dir = out_dir;

    if (command == "replay") {
      if (manifest_path.empty()) throw ConfigError("replay needs --manifest PATH");
      json manifest = load_json_file(manifest_path, "manifest");
      ctx.command = require<std::string>(manifest, "command");
      ctx.config = manifest.at("config");
      ctx.seed = require<uint64_t>(manifest, "seed");
      ctx.deterministic = get_or<bool>(manifest, "deterministic", false);
      return dispatch(ctx);
    }

    ctx.command = command;
    if (command_table().find(command) == command_table().end()) {
      std::cerr << "unknown command '" << command << "'\n";
      usage(std::cerr);
      return kExitUsage;
    }
    if (config_path.empty()) throw ConfigError("command needs --config PATH");
    ctx.config = load_json_file(config_path, "config");
    for (const auto& kv : overrides) apply_override(ctx.config, kv);
    if (seed_flag) ctx.config["seed"] = *seed_flag;
    ctx.seed = get_or<uint64_t>(ctx.config, "seed", 0);
    return dispatch(ctx);
  } catch (const MissingInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace swan
