#include "swan/niah.hpp"

#include <algorithm>

#include "swan/corpus.hpp"

namespace swan {

namespace {

std::string random_word(Rng& rng, int64_t min_len, int64_t max_len) {
  std::string w;
  const int64_t len = rng.randint(min_len, max_len);
  for (int64_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.randint(0, 25));
  return w;
}

std::string filler_text(Rng& rng, int64_t target_len) {
  std::string out;
  while (static_cast<int64_t>(out.size()) < target_len) {
    const int64_t n_words = rng.randint(4, 9);
    for (int64_t w = 0; w < n_words; ++w) {
      if (w) out += ' ';
      out += random_word(rng, 3, 8);
    }
    out += ". ";
  }
  out.resize(static_cast<size_t>(target_len));
  return out;
}

int64_t count_occurrences(const std::string& haystack, const std::string& needle) {
  int64_t n = 0;
  size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++n;
    ++pos;
  }
  return n;
}

}  // namespace

NiahTask gen_niah(int64_t context_len, double depth_fraction, uint64_t seed) {
  if (depth_fraction < 0.0 || depth_fraction > 1.0)
    fail("gen_niah: depth_fraction ", depth_fraction, " outside [0,1]");
  Rng rng(seed);
  NiahTask task;
  task.needle_key = random_word(rng, 5, 7);
  for (int i = 0; i < 4; ++i)
    task.needle_value += static_cast<char>('0' + rng.randint(0, 9));
  const std::string needle =
      "the magic number for " + task.needle_key + " is " + task.needle_value + ". ";
  task.query_suffix = "\nthe magic number for " + task.needle_key + " is";

  const int64_t overhead = static_cast<int64_t>(needle.size() + task.query_suffix.size());
  const int64_t filler_len = context_len - overhead;
  if (filler_len < 16)
    fail("gen_niah: context_len ", context_len, " too small for needle plus query (needs >= ",
         overhead + 16, ")");

  std::string filler = filler_text(rng, filler_len);
  task.needle_position =
      static_cast<int64_t>(std::floor(depth_fraction * static_cast<double>(filler_len)));
  std::string text = filler.substr(0, static_cast<size_t>(task.needle_position)) + needle +
                     filler.substr(static_cast<size_t>(task.needle_position)) +
                     task.query_suffix;
  if (count_occurrences(text, needle) != 1)
    fail("gen_niah: needle collision for seed ", seed);  // vanishingly unlikely
  task.tokens = doc_tokens(text);
  return task;
}

double score_decode(const NiahTask& task, const std::string& decoded) {
  if (decoded.find(task.needle_value) != std::string::npos) return 1.0;
  // partial credit: prefix match of the value digits, from the first decoded digit
  size_t start = 0;
  while (start < decoded.size() && !std::isdigit(static_cast<unsigned char>(decoded[start])))
    ++start;
  size_t match = 0;
  while (match < task.needle_value.size() && start + match < decoded.size() &&
         decoded[start + match] == task.needle_value[match])
    ++match;
  return static_cast<double>(match) / static_cast<double>(task.needle_value.size());
}

std::string greedy_decode(const Checkpoint& ckpt, const std::vector<int>& prompt,
                          int64_t n_tokens, const ScalingPolicy& policy) {
  NoGradGuard ng;
  ForwardOptions<float> opt;
  opt.policy = policy;
  std::vector<int> tokens = prompt;
  std::string out;
  for (int64_t i = 0; i < n_tokens; ++i) {
    auto logits = ckpt.model.forward(tokens, opt).logits;
    const int64_t T = logits.dim(0), V = logits.dim(1);
    auto row = logits.values().subspan(static_cast<size_t>((T - 1) * V), static_cast<size_t>(V));
    // decode bytes only; reserved special ids never appear in text
    int best = 0;
    const int64_t byte_vocab = std::min<int64_t>(V, 256);
    for (int64_t v = 1; v < byte_vocab; ++v)
      if (row[static_cast<size_t>(v)] > row[static_cast<size_t>(best)]) best = static_cast<int>(v);
    tokens.push_back(best);
    out += static_cast<char>(best);
  }
  return out;
}

double score_niah(const Checkpoint& ckpt, const NiahTask& task, const ScalingPolicy& policy,
                  int64_t decode_len) {
  return score_decode(task, greedy_decode(ckpt, task.tokens, decode_len, policy));
}

NiahReport niah_sweep_with(
    const std::function<std::string(const std::vector<int>&, int64_t)>& decode_fn,
    const std::vector<int64_t>& context_lens, const std::vector<double>& depths,
    int64_t trials_per_cell, uint64_t seed, int64_t decode_len) {
  if (trials_per_cell < 1) fail("niah_sweep: trials_per_cell must be >= 1");
  if (context_lens.empty() || depths.empty()) fail("niah_sweep: empty sweep axes");

  NiahReport report;
  for (int64_t len : context_lens) {
    double len_acc = 0;
    int64_t len_n = 0;
    for (size_t di = 0; di < depths.size(); ++di) {
      NiahReport::Cell cell;
      cell.context_len = len;
      cell.depth = depths[di];
      double acc = 0;
      int64_t done = 0;
      for (int64_t trial = 0; trial < trials_per_cell; ++trial) {
        const uint64_t task_seed = seed + 1000003ULL * static_cast<uint64_t>(len) +
                                   7919ULL * static_cast<uint64_t>(di) +
                                   static_cast<uint64_t>(trial);
        try {
          NiahTask task = gen_niah(len, depths[di], task_seed);
          acc += score_decode(task, decode_fn(task.tokens, decode_len));
          ++done;
        } catch (const Error& e) {
          report.task_errors.emplace_back(e.what());
        }
      }
      cell.trials = done;
      cell.mean_score = done ? acc / static_cast<double>(done) : 0.0;
      report.cells.push_back(cell);
      len_acc += acc;
      len_n += done;
    }
    report.mean_by_len[len] = len_n ? len_acc / static_cast<double>(len_n) : 0.0;
  }
  return report;
}

NiahReport niah_sweep(const Checkpoint& ckpt, const std::vector<int64_t>& context_lens,
                      const std::vector<double>& depths, int64_t trials_per_cell,
                      const ScalingPolicy& policy, uint64_t seed, int64_t decode_len) {
  auto decode_fn = [&](const std::vector<int>& prompt, int64_t n) {
    return greedy_decode(ckpt, prompt, n, policy);
  };
  NiahReport report =
      niah_sweep_with(decode_fn, context_lens, depths, trials_per_cell, seed, decode_len);
  report.model_id = ckpt.meta.corpus_id.empty() ? "checkpoint" : ckpt.meta.corpus_id;
  report.policy_id = policy.kind == ScalingPolicy::Kind::None ? "none"
                     : policy.kind == ScalingPolicy::Kind::Log ? "log"
                                                               : "yarn";
  return report;
}

}  // namespace swan
