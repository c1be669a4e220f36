#pragma once

#include <functional>
#include <map>

#include "swan/checkpoint.hpp"

namespace swan {

struct NiahTask {
  std::vector<int> tokens;  // exactly context_len byte tokens
  std::string needle_key;
  std::string needle_value;   // digit string
  int64_t needle_position = 0;  // byte offset of the needle sentence
  std::string query_suffix;
};

// Seeded filler of word-like sentences with one planted
// "the magic number for <key> is <value>." sentence and a trailing query
// that asks for the value back.
NiahTask gen_niah(int64_t context_len, double depth_fraction, uint64_t seed);

// 1.0 when the value appears in the decode; otherwise the matched-prefix
// ratio of the value digits, starting at the first decoded digit.
double score_decode(const NiahTask& task, const std::string& decoded);

// Greedy byte decoding; every step re-runs the full forward pass.
std::string greedy_decode(const Checkpoint& ckpt, const std::vector<int>& prompt,
                          int64_t n_tokens, const ScalingPolicy& policy);

double score_niah(const Checkpoint& ckpt, const NiahTask& task, const ScalingPolicy& policy,
                  int64_t decode_len);

struct NiahReport {
  struct Cell {
    int64_t context_len = 0;
    double depth = 0;
    double mean_score = 0;
    int64_t trials = 0;
  };
  std::vector<Cell> cells;
  std::map<int64_t, double> mean_by_len;
  std::vector<std::string> task_errors;  // per-task failures, never fatal
  std::string model_id;
  std::string policy_id;
};

// decode_fn(prompt, n) -> decoded bytes; lets tests drive the sweep with stubs.
NiahReport niah_sweep_with(const std::function<std::string(const std::vector<int>&, int64_t)>& decode_fn,
                           const std::vector<int64_t>& context_lens,
                           const std::vector<double>& depths, int64_t trials_per_cell,
                           uint64_t seed, int64_t decode_len);

NiahReport niah_sweep(const Checkpoint& ckpt, const std::vector<int64_t>& context_lens,
                      const std::vector<double>& depths, int64_t trials_per_cell,
                      const ScalingPolicy& policy, uint64_t seed, int64_t decode_len = 8);

}  // namespace swan
