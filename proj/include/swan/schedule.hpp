#pragma once

#include <string>
#include <vector>

#include "swan/common.hpp"

namespace swan {

enum class LayerKind {
  GlobalNoPE,    // full causal attention, no positional encoding
  GlobalRoPE,    // full causal attention with rotary encoding
  LocalSWARoPE,  // sliding-window attention with rotary encoding
};

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::GlobalNoPE: return "global_nope";
    case LayerKind::GlobalRoPE: return "global_rope";
    case LayerKind::LocalSWARoPE: return "local_swa_rope";
  }
  return "?";
}

inline LayerKind kind_from_name(const std::string& s) {
  if (s == "global_nope") return LayerKind::GlobalNoPE;
  if (s == "global_rope") return LayerKind::GlobalRoPE;
  if (s == "local_swa_rope") return LayerKind::LocalSWARoPE;
  fail("unknown layer kind '", s, "'");
}

struct LayerSchedule {
  std::vector<LayerKind> kinds;
  std::string pattern_name;

  int64_t n_layers() const { return static_cast<int64_t>(kinds.size()); }
  int64_t count(LayerKind k) const {
    int64_t n = 0;
    for (LayerKind x : kinds) n += (x == k);
    return n;
  }
  bool uniform(LayerKind k) const { return count(k) == n_layers(); }
};

// Named interleaving patterns. Interleaved patterns keep a 1:3 global:local
// ratio and need n_layers divisible by 4; uniform patterns take any n >= 1.
inline LayerSchedule build_schedule(const std::string& pattern, int64_t n_layers) {
  if (n_layers < 1) fail("build_schedule: n_layers must be >= 1, got ", n_layers);
  LayerSchedule s;
  s.pattern_name = pattern;
  const LayerKind G = LayerKind::GlobalNoPE;
  const LayerKind L = LayerKind::LocalSWARoPE;
  auto need_div4 = [&] {
    if (n_layers % 4 != 0)
      fail("build_schedule: pattern '", pattern, "' needs n_layers divisible by 4, got ",
           n_layers);
  };
  if (pattern == "global_start") {
    need_div4();
    for (int64_t i = 0; i < n_layers; ++i) s.kinds.push_back(i % 4 == 0 ? G : L);
  } else if (pattern == "local_start") {
    need_div4();
    for (int64_t i = 0; i < n_layers; ++i) s.kinds.push_back(i % 4 == 3 ? G : L);
  } else if (pattern == "all_global_first") {
    need_div4();
    for (int64_t i = 0; i < n_layers; ++i) s.kinds.push_back(i < n_layers / 4 ? G : L);
  } else if (pattern == "all_local_first") {
    need_div4();
    for (int64_t i = 0; i < n_layers; ++i) s.kinds.push_back(i < 3 * n_layers / 4 ? L : G);
  } else if (pattern == "rope_only") {
    s.kinds.assign(static_cast<size_t>(n_layers), LayerKind::GlobalRoPE);
  } else if (pattern == "nope_only") {
    s.kinds.assign(static_cast<size_t>(n_layers), G);
  } else if (pattern == "swa_only") {
    s.kinds.assign(static_cast<size_t>(n_layers), L);
  } else {
    fail("build_schedule: unknown pattern '", pattern, "'");
  }
  return s;
}

}  // namespace swan
