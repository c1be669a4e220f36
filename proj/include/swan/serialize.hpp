#pragma once

#include <json.hpp>

#include "swan/attention.hpp"
#include "swan/model.hpp"
#include "swan/optim.hpp"

namespace swan {

using json = nlohmann::json;

inline void to_json(json& j, const LayerSchedule& s) {
  std::vector<std::string> kinds;
  for (LayerKind k : s.kinds) kinds.emplace_back(kind_name(k));
  j = json{{"pattern", s.pattern_name}, {"kinds", kinds}};
}

inline void from_json(const json& j, LayerSchedule& s) {
  s.pattern_name = j.at("pattern").get<std::string>();
  s.kinds.clear();
  for (const auto& k : j.at("kinds")) s.kinds.push_back(kind_from_name(k.get<std::string>()));
  // known pattern names must reconstruct to the stored layer list
  LayerSchedule rebuilt = build_schedule(s.pattern_name, s.n_layers());
  if (rebuilt.kinds != s.kinds)
    fail("layer schedule: stored kinds do not match pattern '", s.pattern_name, "'");
}

inline void to_json(json& j, const ModelConfig& c) {
  j = json{{"n_layers", c.n_layers},   {"d_model", c.d_model},
           {"n_heads", c.n_heads},     {"head_dim", c.head_dim},
           {"ffn_dim", c.ffn_dim},     {"vocab_size", c.vocab_size},
           {"window_size", c.window_size}, {"rope_base", c.rope_base},
           {"train_seq_len", c.train_seq_len}, {"schedule", c.schedule}};
}

inline void from_json(const json& j, ModelConfig& c) {
  j.at("n_layers").get_to(c.n_layers);
  j.at("d_model").get_to(c.d_model);
  j.at("n_heads").get_to(c.n_heads);
  j.at("head_dim").get_to(c.head_dim);
  j.at("ffn_dim").get_to(c.ffn_dim);
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("window_size").get_to(c.window_size);
  j.at("rope_base").get_to(c.rope_base);
  j.at("train_seq_len").get_to(c.train_seq_len);
  j.at("schedule").get_to(c.schedule);
  c.validate();
}

inline void to_json(json& j, const ScalingPolicy& p) {
  std::vector<std::string> applies;
  for (LayerKind k : p.applies_to) applies.emplace_back(kind_name(k));
  switch (p.kind) {
    case ScalingPolicy::Kind::None: j = json{{"kind", "none"}}; break;
    case ScalingPolicy::Kind::Log: j = json{{"kind", "log"}, {"a", p.a}}; break;
    case ScalingPolicy::Kind::Yarn: j = json{{"kind", "yarn"}, {"train_len", p.train_len}}; break;
  }
  j["applies_to"] = applies;
}

inline void from_json(const json& j, ScalingPolicy& p) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") {
    p.kind = ScalingPolicy::Kind::None;
  } else if (kind == "log") {
    p.kind = ScalingPolicy::Kind::Log;
    j.at("a").get_to(p.a);
  } else if (kind == "yarn") {
    p.kind = ScalingPolicy::Kind::Yarn;
    j.at("train_len").get_to(p.train_len);
  } else {
    fail("scaling policy: unknown kind '", kind, "'");
  }
  if (j.contains("applies_to")) {
    p.applies_to.clear();
    for (const auto& k : j.at("applies_to"))
      p.applies_to.insert(kind_from_name(k.get<std::string>()));
  }
  p.validate();
}

inline void to_json(json& j, const LrSchedule& s) {
  j = json{{"peak", s.peak},
           {"warmup_steps", s.warmup_steps},
           {"total_steps", s.total_steps},
           {"floor", s.floor}};
}

inline void from_json(const json& j, LrSchedule& s) {
  j.at("peak").get_to(s.peak);
  j.at("warmup_steps").get_to(s.warmup_steps);
  j.at("total_steps").get_to(s.total_steps);
  j.at("floor").get_to(s.floor);
}

inline void to_json(json& j, const AdamWParams& p) {
  j = json{{"lr", p.lr},
           {"beta1", p.beta1},
           {"beta2", p.beta2},
           {"eps", p.eps},
           {"weight_decay", p.weight_decay}};
}

inline void from_json(const json& j, AdamWParams& p) {
  if (j.contains("lr")) j.at("lr").get_to(p.lr);
  j.at("beta1").get_to(p.beta1);
  j.at("beta2").get_to(p.beta2);
  j.at("eps").get_to(p.eps);
  j.at("weight_decay").get_to(p.weight_decay);
}

}  // namespace swan
