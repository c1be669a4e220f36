#include "swan/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "swan/io.hpp"
#include "swan/serialize.hpp"

namespace swan {

namespace {

constexpr char kMagic[8] = {'S', 'W', 'A', 'N', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void to_json(json& j, const TrainMeta& m) {
  j = json{{"steps", m.steps},
           {"seed", m.seed},
           {"corpus_id", m.corpus_id},
           {"stage", m.stage},
           {"loss_digest", m.loss_digest}};
}

void from_json(const json& j, TrainMeta& m) {
  j.at("steps").get_to(m.steps);
  j.at("seed").get_to(m.seed);
  j.at("corpus_id").get_to(m.corpus_id);
  j.at("stage").get_to(m.stage);
  j.at("loss_digest").get_to(m.loss_digest);
}

template <class T>
void put(std::string& buf, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buf.append(p, sizeof(T));
}

template <class T>
T take(const std::string& buf, size_t& off) {
  if (off + sizeof(T) > buf.size()) fail("checkpoint: truncated file");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  ckpt.model.config.validate();
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put(buf, kVersion);

  json meta;
  meta["config"] = ckpt.model.config;
  to_json(meta["train"], ckpt.meta);
  const std::string meta_str = meta.dump();
  put(buf, static_cast<uint64_t>(meta_str.size()));
  buf += meta_str;

  put(buf, static_cast<uint64_t>(ckpt.model.params.size()));
  for (const auto& [name, tensor] : ckpt.model.params) {
    put(buf, static_cast<uint32_t>(name.size()));
    buf += name;
    put(buf, static_cast<uint32_t>(tensor.rank()));
    for (int64_t e : tensor.shape()) put(buf, e);
    auto vals = tensor.values();
    buf.append(reinterpret_cast<const char*>(vals.data()), vals.size() * sizeof(float));
  }
  write_file_atomic(path, buf);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string buf;
  try {
    buf = read_file(path);
  } catch (const Error&) {
    fail("checkpoint: cannot open '", path, "'");
  }
  size_t off = 0;
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    fail("checkpoint: '", path, "' is not a swan checkpoint");
  off = sizeof(kMagic);
  const uint32_t version = take<uint32_t>(buf, off);
  if (version != kVersion) fail("checkpoint: unsupported format version ", version);

  const uint64_t meta_len = take<uint64_t>(buf, off);
  if (off + meta_len > buf.size()) fail("checkpoint: truncated metadata");
  json meta = json::parse(buf.substr(off, meta_len));
  off += meta_len;

  Checkpoint ckpt;
  ckpt.model.config = meta.at("config").get<ModelConfig>();
  from_json(meta.at("train"), ckpt.meta);

  const uint64_t n_params = take<uint64_t>(buf, off);
  for (uint64_t i = 0; i < n_params; ++i) {
    const uint32_t name_len = take<uint32_t>(buf, off);
    if (off + name_len > buf.size()) fail("checkpoint: truncated parameter name");
    std::string name = buf.substr(off, name_len);
    off += name_len;
    const uint32_t rank = take<uint32_t>(buf, off);
    std::vector<int64_t> shape;
    int64_t numel = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      shape.push_back(take<int64_t>(buf, off));
      numel *= shape.back();
    }
    if (off + static_cast<size_t>(numel) * sizeof(float) > buf.size())
      fail("checkpoint: truncated payload for '", name, "'");
    Tensor t(shape);
    std::memcpy(t.values().data(), buf.data() + off, static_cast<size_t>(numel) * sizeof(float));
    off += static_cast<size_t>(numel) * sizeof(float);
    ckpt.model.params.emplace(std::move(name), std::move(t));
  }
  if (off != buf.size()) fail("checkpoint: ", buf.size() - off, " trailing bytes");
  return ckpt;
}

Checkpoint convert_rope_to_swan(const Checkpoint& src, const LayerSchedule& target,
                                int64_t window_size) {
  if (target.n_layers() != src.model.config.n_layers)
    fail("convert: target schedule has ", target.n_layers(), " layers, checkpoint has ",
         src.model.config.n_layers);
  Checkpoint out;
  out.model = src.model.clone();
  out.meta = src.meta;
  out.model.config.schedule = target;
  out.model.config.window_size = window_size;
  out.model.config.validate();
  out.meta.stage = "converted";
  return out;
}

}  // namespace swan
