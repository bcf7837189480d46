#include "gft/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace gft {

namespace {

constexpr char kMagic[4] = {'G', 'F', 'T', 'C'};

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return true;
}

void write_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  write_le(out, bits);
}

bool read_f32(std::istream& in, float& f) {
  std::uint32_t bits;
  if (!read_le(in, bits)) return false;
  std::memcpy(&f, &bits, sizeof(f));
  return true;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["num_layers"] = cfg.num_layers;
  j["max_seq_len"] = cfg.max_seq_len;
  j["model_dim"] = cfg.model_dim;
  j["ffn_dim"] = cfg.ffn_dim;
  j["num_heads"] = cfg.num_heads;
  j["dropout"] = cfg.dropout;
  j["use_eau"] = cfg.use_eau;
  j["use_grc"] = cfg.use_grc;
  j["src_vocab_size"] = cfg.src_vocab_size;
  j["tgt_vocab_size"] = cfg.tgt_vocab_size;
  j["label_smoothing"] = cfg.label_smoothing;
  j["seed"] = cfg.seed;
  j["layer_norm_eps"] = cfg.layer_norm_eps;
  j["gate_bias_init"] = cfg.gate_bias_init;
  j["scale_embeddings"] = cfg.scale_embeddings;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ModelConfig cfg;
  try {
    cfg.num_layers = j.at("num_layers").get<int>();
    cfg.max_seq_len = j.at("max_seq_len").get<int>();
    cfg.model_dim = j.at("model_dim").get<int>();
    cfg.ffn_dim = j.at("ffn_dim").get<int>();
    cfg.num_heads = j.value("num_heads", 0);
    cfg.dropout = j.at("dropout").get<double>();
    cfg.use_eau = j.at("use_eau").get<bool>();
    cfg.use_grc = j.at("use_grc").get<bool>();
    cfg.src_vocab_size = j.at("src_vocab_size").get<int>();
    cfg.tgt_vocab_size = j.at("tgt_vocab_size").get<int>();
    cfg.label_smoothing = j.at("label_smoothing").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.layer_norm_eps = j.value("layer_norm_eps", 1e-5);
    cfg.gate_bias_init = j.value("gate_bias_init", 0.0);
    cfg.scale_embeddings = j.value("scale_embeddings", true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: missing or mistyped field: ") + e.what());
  }
  return cfg;
}

void save_checkpoint(const TransformerModel& model, const std::string& config_json,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open for writing: " + path);

  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, config_json.size());
  out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));

  for (const NamedParam& p : model.named_parameters()) {
    write_le<std::uint64_t>(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const Shape& shape = p.tensor.shape();
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) write_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (double x : p.tensor.data()) write_f32(out, static_cast<float>(x));
  }
  if (!out) throw IoError("checkpoint: write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open: " + path);

  char magic[4];
  if (!in.read(magic, sizeof(magic))) {
    throw CheckpointTruncatedError("checkpoint: file shorter than header: " + path);
  }
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointVersionError("checkpoint: bad magic bytes in " + path);
  }
  std::uint32_t version = 0;
  if (!read_le(in, version)) {
    throw CheckpointTruncatedError("checkpoint: truncated version field");
  }
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint: unsupported format version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  std::uint64_t cfg_len = 0;
  if (!read_le(in, cfg_len)) {
    throw CheckpointTruncatedError("checkpoint: truncated config length");
  }
  std::string config_json(cfg_len, '\0');
  if (!in.read(config_json.data(), static_cast<std::streamsize>(cfg_len))) {
    throw CheckpointTruncatedError("checkpoint: truncated config blob");
  }

  LoadedCheckpoint result;
  result.config_json = config_json;
  result.model = build_model(model_config_from_json(config_json));

  std::map<std::string, Tensor> expected;
  for (const NamedParam& p : result.model.named_parameters()) {
    expected.emplace(p.name, p.tensor);
  }
  std::map<std::string, bool> seen;

  while (true) {
    std::uint64_t name_len = 0;
    if (!read_le(in, name_len)) break;  // clean EOF between records
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw CheckpointTruncatedError("checkpoint: truncated tensor name");
    }
    std::uint32_t rank = 0;
    if (!read_le(in, rank)) {
      throw CheckpointTruncatedError("checkpoint: truncated rank for " + name);
    }
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint64_t d = 0;
      if (!read_le(in, d)) {
        throw CheckpointTruncatedError("checkpoint: truncated dims for " + name);
      }
      shape.push_back(static_cast<int>(d));
    }
    auto it = expected.find(name);
    if (it == expected.end()) {
      throw CheckpointShapeError("checkpoint: tensor " + name +
                                 " not present in model built from stored config");
    }
    if (seen[name]) {
      throw CheckpointShapeError("checkpoint: duplicate tensor " + name);
    }
    if (it->second.shape() != shape) {
      throw CheckpointShapeError("checkpoint: tensor " + name + " stored as " +
                                 shape_str(shape) + " but model expects " +
                                 shape_str(it->second.shape()));
    }
    Tensor t = it->second;
    auto& data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      float f;
      if (!read_f32(in, f)) {
        throw CheckpointTruncatedError("checkpoint: truncated payload for " + name);
      }
      data[i] = static_cast<double>(f);
    }
    seen[name] = true;
  }

  for (const auto& [name, _] : expected) {
    if (!seen[name]) {
      throw CheckpointTruncatedError("checkpoint: missing tensor " + name);
    }
  }
  return result;
}

}  // namespace gft
