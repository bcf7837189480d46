#include "gft/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "gft/checkpoint.hpp"

namespace gft {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "num_layers",    "max_seq_len",   "model_dim",      "ffn_dim",
      "num_heads",     "dropout",       "label_smoothing", "use_eau",
      "use_grc",       "seed",          "src_vocab_size", "tgt_vocab_size",
      "layer_norm_eps", "gate_bias_init", "scale_embeddings",
      "beta1",         "beta2",         "weight_decay",   "adam_epsilon",
      "decay_all",     "grad_clip",     "schedule",       "peak_lr",
      "warmup_steps",  "batch_size",    "max_steps",      "eval_every",
      "early_stop_acc", "run_dir",      "checkpoint",     "log",
      "resume_from",   "train_src",     "train_tgt",      "val_src",
      "val_tgt",       "src_vocab",     "tgt_vocab"};
  return keys;
}

template <typename T>
void get_opt(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: field \"") + key + "\" has the wrong type");
  }
}

void require(bool present, const char* key) {
  if (!present) {
    throw ConfigError(std::string("config: required field \"") + key + "\" is missing");
  }
}

std::string join_path(const std::string& dir, const std::string& leaf) {
  if (leaf.empty()) return dir;
  if (leaf.front() == '/') return leaf;  // already absolute
  if (dir.empty() || dir == ".") return leaf;
  return dir.back() == '/' ? dir + leaf : dir + "/" + leaf;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known_keys().count(key)) {
      throw ConfigError("config: unknown key \"" + key + "\"");
    }
  }

  RunConfig c;
  get_opt(j, "num_layers", c.num_layers);
  get_opt(j, "max_seq_len", c.max_seq_len);
  get_opt(j, "model_dim", c.model_dim);
  get_opt(j, "ffn_dim", c.ffn_dim);
  get_opt(j, "num_heads", c.num_heads);
  get_opt(j, "dropout", c.dropout);
  get_opt(j, "label_smoothing", c.label_smoothing);
  get_opt(j, "use_eau", c.use_eau);
  get_opt(j, "use_grc", c.use_grc);
  get_opt(j, "seed", c.seed);
  get_opt(j, "src_vocab_size", c.src_vocab_size);
  get_opt(j, "tgt_vocab_size", c.tgt_vocab_size);
  get_opt(j, "layer_norm_eps", c.layer_norm_eps);
  get_opt(j, "gate_bias_init", c.gate_bias_init);
  get_opt(j, "scale_embeddings", c.scale_embeddings);
  get_opt(j, "beta1", c.beta1);
  get_opt(j, "beta2", c.beta2);
  get_opt(j, "weight_decay", c.weight_decay);
  get_opt(j, "adam_epsilon", c.adam_epsilon);
  get_opt(j, "decay_all", c.decay_all);
  get_opt(j, "grad_clip", c.grad_clip);
  get_opt(j, "schedule", c.schedule);
  get_opt(j, "peak_lr", c.peak_lr);
  get_opt(j, "warmup_steps", c.warmup_steps);
  get_opt(j, "batch_size", c.batch_size);
  get_opt(j, "max_steps", c.max_steps);
  get_opt(j, "eval_every", c.eval_every);
  get_opt(j, "early_stop_acc", c.early_stop_acc);
  get_opt(j, "run_dir", c.run_dir);
  get_opt(j, "checkpoint", c.checkpoint);
  get_opt(j, "log", c.log);
  get_opt(j, "resume_from", c.resume_from);
  get_opt(j, "train_src", c.train_src);
  get_opt(j, "train_tgt", c.train_tgt);
  get_opt(j, "val_src", c.val_src);
  get_opt(j, "val_tgt", c.val_tgt);
  get_opt(j, "src_vocab", c.src_vocab);
  get_opt(j, "tgt_vocab", c.tgt_vocab);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_json_text(text.str());
}

void RunConfig::validate_for_params() const {
  require(num_layers.has_value(), "num_layers");
  require(max_seq_len.has_value(), "max_seq_len");
  require(model_dim.has_value(), "model_dim");
  require(ffn_dim.has_value(), "ffn_dim");
  require(use_eau.has_value(), "use_eau");
  require(use_grc.has_value(), "use_grc");
  require(src_vocab_size.has_value(), "src_vocab_size");
  require(tgt_vocab_size.has_value(), "tgt_vocab_size");
  require(dropout.has_value(), "dropout");
  require(label_smoothing.has_value(), "label_smoothing");
  require(seed.has_value(), "seed");
}

void RunConfig::validate_for_train() const {
  require(num_layers.has_value(), "num_layers");
  require(max_seq_len.has_value(), "max_seq_len");
  require(model_dim.has_value(), "model_dim");
  require(ffn_dim.has_value(), "ffn_dim");
  require(use_eau.has_value(), "use_eau");
  require(use_grc.has_value(), "use_grc");
  require(dropout.has_value(), "dropout");
  require(label_smoothing.has_value(), "label_smoothing");
  require(seed.has_value(), "seed");
  require(beta1.has_value(), "beta1");
  require(beta2.has_value(), "beta2");
  require(weight_decay.has_value(), "weight_decay");
  require(schedule.has_value(), "schedule");
  require(peak_lr.has_value(), "peak_lr");
  if (schedule_kind_from_string(*schedule) == ScheduleKind::kWarmupInvSqrt) {
    require(warmup_steps.has_value(), "warmup_steps");
  }
  require(batch_size.has_value(), "batch_size");
  require(max_steps.has_value(), "max_steps");
  require(train_src.has_value(), "train_src");
  require(train_tgt.has_value(), "train_tgt");
  require(val_src.has_value(), "val_src");
  require(val_tgt.has_value(), "val_tgt");
  require(src_vocab.has_value(), "src_vocab");
  require(tgt_vocab.has_value(), "tgt_vocab");
  if (*batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (*max_steps < 1) throw ConfigError("config: max_steps must be >= 1");
  if (eval_every && *eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
}

ModelConfig RunConfig::to_model_config() const {
  ModelConfig m;
  m.num_layers = num_layers.value_or(0);
  m.max_seq_len = max_seq_len.value_or(0);
  m.model_dim = model_dim.value_or(0);
  m.ffn_dim = ffn_dim.value_or(0);
  m.num_heads = num_heads.value_or(0);
  m.dropout = dropout.value_or(0.0);
  m.use_eau = use_eau.value_or(false);
  m.use_grc = use_grc.value_or(false);
  m.src_vocab_size = src_vocab_size.value_or(0);
  m.tgt_vocab_size = tgt_vocab_size.value_or(0);
  m.label_smoothing = label_smoothing.value_or(0.0);
  m.seed = seed.value_or(0);
  m.layer_norm_eps = layer_norm_eps.value_or(1e-5);
  m.gate_bias_init = gate_bias_init.value_or(0.0);
  m.scale_embeddings = scale_embeddings.value_or(true);
  m.validate_and_resolve();
  return m;
}

AdamWOptions RunConfig::to_adamw_options() const {
  AdamWOptions o;
  o.beta1 = beta1.value_or(0.9);
  o.beta2 = beta2.value_or(0.98);
  o.epsilon = adam_epsilon.value_or(1e-8);
  o.weight_decay = weight_decay.value_or(0.01);
  o.decay_all = decay_all.value_or(false);
  if (o.beta1 < 0.0 || o.beta1 >= 1.0 || o.beta2 < 0.0 || o.beta2 >= 1.0) {
    throw ConfigError("config: betas must be in [0, 1)");
  }
  return o;
}

LRSchedule RunConfig::to_schedule() const {
  LRSchedule s;
  s.kind = schedule_kind_from_string(schedule.value_or("constant"));
  s.peak_lr = peak_lr.value_or(0.0);
  s.warmup_steps = warmup_steps.value_or(0);
  if (s.peak_lr <= 0.0) throw ConfigError("config: peak_lr must be positive");
  return s;
}

nlohmann::json RunConfig::effective_json() const {
  nlohmann::json j;
  auto put = [&](const char* key, const auto& opt) {
    if (opt.has_value()) j[key] = *opt;
  };
  put("num_layers", num_layers);
  put("max_seq_len", max_seq_len);
  put("model_dim", model_dim);
  put("ffn_dim", ffn_dim);
  j["num_heads"] = num_heads.value_or(model_dim.value_or(0) >= 256 ? 8 : 4);
  put("dropout", dropout);
  put("label_smoothing", label_smoothing);
  put("use_eau", use_eau);
  put("use_grc", use_grc);
  put("seed", seed);
  put("src_vocab_size", src_vocab_size);
  put("tgt_vocab_size", tgt_vocab_size);
  j["layer_norm_eps"] = layer_norm_eps.value_or(1e-5);
  j["gate_bias_init"] = gate_bias_init.value_or(0.0);
  j["scale_embeddings"] = scale_embeddings.value_or(true);
  put("beta1", beta1);
  put("beta2", beta2);
  put("weight_decay", weight_decay);
  j["adam_epsilon"] = adam_epsilon.value_or(1e-8);
  j["decay_all"] = decay_all.value_or(false);
  j["grad_clip"] = grad_clip.value_or(0.0);
  put("schedule", schedule);
  put("peak_lr", peak_lr);
  put("warmup_steps", warmup_steps);
  put("batch_size", batch_size);
  put("max_steps", max_steps);
  j["eval_every"] = eval_every.value_or(100);
  j["early_stop_acc"] = early_stop_acc.value_or(0.0);
  j["run_dir"] = resolved_run_dir();
  j["checkpoint"] = checkpoint.value_or("checkpoint.gftc");
  j["log"] = log.value_or("loss.csv");
  put("resume_from", resume_from);
  put("train_src", train_src);
  put("train_tgt", train_tgt);
  put("val_src", val_src);
  put("val_tgt", val_tgt);
  put("src_vocab", src_vocab);
  put("tgt_vocab", tgt_vocab);
  return j;
}

std::string RunConfig::resolved_run_dir() const {
  if (const char* env = std::getenv("GFT_RUN_DIR"); env && *env) return env;
  return run_dir.value_or(".");
}

std::string RunConfig::checkpoint_path() const {
  return join_path(resolved_run_dir(), checkpoint.value_or("checkpoint.gftc"));
}

std::string RunConfig::best_checkpoint_path() const {
  std::string leaf = checkpoint.value_or("checkpoint.gftc");
  const auto dot = leaf.rfind(".gftc");
  if (dot != std::string::npos && dot == leaf.size() - 5) {
    leaf = leaf.substr(0, dot) + ".best.gftc";
  } else {
    leaf += ".best";
  }
  return join_path(resolved_run_dir(), leaf);
}

std::string RunConfig::log_path() const {
  return join_path(resolved_run_dir(), log.value_or("loss.csv"));
}

}  // namespace gft
