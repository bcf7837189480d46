#include "gft/commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gft/checkpoint.hpp"
#include "gft/config.hpp"
#include "gft/data.hpp"
#include "gft/metrics.hpp"
#include "gft/train.hpp"
#include "gft/verify.hpp"

namespace gft::cmd {

namespace {

namespace fs = std::filesystem;

std::string variant_name(const ModelConfig& cfg) {
  if (cfg.use_eau && cfg.use_grc) return "eau_grc";
  if (cfg.use_eau) return "eau";
  if (cfg.use_grc) return "grc";
  return "baseline";
}

std::vector<data::SentencePair> load_pairs(const std::string& src_path,
                                           const std::string& tgt_path) {
  std::vector<std::string> src_lines = data::read_lines(src_path);
  std::vector<std::string> tgt_lines = data::read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw ConfigError("corpus: " + src_path + " has " + std::to_string(src_lines.size()) +
                      " lines but " + tgt_path + " has " + std::to_string(tgt_lines.size()));
  }
  std::vector<data::SentencePair> pairs;
  pairs.reserve(src_lines.size());
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    pairs.emplace_back(data::tokenize(src_lines[i]), data::tokenize(tgt_lines[i]));
  }
  return pairs;
}

struct LoadedModel {
  TransformerModel model;
  data::Vocab src_vocab;
  data::Vocab tgt_vocab;
};

LoadedModel load_model_with_vocabs(const std::string& checkpoint_file,
                                   const std::optional<std::string>& src_vocab_override,
                                   const std::optional<std::string>& tgt_vocab_override) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_file);
  nlohmann::json j = nlohmann::json::parse(loaded.config_json);
  std::string src_vocab_path = src_vocab_override.value_or(j.value("src_vocab", ""));
  std::string tgt_vocab_path = tgt_vocab_override.value_or(j.value("tgt_vocab", ""));
  if (src_vocab_path.empty() || tgt_vocab_path.empty()) {
    throw ConfigError("checkpoint " + checkpoint_file +
                      " does not record vocab paths; pass --src-vocab/--tgt-vocab");
  }
  LoadedModel lm{std::move(loaded.model), data::Vocab::load(src_vocab_path),
                 data::Vocab::load(tgt_vocab_path)};
  if (lm.src_vocab.size() != lm.model.cfg.src_vocab_size ||
      lm.tgt_vocab.size() != lm.model.cfg.tgt_vocab_size) {
    throw ConfigError("checkpoint/vocab mismatch: model expects vocab sizes " +
                      std::to_string(lm.model.cfg.src_vocab_size) + "/" +
                      std::to_string(lm.model.cfg.tgt_vocab_size) + " but files have " +
                      std::to_string(lm.src_vocab.size()) + "/" +
                      std::to_string(lm.tgt_vocab.size()));
  }
  return lm;
}

std::string translate_line(const LoadedModel& lm, const std::string& line) {
  std::vector<std::string> tokens = data::tokenize(line);
  std::vector<int> src_ids = lm.src_vocab.encode(tokens, /*add_bos_eos=*/true);
  if (static_cast<int>(src_ids.size()) > lm.model.cfg.max_seq_len) {
    throw ConfigError("translate: input of " + std::to_string(tokens.size()) +
                      " tokens exceeds max_seq_len " +
                      std::to_string(lm.model.cfg.max_seq_len));
  }
  std::vector<int> out_ids = lm.model.greedy_decode(src_ids, lm.model.cfg.max_seq_len,
                                                    data::kBosId, data::kEosId, data::kPadId);
  std::vector<std::string> out_tokens = lm.tgt_vocab.decode(out_ids, /*strip_specials=*/true);
  std::string joined;
  for (std::size_t i = 0; i < out_tokens.size(); ++i) {
    if (i) joined += ' ';
    joined += out_tokens[i];
  }
  return joined;
}

}  // namespace

int build_vocab(const std::string& src_file, const std::string& tgt_file, int min_freq,
                const std::string& out_dir, std::ostream& out) {
  if (min_freq < 1) throw ConfigError("build-vocab: min_freq must be >= 1");
  fs::create_directories(out_dir);

  auto build_side = [&](const std::string& path, const std::string& name) {
    std::vector<std::string> lines = data::read_lines(path);
    data::Vocab vocab = data::Vocab::build(lines, min_freq);
    vocab.save(out_dir + "/vocab." + name);

    // OOV rate of the trailing 10% under this vocab (tokens mapped to UNK).
    const std::size_t held_start = lines.size() - lines.size() / 10;
    long long held_tokens = 0;
    long long oov = 0;
    for (std::size_t i = held_start; i < lines.size(); ++i) {
      for (const std::string& tok : data::tokenize(lines[i])) {
        ++held_tokens;
        oov += vocab.id_of(tok) == data::kUnkId ? 1 : 0;
      }
    }
    const double rate =
        held_tokens > 0 ? static_cast<double>(oov) / static_cast<double>(held_tokens) : 0.0;
    out << name << ": " << lines.size() << " lines, vocab size " << vocab.size()
        << " (min_freq " << min_freq << "), held-out OOV rate "
        << rate << "\n";
    return vocab.size();
  };

  const int src_size = build_side(src_file, "src");
  const int tgt_size = build_side(tgt_file, "tgt");
  out << "wrote " << out_dir << "/vocab.src (" << src_size << ") and " << out_dir
      << "/vocab.tgt (" << tgt_size << ")\n";
  return kOk;
}

int params(const std::string& config_file, std::ostream& out) {
  RunConfig rc = RunConfig::from_file(config_file);
  rc.validate_for_params();
  TransformerModel model = build_model(rc.to_model_config());
  const ModelConfig& cfg = model.cfg;

  std::size_t embeddings = 0, generator = 0, enc = 0, dec = 0, eau_total = 0, grc_total = 0;
  for (const NamedParam& p : model.named_parameters()) {
    const std::size_t n = p.tensor.numel();
    if (p.name.rfind("src_embedding", 0) == 0 || p.name.rfind("tgt_embedding", 0) == 0) {
      embeddings += n;
    } else if (p.name.rfind("generator", 0) == 0) {
      generator += n;
    } else if (p.name.rfind("encoder.", 0) == 0) {
      enc += n;
    } else if (p.name.rfind("decoder.", 0) == 0) {
      dec += n;
    }
    if (p.name.find(".eau") != std::string::npos) eau_total += n;
    if (p.name.find(".grc") != std::string::npos) grc_total += n;
  }

  out << "variant: " << variant_name(cfg) << "\n";
  out << "l=" << cfg.num_layers << " n=" << cfg.max_seq_len << " k=" << cfg.model_dim
      << " f=" << cfg.ffn_dim << " heads=" << cfg.num_heads
      << " V_src=" << cfg.src_vocab_size << " V_tgt=" << cfg.tgt_vocab_size << "\n";
  out << "total learnable parameters: " << model.count_params() << "\n";
  out << "  embeddings:        " << embeddings << "\n";
  out << "  generator:         " << generator << "\n";
  out << "  encoder layers:    " << enc << " (" << enc / static_cast<std::size_t>(cfg.num_layers)
      << " per layer)\n";
  out << "  decoder layers:    " << dec << " (" << dec / static_cast<std::size_t>(cfg.num_layers)
      << " per layer)\n";
  out << "  eau total:         " << eau_total << "\n";
  out << "  grc total:         " << grc_total << "\n";
  return kOk;
}

int train(const std::string& config_file, std::ostream& out) {
  RunConfig rc = RunConfig::from_file(config_file);
  rc.validate_for_train();

  data::Vocab src_vocab = data::Vocab::load(*rc.src_vocab);
  data::Vocab tgt_vocab = data::Vocab::load(*rc.tgt_vocab);
  if (rc.src_vocab_size && *rc.src_vocab_size != src_vocab.size()) {
    throw ConfigError("config: src_vocab_size " + std::to_string(*rc.src_vocab_size) +
                      " does not match vocab file size " + std::to_string(src_vocab.size()));
  }
  if (rc.tgt_vocab_size && *rc.tgt_vocab_size != tgt_vocab.size()) {
    throw ConfigError("config: tgt_vocab_size " + std::to_string(*rc.tgt_vocab_size) +
                      " does not match vocab file size " + std::to_string(tgt_vocab.size()));
  }
  rc.src_vocab_size = src_vocab.size();
  rc.tgt_vocab_size = tgt_vocab.size();

  std::vector<data::SentencePair> train_pairs = load_pairs(*rc.train_src, *rc.train_tgt);
  std::vector<data::SentencePair> val_pairs = load_pairs(*rc.val_src, *rc.val_tgt);

  const std::string run_dir = rc.resolved_run_dir();
  fs::create_directories(run_dir);

  TransformerModel model = build_model(rc.to_model_config());

  TrainSettings settings;
  settings.adamw = rc.to_adamw_options();
  settings.schedule = rc.to_schedule();
  settings.batch_size = *rc.batch_size;
  settings.max_steps = *rc.max_steps;
  settings.eval_every = rc.eval_every.value_or(100);
  settings.early_stop_acc = rc.early_stop_acc.value_or(0.0);
  settings.grad_clip = rc.grad_clip.value_or(0.0);
  settings.checkpoint_path = rc.checkpoint_path();
  settings.best_checkpoint_path = rc.best_checkpoint_path();

  if (rc.resume_from) {
    LoadedCheckpoint resumed = load_checkpoint(*rc.resume_from);
    nlohmann::json stored = nlohmann::json::parse(resumed.config_json);
    settings.start_step = stored.value("trained_steps", 0ll);
    std::map<std::string, Tensor> loaded;
    for (NamedParam& p : resumed.model.named_parameters()) loaded.emplace(p.name, p.tensor);
    for (NamedParam& p : model.named_parameters()) {
      auto it = loaded.find(p.name);
      if (it == loaded.end() || it->second.shape() != p.tensor.shape()) {
        throw ConfigError("resume: checkpoint " + *rc.resume_from +
                          " does not match the configured model at parameter " + p.name);
      }
      p.tensor.mutable_data() = it->second.data();
    }
    out << "resumed from " << *rc.resume_from << " at step " << settings.start_step << "\n";
  }

  // Echo the effective config so the run can be reproduced from its directory.
  nlohmann::json effective = rc.effective_json();
  {
    std::ofstream cfg_out(run_dir + "/effective_config.json", std::ios::trunc);
    if (!cfg_out) throw IoError("train: cannot write " + run_dir + "/effective_config.json");
    cfg_out << effective.dump(2) << "\n";
  }

  // Checkpoints embed the model config plus enough metadata to resume and
  // translate without the original run config.
  auto checkpoint_blob = [&](long long steps) {
    nlohmann::json j = nlohmann::json::parse(model_config_to_json(model.cfg));
    j["trained_steps"] = steps;
    j["src_vocab"] = *rc.src_vocab;
    j["tgt_vocab"] = *rc.tgt_vocab;
    return j.dump();
  };
  settings.checkpoint_config = checkpoint_blob(settings.max_steps);

  std::ofstream csv(rc.log_path(), std::ios::trunc);
  if (!csv) throw IoError("train: cannot write " + rc.log_path());

  TrainResult result = train_model(model, train_pairs, val_pairs, src_vocab, tgt_vocab,
                                   settings, csv);
  // The blob records how far training actually got (early stop).
  if (result.steps_run != settings.max_steps) {
    save_checkpoint(model, checkpoint_blob(result.steps_run), settings.checkpoint_path);
  }

  out << "trained " << result.steps_run << " steps";
  if (result.dropped_pairs > 0) {
    out << " (dropped " << result.dropped_pairs << " over-length pairs)";
  }
  out << "\n";
  out << "final train_loss " << result.final_train_loss << ", val_loss "
      << result.final_val_loss << ", val_token_acc " << result.final_val_accuracy << "\n";
  out << "checkpoint: " << settings.checkpoint_path << "\n";
  out << "loss log: " << rc.log_path() << "\n";
  return kOk;
}

int translate(const std::string& checkpoint_file, const std::string& input_file,
              const std::string& output_file, std::ostream& out,
              const std::optional<std::string>& src_vocab_override,
              const std::optional<std::string>& tgt_vocab_override) {
  LoadedModel lm = load_model_with_vocabs(checkpoint_file, src_vocab_override,
                                          tgt_vocab_override);
  std::vector<std::string> lines = data::read_lines(input_file);
  std::vector<std::string> outputs;
  outputs.reserve(lines.size());
  for (const std::string& line : lines) outputs.push_back(translate_line(lm, line));
  data::write_lines(output_file, outputs);
  out << "translated " << lines.size() << " lines to " << output_file << "\n";
  return kOk;
}

int evaluate(const std::optional<std::string>& checkpoint_file, const std::string& src_file,
             const std::string& ref_file, std::ostream& out,
             const std::optional<std::string>& src_vocab_override,
             const std::optional<std::string>& tgt_vocab_override) {
  std::vector<std::string> src_lines = data::read_lines(src_file);
  std::vector<std::string> ref_lines = data::read_lines(ref_file);
  if (src_lines.size() != ref_lines.size()) {
    throw ConfigError("evaluate: " + src_file + " has " + std::to_string(src_lines.size()) +
                      " lines but " + ref_file + " has " + std::to_string(ref_lines.size()));
  }

  std::vector<std::vector<std::string>> candidates;
  candidates.reserve(src_lines.size());
  if (checkpoint_file) {
    LoadedModel lm = load_model_with_vocabs(*checkpoint_file, src_vocab_override,
                                            tgt_vocab_override);
    for (const std::string& line : src_lines) {
      candidates.push_back(data::tokenize(translate_line(lm, line)));
    }
  } else {
    for (const std::string& line : src_lines) candidates.push_back(data::tokenize(line));
  }
  std::vector<std::vector<std::string>> references;
  references.reserve(ref_lines.size());
  for (const std::string& line : ref_lines) references.push_back(data::tokenize(line));

  metrics::BleuReport report = metrics::corpus_bleu(candidates, references);
  out << report.to_text();
  return kOk;
}

int gradcheck(const std::string& component, std::uint64_t seed,
              std::optional<double> tolerance, const std::optional<std::string>& json_path,
              std::ostream& out) {
  std::vector<std::string> components;
  if (component == "all") {
    components = verify::gradcheck_component_names();
  } else {
    components = {component};
  }

  nlohmann::json all = nlohmann::json::array();
  bool pass = true;
  for (const std::string& name : components) {
    const double tol = tolerance.value_or(verify::gradcheck_default_tolerance(name));
    verify::GradCheckReport report = verify::gradcheck_component(name, seed, tol);
    out << report.to_text();
    all.push_back(report.to_json());
    pass = pass && report.pass;
  }
  if (json_path) {
    std::ofstream j(*json_path, std::ios::trunc);
    if (!j) throw IoError("gradcheck: cannot write " + *json_path);
    j << all.dump(2) << "\n";
  }
  out << (pass ? "gradcheck: all components passed\n" : "gradcheck: FAILURES above\n");
  return pass ? kOk : kCheckFailed;
}

int run_guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
}

}  // namespace gft::cmd
