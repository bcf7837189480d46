#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "gft/model.hpp"
#include "gft/optim.hpp"

namespace gft {

/// Full run configuration. Paper-relevant hyperparameters (dimensions,
/// variant flags, betas, weight decay, learning rate, warmup, smoothing,
/// dropout, seed) have no silent defaults: commands that use them require
/// them to be present in the file. Unknown keys are rejected.
struct RunConfig {
  // model
  std::optional<int> num_layers, max_seq_len, model_dim, ffn_dim;
  std::optional<int> num_heads;
  std::optional<double> dropout, label_smoothing;
  std::optional<bool> use_eau, use_grc;
  std::optional<std::uint64_t> seed;
  std::optional<int> src_vocab_size, tgt_vocab_size;
  std::optional<double> layer_norm_eps;   // default 1e-5
  std::optional<double> gate_bias_init;   // default 0
  std::optional<bool> scale_embeddings;   // default true

  // optimizer / schedule
  std::optional<double> beta1, beta2, weight_decay;
  std::optional<double> adam_epsilon;     // default 1e-8
  std::optional<bool> decay_all;          // default false
  std::optional<double> grad_clip;        // default 0 (off)
  std::optional<std::string> schedule;
  std::optional<double> peak_lr;
  std::optional<long long> warmup_steps;

  // run
  std::optional<int> batch_size;
  std::optional<long long> max_steps;
  std::optional<long long> eval_every;    // default 100
  std::optional<double> early_stop_acc;   // default off
  std::optional<std::string> run_dir;     // default "."; env GFT_RUN_DIR overrides
  std::optional<std::string> checkpoint;  // default checkpoint.gftc under run_dir
  std::optional<std::string> log;         // default loss.csv under run_dir
  std::optional<std::string> resume_from;
  std::optional<std::string> train_src, train_tgt, val_src, val_tgt;
  std::optional<std::string> src_vocab, tgt_vocab;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::string& path);

  /// Structural + training fields present and coherent.
  void validate_for_train() const;
  /// Fields needed to build a model and count parameters.
  void validate_for_params() const;

  ModelConfig to_model_config() const;
  AdamWOptions to_adamw_options() const;
  LRSchedule to_schedule() const;

  /// Every effective field (defaults resolved) as JSON; reloading this
  /// reproduces the run.
  nlohmann::json effective_json() const;

  /// run_dir after the GFT_RUN_DIR environment override.
  std::string resolved_run_dir() const;
  std::string checkpoint_path() const;   // absolute-or-run_dir-relative resolved
  std::string best_checkpoint_path() const;
  std::string log_path() const;
};

}  // namespace gft
