#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "gft/config.hpp"
#include "gft/data.hpp"
#include "gft/model.hpp"
#include "gft/optim.hpp"

namespace gft {

struct EvalResult {
  double loss = 0.0;
  double token_accuracy = 0.0;
};

/// Teacher-forced loss/accuracy over a batch list, dropout off.
EvalResult evaluate_batches(const TransformerModel& model,
                            const std::vector<data::Batch>& batches);

struct TrainSettings {
  AdamWOptions adamw;
  LRSchedule schedule;
  int batch_size = 0;
  long long max_steps = 0;
  long long eval_every = 100;
  double early_stop_acc = 0.0;  // stop once val accuracy reaches this; 0 = off
  double grad_clip = 0.0;       // global-norm clip; 0 = off
  long long start_step = 0;     // nonzero when resuming
  std::string checkpoint_path;
  std::string best_checkpoint_path;
  std::string checkpoint_config;  // JSON blob embedded in checkpoints
};

struct TrainResult {
  long long steps_run = 0;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  double final_val_accuracy = 0.0;
  std::size_t dropped_pairs = 0;
};

/// Deterministic training loop: per-step tape, AdamW update, CSV rows
/// "step,lr,train_loss,val_loss,val_token_acc" (validation columns filled on
/// eval steps only). Saves the best-validation-loss and final checkpoints
/// when paths are set.
TrainResult train_model(TransformerModel& model, const std::vector<data::SentencePair>& train_pairs,
                        const std::vector<data::SentencePair>& val_pairs,
                        const data::Vocab& src_vocab, const data::Vocab& tgt_vocab,
                        const TrainSettings& settings, std::ostream& csv);

}  // namespace gft
