#include "gft/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "gft/checkpoint.hpp"
#include "gft/layers.hpp"
#include "gft/ops.hpp"

namespace gft {

namespace {

// Shortest-exact float formatting keeps CSVs byte-stable across runs.
std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

long long nonpad_count(const std::vector<int>& ids, int pad_id) {
  long long n = 0;
  for (int id : ids) n += id != pad_id ? 1 : 0;
  return n;
}

struct BatchForward {
  Tensor loss;        // token-weighted mean over the batch
  long long tokens = 0;
};

BatchForward batch_loss(const TransformerModel& model, const data::Batch& batch,
                        RngStream* dropout_rng) {
  BatchForward result;
  std::vector<Tensor> parts;
  std::vector<long long> weights;
  for (int b = 0; b < batch.size(); ++b) {
    const auto& src = batch.src_ids[static_cast<std::size_t>(b)];
    const auto& tgt_in = batch.tgt_in_ids[static_cast<std::size_t>(b)];
    const auto& tgt_out = batch.tgt_out_ids[static_cast<std::size_t>(b)];
    ForwardMasks masks = make_masks(src, static_cast<int>(tgt_in.size()), data::kPadId);
    Tensor logits = model.forward(src, tgt_in, masks, dropout_rng);
    parts.push_back(label_smoothed_cross_entropy(logits, tgt_out, model.cfg.label_smoothing,
                                                 data::kPadId));
    weights.push_back(nonpad_count(tgt_out, data::kPadId));
    result.tokens += weights.back();
  }
  Tensor total;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    Tensor weighted = ops::scale(
        parts[i], static_cast<double>(weights[i]) / static_cast<double>(result.tokens));
    total = total.defined() ? ops::add(total, weighted) : weighted;
  }
  result.loss = total;
  return result;
}

void clip_gradients(const std::vector<NamedParam>& params, double max_norm) {
  double sq = 0.0;
  for (const NamedParam& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (const NamedParam& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double& g : p.tensor.impl()->grad) g *= factor;
  }
}

}  // namespace

EvalResult evaluate_batches(const TransformerModel& model,
                            const std::vector<data::Batch>& batches) {
  double loss_sum = 0.0;
  long long tokens = 0;
  long long hits = 0;
  for (const data::Batch& batch : batches) {
    for (int b = 0; b < batch.size(); ++b) {
      const auto& src = batch.src_ids[static_cast<std::size_t>(b)];
      const auto& tgt_in = batch.tgt_in_ids[static_cast<std::size_t>(b)];
      const auto& tgt_out = batch.tgt_out_ids[static_cast<std::size_t>(b)];
      ForwardMasks masks = make_masks(src, static_cast<int>(tgt_in.size()), data::kPadId);
      Tensor logits = model.forward(src, tgt_in, masks);
      const long long live = nonpad_count(tgt_out, data::kPadId);
      loss_sum += label_smoothed_cross_entropy(logits, tgt_out, model.cfg.label_smoothing,
                                               data::kPadId)
                      .value() *
                  static_cast<double>(live);
      const int v = logits.dim(1);
      for (int r = 0; r < logits.dim(0); ++r) {
        if (tgt_out[static_cast<std::size_t>(r)] == data::kPadId) continue;
        const std::size_t base = static_cast<std::size_t>(r) * v;
        int best = 0;
        for (int c = 1; c < v; ++c) {
          if (logits.data()[base + c] > logits.data()[base + best]) best = c;
        }
        hits += best == tgt_out[static_cast<std::size_t>(r)] ? 1 : 0;
      }
      tokens += live;
    }
  }
  if (tokens == 0) throw ValueError("evaluate: no non-pad tokens");
  EvalResult r;
  r.loss = loss_sum / static_cast<double>(tokens);
  r.token_accuracy = static_cast<double>(hits) / static_cast<double>(tokens);
  return r;
}

TrainResult train_model(TransformerModel& model,
                        const std::vector<data::SentencePair>& train_pairs,
                        const std::vector<data::SentencePair>& val_pairs,
                        const data::Vocab& src_vocab, const data::Vocab& tgt_vocab,
                        const TrainSettings& settings, std::ostream& csv) {
  const std::uint64_t seed = model.cfg.seed;
  RngStream dropout_rng = rng_stream(seed, "dropout");

  // Validation batches are fixed for the whole run.
  RngStream val_rng = rng_stream(seed, "data-shuffle", ~0ull);
  data::BatchPlan val_plan = data::make_batches(val_pairs, src_vocab, tgt_vocab,
                                                settings.batch_size, model.cfg.max_seq_len,
                                                val_rng);

  AdamW optimizer(model.named_parameters(), settings.adamw);
  const std::vector<NamedParam> params = model.named_parameters();

  csv << "step,lr,train_loss,val_loss,val_token_acc\n";

  TrainResult result;
  double best_val_loss = std::numeric_limits<double>::infinity();
  long long step = settings.start_step;
  std::uint64_t epoch = 0;
  bool stop = false;

  auto save = [&](const std::string& path) {
    if (!path.empty()) save_checkpoint(model, settings.checkpoint_config, path);
  };

  while (!stop && step < settings.max_steps) {
    RngStream shuffle_rng = rng_stream(seed, "data-shuffle", epoch);
    data::BatchPlan plan = data::make_batches(train_pairs, src_vocab, tgt_vocab,
                                              settings.batch_size, model.cfg.max_seq_len,
                                              shuffle_rng);
    if (epoch == 0) result.dropped_pairs = plan.dropped_pairs;

    for (data::Batch& batch : plan.batches) {
      if (step >= settings.max_steps) break;
      ++step;
      const double lr = settings.schedule.lr_at(step);

      Tape tape;
      double train_loss;
      {
        TapeScope scope(tape);
        BatchForward fwd = batch_loss(model, batch, &dropout_rng);
        train_loss = fwd.loss.value();
        tape.backward(fwd.loss);
      }
      if (settings.grad_clip > 0.0) clip_gradients(params, settings.grad_clip);
      optimizer.step(lr);
      optimizer.zero_grad();
      result.final_train_loss = train_loss;

      csv << step << "," << fmt_double(lr) << "," << fmt_double(train_loss);
      const bool eval_now = step % settings.eval_every == 0 || step == settings.max_steps;
      if (eval_now) {
        EvalResult ev = evaluate_batches(model, val_plan.batches);
        csv << "," << fmt_double(ev.loss) << "," << fmt_double(ev.token_accuracy) << "\n";
        result.final_val_loss = ev.loss;
        result.final_val_accuracy = ev.token_accuracy;
        if (ev.loss < best_val_loss) {
          best_val_loss = ev.loss;
          save(settings.best_checkpoint_path);
        }
        if (settings.early_stop_acc > 0.0 && ev.token_accuracy >= settings.early_stop_acc) {
          stop = true;
          break;
        }
      } else {
        csv << ",,\n";
      }
    }
    ++epoch;
  }

  result.steps_run = step;
  save(settings.checkpoint_path);
  return result;
}

}  // namespace gft
