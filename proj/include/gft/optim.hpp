#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gft/model.hpp"
#include "gft/rng.hpp"
#include "gft/tensor.hpp"

namespace gft {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  /// When false, biases and LayerNorm gamma/beta are exempt from decay.
  bool decay_all = false;
};

/// AdamW with decoupled weight decay:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
class AdamW {
 public:
  AdamW(std::vector<NamedParam> params, AdamWOptions opts);

  /// One update over every parameter; grads must be populated and finite.
  void step(double lr);
  void zero_grad();
  long long step_count() const { return t_; }

 private:
  struct Slot {
    NamedParam param;
    std::vector<double> m, v;
    bool decay;
  };
  std::vector<Slot> slots_;
  AdamWOptions opts_;
  long long t_ = 0;
};

/// Whether decoupled weight decay applies to a parameter under the default
/// policy (everything except biases and LayerNorm gamma/beta).
bool decay_applies(const std::string& param_name);

enum class ScheduleKind { kConstant, kWarmupInvSqrt };

struct LRSchedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double peak_lr = 0.0;
  long long warmup_steps = 0;

  /// Learning rate at step t (1-based): linear warmup to peak over
  /// warmup_steps, then peak * sqrt(warmup_steps / t).
  double lr_at(long long t) const;
};

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string schedule_kind_to_string(ScheduleKind k);

}  // namespace gft
