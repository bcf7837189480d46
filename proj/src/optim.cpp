#include "gft/optim.hpp"

#include <cmath>

namespace gft {

bool decay_applies(const std::string& param_name) {
  const auto dot = param_name.rfind('.');
  const std::string leaf = dot == std::string::npos ? param_name : param_name.substr(dot + 1);
  // b1/b2/b3/bg are the eau and grc bias vectors.
  return !(leaf == "bias" || leaf == "gamma" || leaf == "beta" || leaf == "b1" ||
           leaf == "b2" || leaf == "b3" || leaf == "bg");
}

AdamW::AdamW(std::vector<NamedParam> params, AdamWOptions opts) : opts_(opts) {
  slots_.reserve(params.size());
  for (NamedParam& p : params) {
    Slot slot;
    slot.m.assign(p.tensor.numel(), 0.0);
    slot.v.assign(p.tensor.numel(), 0.0);
    slot.decay = opts_.decay_all || decay_applies(p.name);
    slot.param = std::move(p);
    slots_.push_back(std::move(slot));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (Slot& slot : slots_) {
    Tensor& theta = slot.param.tensor;
    if (!theta.has_grad()) {
      throw ValueError("adamw: no gradient for parameter " + slot.param.name);
    }
    const std::vector<double>& g = theta.grad();
    auto& data = theta.mutable_data();
    const double wd = slot.decay ? opts_.weight_decay : 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw ValueError("adamw: non-finite gradient in parameter " + slot.param.name);
      }
      slot.m[i] = opts_.beta1 * slot.m[i] + (1.0 - opts_.beta1) * g[i];
      slot.v[i] = opts_.beta2 * slot.v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      const double m_hat = slot.m[i] / bc1;
      const double v_hat = slot.v[i] / bc2;
      data[i] -= lr * (m_hat / (std::sqrt(v_hat) + opts_.epsilon) + wd * data[i]);
    }
  }
}

void AdamW::zero_grad() {
  for (Slot& slot : slots_) slot.param.tensor.zero_grad();
}

double LRSchedule::lr_at(long long t) const {
  if (t < 1) throw ValueError("lr_at: step must be >= 1");
  if (kind == ScheduleKind::kConstant) return peak_lr;
  if (warmup_steps < 1) throw ValueError("lr_at: warmup schedule requires warmup_steps >= 1");
  const double td = static_cast<double>(t);
  const double wd = static_cast<double>(warmup_steps);
  if (t <= warmup_steps) return peak_lr * td / wd;
  return peak_lr * std::sqrt(wd / td);
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::kConstant;
  if (s == "warmup_inv_sqrt") return ScheduleKind::kWarmupInvSqrt;
  throw ConfigError("schedule: unknown kind \"" + s +
                    "\" (expected constant or warmup_inv_sqrt)");
}

std::string schedule_kind_to_string(ScheduleKind k) {
  return k == ScheduleKind::kConstant ? "constant" : "warmup_inv_sqrt";
}

}  // namespace gft
