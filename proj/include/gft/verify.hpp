#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gft/tensor.hpp"

namespace gft::verify {

/// Central-difference gradient of a scalar function: per coordinate
/// (f(x + h e_i) - f(x - h e_i)) / 2h. f must be deterministic and is
/// evaluated without any tape.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

struct GradCheckEntry {
  std::string name;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  double max_rel_err = 0.0;  // |a - n| / max(|a|, |n|, 1e-12), worst coordinate
  bool pass = false;
};

struct GradCheckReport {
  std::string component;
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  double h = 1e-5;
  std::vector<GradCheckEntry> entries;
  bool pass = false;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Components with micro dimensions small enough for exhaustive
/// per-coordinate differencing: eau, grc, mha, layer_norm, ffn, and
/// full_micro_model (l=1, k=4, f=8, heads=2, V=11, seq=3, both variants on).
const std::vector<std::string>& gradcheck_component_names();

/// Default tolerance for a component: 1e-4 for full_micro_model, else 1e-5.
double gradcheck_default_tolerance(const std::string& component);

/// Compares tape gradients against the finite-difference oracle for every
/// parameter tensor and the input. Probe points that land a ReLU
/// pre-activation within 1e-6 of zero are resampled. A failing component
/// yields pass=false, not an exception.
GradCheckReport gradcheck_component(const std::string& component, std::uint64_t seed,
                                    double tolerance);

}  // namespace gft::verify
