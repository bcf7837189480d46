#include "gft/verify.hpp"

#include <cmath>
#include <sstream>

#include "gft/data.hpp"
#include "gft/eau.hpp"
#include "gft/grc.hpp"
#include "gft/layers.hpp"
#include "gft/model.hpp"
#include "gft/ops.hpp"

namespace gft::verify {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
  if (h <= 0.0) throw ValueError("finite_diff_grad: h must be positive");
  Tensor probe = Tensor::from(x.shape(), x.data());
  Tensor grad = Tensor::zeros(x.shape());
  auto& pv = probe.mutable_data();
  auto& gv = grad.mutable_data();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double saved = pv[i];
    pv[i] = saved + h;
    const double up = f(probe);
    pv[i] = saved - h;
    const double down = f(probe);
    pv[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw ValueError("finite_diff_grad: non-finite evaluation at coordinate " +
                       std::to_string(i));
    }
    gv[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

namespace {

constexpr double kKinkThreshold = 1e-6;
constexpr int kMaxResamples = 100;

void randomize(Tensor& t, RngStream& rng, double lo, double hi) {
  for (double& x : t.mutable_data()) x = rng.uniform(lo, hi);
}

Tensor random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = false) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  randomize(t, rng, lo, hi);
  return t;
}

// Loss used for layer-level checks: sum(out (*) C) with fixed random C, so
// every output coordinate influences the scalar with a distinct weight.
std::function<Tensor(const Tensor&)> weighted_sum(const Tensor& coeffs) {
  return [coeffs](const Tensor& out) { return ops::sum(ops::mul(out, coeffs)); };
}

struct CheckCase {
  std::vector<NamedParam> tensors;   // every tensor the oracle differentiates
  std::function<Tensor()> forward;   // rebuilds the loss from current values
};

CheckCase make_eau_case(RngStream& rng) {
  const int k = 4;
  const int rows = 3;
  auto unit = EvaluatorAdjusterUnit::init(k, rng);
  randomize(unit.b1, rng, -0.5, 0.5);
  randomize(unit.b2, rng, -0.5, 0.5);
  randomize(unit.b3, rng, -0.5, 0.5);
  Tensor x = random_tensor({rows, k}, rng, -1.0, 1.0, /*requires_grad=*/true);
  Tensor c = random_tensor({rows, k}, rng);
  auto loss_of = weighted_sum(c);
  CheckCase cc;
  cc.tensors = {{"w1", unit.w1}, {"b1", unit.b1}, {"w2", unit.w2},
                {"b2", unit.b2}, {"w3", unit.w3}, {"b3", unit.b3},
                {"input", x}};
  cc.forward = [unit, x, loss_of] { return loss_of(unit.forward(x)); };
  return cc;
}

CheckCase make_grc_case(RngStream& rng) {
  const int k = 4;
  const int rows = 3;
  auto gate = GatedResidualConnection::init(k, rng);
  randomize(gate.bg, rng, -0.5, 0.5);
  Tensor r = random_tensor({rows, k}, rng, -1.0, 1.0, true);
  Tensor s = random_tensor({rows, k}, rng, -1.0, 1.0, true);
  Tensor c = random_tensor({rows, k}, rng);
  auto loss_of = weighted_sum(c);
  CheckCase cc;
  cc.tensors = {{"wg", gate.wg}, {"bg", gate.bg}, {"residual", r}, {"sublayer", s}};
  cc.forward = [gate, r, s, loss_of] { return loss_of(gate.forward(r, s)); };
  return cc;
}

CheckCase make_mha_case(RngStream& rng) {
  const int k = 8;
  const int seq = 3;
  auto mha = MultiHeadAttention::init(k, 2, rng);
  randomize(mha.wq.bias, rng, -0.3, 0.3);
  randomize(mha.wk.bias, rng, -0.3, 0.3);
  randomize(mha.wv.bias, rng, -0.3, 0.3);
  randomize(mha.wo.bias, rng, -0.3, 0.3);
  Tensor x = random_tensor({seq, k}, rng, -1.0, 1.0, true);
  Tensor c = random_tensor({seq, k}, rng);
  auto loss_of = weighted_sum(c);
  CheckCase cc;
  cc.tensors = {{"wq.weight", mha.wq.weight}, {"wq.bias", mha.wq.bias},
                {"wk.weight", mha.wk.weight}, {"wk.bias", mha.wk.bias},
                {"wv.weight", mha.wv.weight}, {"wv.bias", mha.wv.bias},
                {"wo.weight", mha.wo.weight}, {"wo.bias", mha.wo.bias},
                {"input", x}};
  cc.forward = [mha, x, loss_of] { return loss_of(mha.forward(x, x, x)); };
  return cc;
}

CheckCase make_layer_norm_case(RngStream& rng) {
  const int k = 5;
  const int rows = 3;
  auto norm = LayerNormLayer::init(k);
  randomize(norm.gamma, rng, 0.5, 1.5);
  randomize(norm.beta, rng, -0.5, 0.5);
  Tensor x = random_tensor({rows, k}, rng, -1.0, 1.0, true);
  Tensor c = random_tensor({rows, k}, rng);
  auto loss_of = weighted_sum(c);
  CheckCase cc;
  cc.tensors = {{"gamma", norm.gamma}, {"beta", norm.beta}, {"input", x}};
  cc.forward = [norm, x, loss_of] { return loss_of(norm.forward(x)); };
  return cc;
}

CheckCase make_ffn_case(RngStream& rng) {
  const int k = 4;
  const int f = 8;
  const int rows = 3;
  auto ffn = FeedForward::init(k, f, rng);
  randomize(ffn.lin1.bias, rng, -0.5, 0.5);
  randomize(ffn.lin2.bias, rng, -0.5, 0.5);
  Tensor x = random_tensor({rows, k}, rng, -1.0, 1.0, true);
  Tensor c = random_tensor({rows, k}, rng);
  auto loss_of = weighted_sum(c);
  CheckCase cc;
  cc.tensors = {{"lin1.weight", ffn.lin1.weight}, {"lin1.bias", ffn.lin1.bias},
                {"lin2.weight", ffn.lin2.weight}, {"lin2.bias", ffn.lin2.bias},
                {"input", x}};
  cc.forward = [ffn, x, loss_of] { return loss_of(ffn.forward(x)); };
  return cc;
}

CheckCase make_full_model_case(RngStream& rng) {
  ModelConfig cfg;
  cfg.num_layers = 1;
  cfg.max_seq_len = 8;
  cfg.model_dim = 4;
  cfg.ffn_dim = 8;
  cfg.num_heads = 2;
  cfg.dropout = 0.0;
  cfg.use_eau = true;
  cfg.use_grc = true;
  cfg.src_vocab_size = 11;
  cfg.tgt_vocab_size = 11;
  cfg.label_smoothing = 0.1;
  cfg.seed = rng.next_u64();
  auto model = std::make_shared<TransformerModel>(build_model(cfg));
  for (NamedParam& p : model->named_parameters()) {
    const auto dot = p.name.rfind('.');
    const std::string leaf = dot == std::string::npos ? p.name : p.name.substr(dot + 1);
    if (leaf == "gamma") continue;  // keep norms near identity scale
    if (leaf == "bias" || leaf == "beta" || leaf == "b1" || leaf == "b2" || leaf == "b3" ||
        leaf == "bg") {
      randomize(p.tensor, rng, -0.3, 0.3);
    }
  }

  const int seq = 3;
  std::vector<int> src_ids, tgt_full;
  for (int i = 0; i < seq; ++i) src_ids.push_back(4 + rng.uniform_int(7));
  tgt_full.push_back(data::kBosId);
  for (int i = 0; i < seq - 1; ++i) tgt_full.push_back(4 + rng.uniform_int(7));
  tgt_full.push_back(data::kEosId);
  std::vector<int> tgt_in(tgt_full.begin(), tgt_full.end() - 1);
  std::vector<int> tgt_out(tgt_full.begin() + 1, tgt_full.end());

  ForwardMasks masks = make_masks(src_ids, static_cast<int>(tgt_in.size()), /*pad_id=*/0);
  CheckCase cc;
  cc.tensors = model->named_parameters();
  cc.forward = [model, src_ids, tgt_in, tgt_out, masks] {
    Tensor logits = model->forward(src_ids, tgt_in, masks);
    return label_smoothed_cross_entropy(logits, tgt_out, 0.1, /*pad_id=*/0);
  };
  return cc;
}

CheckCase make_case(const std::string& component, RngStream& rng) {
  if (component == "eau") return make_eau_case(rng);
  if (component == "grc") return make_grc_case(rng);
  if (component == "mha") return make_mha_case(rng);
  if (component == "layer_norm") return make_layer_norm_case(rng);
  if (component == "ffn") return make_ffn_case(rng);
  if (component == "full_micro_model") return make_full_model_case(rng);
  throw ValueError("gradcheck: unknown component \"" + component + "\"");
}

double l2_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

const std::vector<std::string>& gradcheck_component_names() {
  static const std::vector<std::string> names = {"eau",        "grc", "mha",
                                                 "layer_norm", "ffn", "full_micro_model"};
  return names;
}

double gradcheck_default_tolerance(const std::string& component) {
  return component == "full_micro_model" ? 1e-4 : 1e-5;
}

GradCheckReport gradcheck_component(const std::string& component, std::uint64_t seed,
                                    double tolerance) {
  GradCheckReport report;
  report.component = component;
  report.seed = seed;
  report.tolerance = tolerance;

  // Resample until no ReLU pre-activation sits on the kink.
  CheckCase cc;
  bool found = false;
  for (int attempt = 0; attempt < kMaxResamples && !found; ++attempt) {
    RngStream rng = rng_stream(seed, "gradcheck", static_cast<std::uint64_t>(attempt));
    cc = make_case(component, rng);
    ops::KinkGuard guard;
    cc.forward();
    found = guard.min_abs() >= kKinkThreshold;
  }
  if (!found) {
    throw ValueError("gradcheck: could not find a kink-free probe point for " + component);
  }

  // Analytic gradients from one taped forward/backward.
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = cc.forward();
    tape.backward(loss);
    for (const NamedParam& p : cc.tensors) {
      analytic.push_back(p.tensor.has_grad() ? p.tensor.grad()
                                             : std::vector<double>(p.tensor.numel(), 0.0));
    }
  }

  report.pass = true;
  for (std::size_t t = 0; t < cc.tensors.size(); ++t) {
    const NamedParam& p = cc.tensors[t];
    auto& data = p.tensor.impl()->data;
    std::vector<double> numeric(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + report.h;
      const double up = cc.forward().value();
      data[i] = saved - report.h;
      const double down = cc.forward().value();
      data[i] = saved;
      numeric[i] = (up - down) / (2.0 * report.h);
    }

    GradCheckEntry entry;
    entry.name = p.name;
    entry.analytic_norm = l2_norm(analytic[t]);
    entry.numeric_norm = l2_norm(numeric);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double a = analytic[t][i];
      const double n = numeric[i];
      const double denom = std::max({std::abs(a), std::abs(n), 1e-12});
      entry.max_rel_err = std::max(entry.max_rel_err, std::abs(a - n) / denom);
    }
    entry.pass = entry.max_rel_err < tolerance;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::string GradCheckReport::to_text() const {
  std::ostringstream os;
  os << "gradcheck component=" << component << " seed=" << seed << " tolerance=" << tolerance
     << " h=" << h << "\n";
  for (const GradCheckEntry& e : entries) {
    os << "  " << (e.pass ? "PASS" : "FAIL") << " " << e.name
       << " max_rel_err=" << e.max_rel_err << " analytic_norm=" << e.analytic_norm
       << " numeric_norm=" << e.numeric_norm << "\n";
  }
  os << (pass ? "PASS" : "FAIL") << " " << component << "\n";
  return os.str();
}

nlohmann::json GradCheckReport::to_json() const {
  nlohmann::json j;
  j["component"] = component;
  j["seed"] = seed;
  j["tolerance"] = tolerance;
  j["h"] = h;
  j["pass"] = pass;
  j["entries"] = nlohmann::json::array();
  for (const GradCheckEntry& e : entries) {
    j["entries"].push_back({{"name", e.name},
                            {"analytic_norm", e.analytic_norm},
                            {"numeric_norm", e.numeric_norm},
                            {"max_rel_err", e.max_rel_err},
                            {"pass", e.pass}});
  }
  return j;
}

}  // namespace gft::verify
