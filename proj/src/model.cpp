#include "gft/model.hpp"

#include <cmath>

#include "gft/ops.hpp"

namespace gft {

void ModelConfig::validate_and_resolve() {
  if (num_layers <= 0) throw ConfigError("model: num_layers must be positive");
  if (max_seq_len <= 0) throw ConfigError("model: max_seq_len must be positive");
  if (model_dim <= 0) throw ConfigError("model: model_dim must be positive");
  if (ffn_dim <= 0) throw ConfigError("model: ffn_dim must be positive");
  if (src_vocab_size <= 0 || tgt_vocab_size <= 0) {
    throw ConfigError("model: vocab sizes must be positive");
  }
  if (use_eau && model_dim % 2 != 0) {
    throw ConfigError("model: model_dim must be even when use_eau is set, got " +
                      std::to_string(model_dim));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw ConfigError("model: label_smoothing must be in [0, 1)");
  }
  if (num_heads == 0) num_heads = model_dim >= 256 ? 8 : 4;
  if (num_heads <= 0 || model_dim % num_heads != 0) {
    throw ConfigError("model: num_heads " + std::to_string(num_heads) +
                      " must divide model_dim " + std::to_string(model_dim));
  }
}

ForwardMasks make_masks(const std::vector<int>& src_ids, int tgt_len, int pad_id) {
  const int s = static_cast<int>(src_ids.size());
  ForwardMasks m;
  m.enc_self = BoolMat(s, s, false);
  for (int q = 0; q < s; ++q)
    for (int j = 0; j < s; ++j) m.enc_self.set(q, j, src_ids[j] != pad_id);
  m.dec_self = BoolMat::causal(tgt_len);
  m.dec_cross = BoolMat(tgt_len, s, false);
  for (int q = 0; q < tgt_len; ++q)
    for (int j = 0; j < s; ++j) m.dec_cross.set(q, j, src_ids[j] != pad_id);
  return m;
}

TransformerModel build_model(const ModelConfig& cfg_in) {
  ModelConfig cfg = cfg_in;
  cfg.validate_and_resolve();

  TransformerModel model;
  model.cfg = cfg;
  RngStream rng = rng_stream(cfg.seed, "init");

  const int k = cfg.model_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  auto init_embedding = [&](int vocab) {
    Tensor e = Tensor::zeros({vocab, k}, /*requires_grad=*/true);
    for (double& x : e.mutable_data()) x = rng.uniform(-bound, bound);
    return e;
  };
  model.src_embedding = init_embedding(cfg.src_vocab_size);
  model.tgt_embedding = init_embedding(cfg.tgt_vocab_size);
  model.positional = SinusoidalPositionalEncoding::make(cfg.max_seq_len, k);

  for (int i = 0; i < cfg.num_layers; ++i) {
    EncoderLayer layer;
    layer.self_attn = MultiHeadAttention::init(k, cfg.num_heads, rng);
    if (cfg.use_eau) layer.eau = EvaluatorAdjusterUnit::init(k, rng);
    if (cfg.use_grc) layer.grc1 = GatedResidualConnection::init(k, rng, cfg.gate_bias_init);
    layer.norm1 = LayerNormLayer::init(k, cfg.layer_norm_eps);
    layer.ffn = FeedForward::init(k, cfg.ffn_dim, rng);
    if (cfg.use_grc) layer.grc2 = GatedResidualConnection::init(k, rng, cfg.gate_bias_init);
    layer.norm2 = LayerNormLayer::init(k, cfg.layer_norm_eps);
    model.encoder.push_back(std::move(layer));
  }
  for (int i = 0; i < cfg.num_layers; ++i) {
    DecoderLayer layer;
    layer.self_attn = MultiHeadAttention::init(k, cfg.num_heads, rng);
    if (cfg.use_eau) layer.eau1 = EvaluatorAdjusterUnit::init(k, rng);
    if (cfg.use_grc) layer.grc1 = GatedResidualConnection::init(k, rng, cfg.gate_bias_init);
    layer.norm1 = LayerNormLayer::init(k, cfg.layer_norm_eps);
    layer.cross_attn = MultiHeadAttention::init(k, cfg.num_heads, rng);
    if (cfg.use_eau) layer.eau2 = EvaluatorAdjusterUnit::init(k, rng);
    if (cfg.use_grc) layer.grc2 = GatedResidualConnection::init(k, rng, cfg.gate_bias_init);
    layer.norm2 = LayerNormLayer::init(k, cfg.layer_norm_eps);
    layer.ffn = FeedForward::init(k, cfg.ffn_dim, rng);
    if (cfg.use_grc) layer.grc3 = GatedResidualConnection::init(k, rng, cfg.gate_bias_init);
    layer.norm3 = LayerNormLayer::init(k, cfg.layer_norm_eps);
    model.decoder.push_back(std::move(layer));
  }
  model.generator = LinearLayer::init(cfg.tgt_vocab_size, k, rng);
  return model;
}

namespace {

// Sublayer output -> optional EAU -> dropout -> (gated) residual add -> norm.
Tensor close_sublayer(const Tensor& residual, Tensor s,
                      const std::optional<EvaluatorAdjusterUnit>& eau,
                      const std::optional<GatedResidualConnection>& grc,
                      const LayerNormLayer& norm, double rate, RngStream* rng) {
  if (eau) s = eau->forward(s);
  s = ops::dropout(s, rate, rng);
  Tensor added = grc ? grc->forward(residual, s) : ops::add(residual, s);
  return norm.forward(added);
}

}  // namespace

Tensor TransformerModel::encode(const std::vector<int>& src_ids, const BoolMat& self_keep,
                                RngStream* dropout_rng) const {
  if (static_cast<int>(src_ids.size()) > cfg.max_seq_len) {
    throw ShapeError("encode: sequence length " + std::to_string(src_ids.size()) +
                     " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  const double rate = dropout_rng ? cfg.dropout : 0.0;
  Tensor x = ops::gather_rows(src_embedding, src_ids);
  if (cfg.scale_embeddings) x = ops::scale(x, std::sqrt(static_cast<double>(cfg.model_dim)));
  x = ops::add(x, positional.prefix(static_cast<int>(src_ids.size())));
  x = ops::dropout(x, rate, dropout_rng);
  for (const EncoderLayer& layer : encoder) {
    Tensor s = layer.self_attn.forward(x, x, x, &self_keep, rate, dropout_rng);
    x = close_sublayer(x, std::move(s), layer.eau, layer.grc1, layer.norm1, rate, dropout_rng);
    Tensor f = layer.ffn.forward(x);
    x = close_sublayer(x, std::move(f), std::nullopt, layer.grc2, layer.norm2, rate,
                       dropout_rng);
  }
  return x;
}

Tensor TransformerModel::decode(const std::vector<int>& tgt_in_ids, const Tensor& enc_out,
                                const BoolMat& self_keep, const BoolMat& cross_keep,
                                RngStream* dropout_rng) const {
  if (static_cast<int>(tgt_in_ids.size()) > cfg.max_seq_len) {
    throw ShapeError("decode: sequence length " + std::to_string(tgt_in_ids.size()) +
                     " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  const double rate = dropout_rng ? cfg.dropout : 0.0;
  Tensor x = ops::gather_rows(tgt_embedding, tgt_in_ids);
  if (cfg.scale_embeddings) x = ops::scale(x, std::sqrt(static_cast<double>(cfg.model_dim)));
  x = ops::add(x, positional.prefix(static_cast<int>(tgt_in_ids.size())));
  x = ops::dropout(x, rate, dropout_rng);
  for (const DecoderLayer& layer : decoder) {
    Tensor s = layer.self_attn.forward(x, x, x, &self_keep, rate, dropout_rng);
    x = close_sublayer(x, std::move(s), layer.eau1, layer.grc1, layer.norm1, rate, dropout_rng);
    Tensor c = layer.cross_attn.forward(x, enc_out, enc_out, &cross_keep, rate, dropout_rng);
    x = close_sublayer(x, std::move(c), layer.eau2, layer.grc2, layer.norm2, rate, dropout_rng);
    Tensor f = layer.ffn.forward(x);
    x = close_sublayer(x, std::move(f), std::nullopt, layer.grc3, layer.norm3, rate,
                       dropout_rng);
  }
  return generator.forward(x);
}

Tensor TransformerModel::forward(const std::vector<int>& src_ids,
                                 const std::vector<int>& tgt_in_ids, const ForwardMasks& masks,
                                 RngStream* dropout_rng) const {
  Tensor enc_out = encode(src_ids, masks.enc_self, dropout_rng);
  return decode(tgt_in_ids, enc_out, masks.dec_self, masks.dec_cross, dropout_rng);
}

std::vector<int> TransformerModel::greedy_decode(const std::vector<int>& src_ids, int max_len,
                                                 int bos_id, int eos_id, int pad_id) const {
  if (max_len > cfg.max_seq_len) {
    throw ShapeError("greedy_decode: max_len " + std::to_string(max_len) +
                     " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  ForwardMasks masks = make_masks(src_ids, 1, pad_id);
  Tensor enc_out = encode(src_ids, masks.enc_self);

  std::vector<int> prefix = {bos_id};
  std::vector<int> out;
  for (int step = 0; step < max_len; ++step) {
    const int t = static_cast<int>(prefix.size());
    BoolMat causal = BoolMat::causal(t);
    BoolMat cross(t, static_cast<int>(src_ids.size()), false);
    for (int q = 0; q < t; ++q)
      for (int j = 0; j < static_cast<int>(src_ids.size()); ++j)
        cross.set(q, j, src_ids[j] != pad_id);
    Tensor logits = decode(prefix, enc_out, causal, cross);
    const int v = logits.dim(1);
    const std::size_t base = static_cast<std::size_t>(t - 1) * v;
    int best = 0;
    double best_val = logits.data()[base];
    for (int c = 1; c < v; ++c) {
      if (logits.data()[base + c] > best_val) {
        best_val = logits.data()[base + c];
        best = c;
      }
    }
    out.push_back(best);
    prefix.push_back(best);
    if (best == eos_id) break;
  }
  return out;
}

namespace {

void add_linear(std::vector<NamedParam>& out, const std::string& prefix,
                const LinearLayer& lin) {
  out.push_back({prefix + ".weight", lin.weight});
  out.push_back({prefix + ".bias", lin.bias});
}

void add_attention(std::vector<NamedParam>& out, const std::string& prefix,
                   const MultiHeadAttention& mha) {
  add_linear(out, prefix + ".wq", mha.wq);
  add_linear(out, prefix + ".wk", mha.wk);
  add_linear(out, prefix + ".wv", mha.wv);
  add_linear(out, prefix + ".wo", mha.wo);
}

void add_eau(std::vector<NamedParam>& out, const std::string& prefix,
             const EvaluatorAdjusterUnit& u) {
  out.push_back({prefix + ".w1", u.w1});
  out.push_back({prefix + ".b1", u.b1});
  out.push_back({prefix + ".w2", u.w2});
  out.push_back({prefix + ".b2", u.b2});
  out.push_back({prefix + ".w3", u.w3});
  out.push_back({prefix + ".b3", u.b3});
}

void add_grc(std::vector<NamedParam>& out, const std::string& prefix,
             const GatedResidualConnection& g) {
  out.push_back({prefix + ".wg", g.wg});
  out.push_back({prefix + ".bg", g.bg});
}

void add_norm(std::vector<NamedParam>& out, const std::string& prefix,
              const LayerNormLayer& n) {
  out.push_back({prefix + ".gamma", n.gamma});
  out.push_back({prefix + ".beta", n.beta});
}

}  // namespace

std::vector<NamedParam> TransformerModel::named_parameters() const {
  std::vector<NamedParam> out;
  out.push_back({"src_embedding", src_embedding});
  out.push_back({"tgt_embedding", tgt_embedding});
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const std::string p = "encoder." + std::to_string(i);
    const EncoderLayer& l = encoder[i];
    add_attention(out, p + ".self_attn", l.self_attn);
    if (l.eau) add_eau(out, p + ".eau", *l.eau);
    if (l.grc1) add_grc(out, p + ".grc1", *l.grc1);
    add_norm(out, p + ".norm1", l.norm1);
    add_linear(out, p + ".ffn.lin1", l.ffn.lin1);
    add_linear(out, p + ".ffn.lin2", l.ffn.lin2);
    if (l.grc2) add_grc(out, p + ".grc2", *l.grc2);
    add_norm(out, p + ".norm2", l.norm2);
  }
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    const std::string p = "decoder." + std::to_string(i);
    const DecoderLayer& l = decoder[i];
    add_attention(out, p + ".self_attn", l.self_attn);
    if (l.eau1) add_eau(out, p + ".eau1", *l.eau1);
    if (l.grc1) add_grc(out, p + ".grc1", *l.grc1);
    add_norm(out, p + ".norm1", l.norm1);
    add_attention(out, p + ".cross_attn", l.cross_attn);
    if (l.eau2) add_eau(out, p + ".eau2", *l.eau2);
    if (l.grc2) add_grc(out, p + ".grc2", *l.grc2);
    add_norm(out, p + ".norm2", l.norm2);
    add_linear(out, p + ".ffn.lin1", l.ffn.lin1);
    add_linear(out, p + ".ffn.lin2", l.ffn.lin2);
    if (l.grc3) add_grc(out, p + ".grc3", *l.grc3);
    add_norm(out, p + ".norm3", l.norm3);
  }
  add_linear(out, "generator", generator);
  return out;
}

std::size_t TransformerModel::count_params() const {
  std::size_t total = 0;
  for (const NamedParam& p : named_parameters()) total += p.tensor.numel();
  return total;
}

void TransformerModel::set_force_gates_open(bool open) {
  for (EncoderLayer& l : encoder) {
    if (l.grc1) l.grc1->force_open = open;
    if (l.grc2) l.grc2->force_open = open;
  }
  for (DecoderLayer& l : decoder) {
    if (l.grc1) l.grc1->force_open = open;
    if (l.grc2) l.grc2->force_open = open;
    if (l.grc3) l.grc3->force_open = open;
  }
}

}  // namespace gft
