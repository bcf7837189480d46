#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gft/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gft: encoder-decoder transformers with evaluator-adjuster units and gated residual connections"};
  app.require_subcommand(1);

  // build-vocab
  std::string bv_src, bv_tgt, bv_out_dir = "vocab";
  int bv_min_freq = 2;
  auto* bv = app.add_subcommand("build-vocab", "Build vocabulary files from a parallel corpus");
  bv->add_option("--src", bv_src, "Source-language text file")->required();
  bv->add_option("--tgt", bv_tgt, "Target-language text file")->required();
  bv->add_option("--min-freq", bv_min_freq, "Minimum token frequency (default 2)");
  bv->add_option("--out-dir", bv_out_dir, "Output directory (default vocab)");

  // train
  std::string train_config;
  auto* tr = app.add_subcommand("train", "Train a model from a JSON run config");
  tr->add_option("config", train_config, "Run config JSON file")->required();

  // params
  std::string params_config;
  auto* pa = app.add_subcommand("params", "Report learnable parameter counts for a config");
  pa->add_option("config", params_config, "Run config JSON file")->required();

  // translate
  std::string tl_ckpt, tl_in, tl_out;
  std::string tl_src_vocab, tl_tgt_vocab;
  auto* tl = app.add_subcommand("translate", "Greedy-decode each input line");
  tl->add_option("--checkpoint", tl_ckpt, "Model checkpoint (.gftc)")->required();
  tl->add_option("--input", tl_in, "Input text file")->required();
  tl->add_option("--output", tl_out, "Output text file")->required();
  tl->add_option("--src-vocab", tl_src_vocab, "Override source vocab path");
  tl->add_option("--tgt-vocab", tl_tgt_vocab, "Override target vocab path");

  // evaluate
  std::string ev_ckpt, ev_src, ev_ref;
  std::string ev_src_vocab, ev_tgt_vocab;
  auto* ev = app.add_subcommand(
      "evaluate", "Corpus BLEU; decodes --src with --checkpoint, or scores it directly");
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint (optional)");
  ev->add_option("--src", ev_src, "Source file (or hypothesis file without --checkpoint)")
      ->required();
  ev->add_option("--ref", ev_ref, "Reference file")->required();
  ev->add_option("--src-vocab", ev_src_vocab, "Override source vocab path");
  ev->add_option("--tgt-vocab", ev_tgt_vocab, "Override target vocab path");

  // gradcheck
  std::string gc_component = "all";
  std::uint64_t gc_seed = 7;
  double gc_tolerance = -1.0;
  std::string gc_json;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("component", gc_component,
                 "eau, grc, mha, layer_norm, ffn, full_micro_model, or all");
  gc->add_option("--seed", gc_seed, "Probe seed (default 7)");
  gc->add_option("--tolerance", gc_tolerance, "Override the per-component tolerance");
  gc->add_option("--json", gc_json, "Also write a JSON report to this path");

  CLI11_PARSE(app, argc, argv);

  auto opt = [](const std::string& s) {
    return s.empty() ? std::nullopt : std::optional<std::string>(s);
  };

  return gft::cmd::run_guarded(std::cerr, [&]() -> int {
    if (bv->parsed()) {
      return gft::cmd::build_vocab(bv_src, bv_tgt, bv_min_freq, bv_out_dir, std::cout);
    }
    if (tr->parsed()) return gft::cmd::train(train_config, std::cout);
    if (pa->parsed()) return gft::cmd::params(params_config, std::cout);
    if (tl->parsed()) {
      return gft::cmd::translate(tl_ckpt, tl_in, tl_out, std::cout, opt(tl_src_vocab),
                                 opt(tl_tgt_vocab));
    }
    if (ev->parsed()) {
      return gft::cmd::evaluate(opt(ev_ckpt), ev_src, ev_ref, std::cout, opt(ev_src_vocab),
                                opt(ev_tgt_vocab));
    }
    if (gc->parsed()) {
      std::optional<double> tol;
      if (gc_tolerance > 0.0) tol = gc_tolerance;
      return gft::cmd::gradcheck(gc_component, gc_seed, tol, opt(gc_json), std::cout);
    }
    return gft::cmd::kUsageError;
  });
}
