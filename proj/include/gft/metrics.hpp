#pragma once

#include <string>
#include <vector>

#include "gft/tensor.hpp"

namespace gft::metrics {

/// Corpus-level BLEU: modified n-gram precision for n = 1..4 with
/// per-reference clipping, geometric mean, brevity penalty exp(1 - r/c)
/// when the candidate corpus is shorter than the reference. No smoothing;
/// any zero precision gives a score of 0.
struct BleuReport {
  double bleu = 0.0;             // [0, 100]
  double precisions[4] = {0, 0, 0, 0};
  double brevity_penalty = 1.0;  // (0, 1]
  long long candidate_len = 0;
  long long reference_len = 0;

  std::string to_text() const;
};

BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                       const std::vector<std::vector<std::string>>& references);

/// Fraction of non-pad positions where argmax(logits) equals the target.
double token_accuracy(const Tensor& logits, const std::vector<int>& targets, int pad_id);

}  // namespace gft::metrics
