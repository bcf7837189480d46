#include "gft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace gft::metrics {

namespace {

std::map<std::vector<std::string>, long long> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, long long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::vector<std::string> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[gram];
  }
  return counts;
}

}  // namespace

BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                       const std::vector<std::vector<std::string>>& references) {
  if (candidates.empty()) throw ValueError("bleu: empty corpus");
  if (candidates.size() != references.size()) {
    throw ValueError("bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                     std::to_string(references.size()) + " references");
  }

  BleuReport report;
  long long matched[4] = {0, 0, 0, 0};
  long long total[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    report.candidate_len += static_cast<long long>(candidates[i].size());
    report.reference_len += static_cast<long long>(references[i].size());
    for (int n = 1; n <= 4; ++n) {
      auto cand = ngram_counts(candidates[i], n);
      auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : cand) {
        total[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  bool all_positive = true;
  for (int n = 0; n < 4; ++n) {
    report.precisions[n] =
        total[n] > 0 ? static_cast<double>(matched[n]) / static_cast<double>(total[n]) : 0.0;
    all_positive = all_positive && report.precisions[n] > 0.0;
  }

  if (report.candidate_len < report.reference_len && report.candidate_len > 0) {
    report.brevity_penalty =
        std::exp(1.0 - static_cast<double>(report.reference_len) /
                           static_cast<double>(report.candidate_len));
  } else {
    report.brevity_penalty = 1.0;
  }

  if (all_positive) {
    double log_sum = 0.0;
    for (int n = 0; n < 4; ++n) log_sum += std::log(report.precisions[n]);
    report.bleu = 100.0 * report.brevity_penalty * std::exp(log_sum / 4.0);
  } else {
    report.bleu = 0.0;
  }
  return report;
}

std::string BleuReport::to_text() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "BLEU = " << bleu << " (corpus-level, 4-gram, single reference, no smoothing)\n";
  os << "precisions = " << precisions[0] << " / " << precisions[1] << " / " << precisions[2]
     << " / " << precisions[3] << "\n";
  os << "brevity_penalty = " << brevity_penalty << "\n";
  os << "candidate_len = " << candidate_len << ", reference_len = " << reference_len << "\n";
  return os.str();
}

double token_accuracy(const Tensor& logits, const std::vector<int>& targets, int pad_id) {
  if (logits.rank() != 2 || static_cast<int>(targets.size()) != logits.dim(0)) {
    throw ShapeError("token_accuracy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  const int v = logits.dim(1);
  long long live = 0;
  long long hits = 0;
  for (int r = 0; r < logits.dim(0); ++r) {
    if (targets[static_cast<std::size_t>(r)] == pad_id) continue;
    ++live;
    const std::size_t base = static_cast<std::size_t>(r) * v;
    int best = 0;
    double best_val = logits.data()[base];
    for (int c = 1; c < v; ++c) {
      if (logits.data()[base + c] > best_val) {
        best_val = logits.data()[base + c];
        best = c;
      }
    }
    if (best == targets[static_cast<std::size_t>(r)]) ++hits;
  }
  if (live == 0) throw ValueError("token_accuracy: all positions are pad");
  return static_cast<double>(hits) / static_cast<double>(live);
}

}  // namespace gft::metrics
