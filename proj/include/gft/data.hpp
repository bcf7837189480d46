#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gft/rng.hpp"
#include "gft/tensor.hpp"

namespace gft::data {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kEosId = 3;

/// Token <-> id mapping. Ids 0-3 are PAD, UNK, BOS, EOS in that order;
/// regular tokens follow ordered by (count desc, token asc).
class Vocab {
 public:
  Vocab();

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int id_of(const std::string& token) const;  // kUnkId when absent
  const std::string& token_of(int id) const;
  long long count_of(int id) const { return counts_[static_cast<std::size_t>(id)]; }

  std::vector<int> encode(const std::vector<std::string>& tokens, bool add_bos_eos) const;
  std::vector<std::string> decode(const std::vector<int>& ids, bool strip_specials) const;

  void save(const std::string& path) const;  // "token\tcount" lines, specials first
  static Vocab load(const std::string& path);
  static Vocab build(const std::vector<std::string>& lines, int min_freq);

 private:
  std::vector<std::string> id_to_token_;
  std::vector<long long> counts_;
  std::vector<std::pair<std::string, int>> sorted_tokens_;  // token -> id, sorted

  void push_token(const std::string& token, long long count);
  void finalize();
};

/// Lowercases, isolates punctuation as standalone tokens, splits on
/// whitespace. Input must be valid UTF-8.
std::vector<std::string> tokenize(const std::string& line);

using SentencePair = std::pair<std::vector<std::string>, std::vector<std::string>>;

/// A padded training batch. Pad masks are true exactly at pad positions;
/// causal_mask is true where the decoder may attend (lower triangle).
struct Batch {
  std::vector<std::vector<int>> src_ids;     // [B x S_src]
  std::vector<std::vector<int>> tgt_in_ids;  // [B x S_tgt], BOS-prefixed
  std::vector<std::vector<int>> tgt_out_ids; // [B x S_tgt], EOS-suffixed
  BoolMat src_pad_mask;                      // [B x S_src]
  BoolMat tgt_pad_mask;                      // [B x S_tgt]
  BoolMat causal_mask;                       // [S_tgt x S_tgt]

  int size() const { return static_cast<int>(src_ids.size()); }
  int src_len() const { return src_ids.empty() ? 0 : static_cast<int>(src_ids[0].size()); }
  int tgt_len() const { return tgt_in_ids.empty() ? 0 : static_cast<int>(tgt_in_ids[0].size()); }
};

struct BatchPlan {
  std::vector<Batch> batches;
  std::size_t dropped_pairs = 0;  // pairs over the length limit
};

/// Shuffles pairs with rng, drops any pair whose side exceeds max_len - 2
/// tokens (room for BOS/EOS), and pads each batch to its longest member.
BatchPlan make_batches(const std::vector<SentencePair>& pairs, const Vocab& src_vocab,
                       const Vocab& tgt_vocab, int batch_size, int max_len, RngStream& rng);

enum class SynthMode { kCopy, kReverse };

/// Synthetic sequence pairs over vocab_size - 4 distinct symbols (the other
/// four ids are the specials). Targets copy or reverse the source.
std::vector<SentencePair> synth_copy_task(int vocab_size, int num_pairs, int min_len,
                                          int max_len, RngStream& rng,
                                          SynthMode mode = SynthMode::kCopy);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

}  // namespace gft::data
