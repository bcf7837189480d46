#include "gft/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "gft/checkpoint.hpp"  // IoError

namespace gft::data {

namespace {

const char* kSpecials[4] = {"<pad>", "<unk>", "<bos>", "<eos>"};

bool is_ascii_punct(unsigned char c) { return std::ispunct(c) != 0; }

void check_utf8(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    int extra;
    if (c < 0x80) {
      extra = 0;
    } else if ((c >> 5) == 0x6) {
      extra = 1;
    } else if ((c >> 4) == 0xe) {
      extra = 2;
    } else if ((c >> 3) == 0x1e) {
      extra = 3;
    } else {
      throw ValueError("tokenize: invalid UTF-8 byte at offset " + std::to_string(i));
    }
    for (int j = 1; j <= extra; ++j) {
      if (i + j >= s.size() ||
          (static_cast<unsigned char>(s[i + j]) >> 6) != 0x2) {
        throw ValueError("tokenize: invalid UTF-8 sequence at offset " + std::to_string(i));
      }
    }
    i += static_cast<std::size_t>(extra) + 1;
  }
}

}  // namespace

std::vector<std::string> tokenize(const std::string& line) {
  check_utf8(line);
  std::string spaced;
  spaced.reserve(line.size() * 2);
  for (unsigned char c : line) {
    if (c < 0x80 && is_ascii_punct(c)) {
      spaced.push_back(' ');
      spaced.push_back(static_cast<char>(c));
      spaced.push_back(' ');
    } else {
      spaced.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  std::vector<std::string> tokens;
  std::istringstream is(spaced);
  std::string tok;
  while (is >> tok) tokens.push_back(tok);
  return tokens;
}

Vocab::Vocab() {
  for (const char* s : kSpecials) push_token(s, 0);
  finalize();
}

void Vocab::push_token(const std::string& token, long long count) {
  id_to_token_.push_back(token);
  counts_.push_back(count);
}

void Vocab::finalize() {
  sorted_tokens_.clear();
  sorted_tokens_.reserve(id_to_token_.size());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    sorted_tokens_.emplace_back(id_to_token_[i], static_cast<int>(i));
  }
  std::sort(sorted_tokens_.begin(), sorted_tokens_.end());
}

int Vocab::id_of(const std::string& token) const {
  auto it = std::lower_bound(sorted_tokens_.begin(), sorted_tokens_.end(),
                             std::make_pair(token, 0));
  if (it != sorted_tokens_.end() && it->first == token) return it->second;
  return kUnkId;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) throw ValueError("vocab: id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens, bool add_bos_eos) const {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  if (add_bos_eos) ids.push_back(kBosId);
  for (const std::string& t : tokens) ids.push_back(id_of(t));
  if (add_bos_eos) ids.push_back(kEosId);
  return ids;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids, bool strip_specials) const {
  std::vector<std::string> tokens;
  for (int id : ids) {
    if (strip_specials && id < 4) continue;
    tokens.push_back(token_of(id));
  }
  return tokens;
}

Vocab Vocab::build(const std::vector<std::string>& lines, int min_freq) {
  if (min_freq < 1) throw ValueError("vocab: min_freq must be >= 1");
  std::map<std::string, long long> counts;
  for (const std::string& line : lines) {
    for (const std::string& tok : tokenize(line)) ++counts[tok];
  }
  std::vector<std::pair<std::string, long long>> entries;
  for (const auto& [tok, count] : counts) {
    if (count >= min_freq) entries.emplace_back(tok, count);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [tok, count] : entries) v.push_token(tok, count);
  v.finalize();
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("vocab: cannot open for writing: " + path);
  for (int i = 0; i < size(); ++i) {
    out << id_to_token_[static_cast<std::size_t>(i)] << '\t'
        << counts_[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out) throw IoError("vocab: write failed: " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("vocab: cannot open: " + path);
  Vocab v;
  v.id_to_token_.clear();
  v.counts_.clear();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError("vocab: malformed line " + std::to_string(lineno) + " in " + path);
    }
    v.push_token(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
  }
  if (v.size() < 4) throw IoError("vocab: fewer than 4 entries in " + path);
  for (int i = 0; i < 4; ++i) {
    if (v.id_to_token_[static_cast<std::size_t>(i)] != kSpecials[i]) {
      throw IoError("vocab: specials out of order in " + path);
    }
  }
  v.finalize();
  return v;
}

BatchPlan make_batches(const std::vector<SentencePair>& pairs, const Vocab& src_vocab,
                       const Vocab& tgt_vocab, int batch_size, int max_len, RngStream& rng) {
  if (batch_size < 1) throw ValueError("batches: batch_size must be >= 1");
  BatchPlan plan;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [src, tgt] = pairs[i];
    if (static_cast<int>(src.size()) > max_len - 2 ||
        static_cast<int>(tgt.size()) > max_len - 2) {
      ++plan.dropped_pairs;
      continue;
    }
    order.push_back(i);
  }
  if (order.empty()) {
    throw ValueError("batches: no pairs survive the max_len limit of " +
                     std::to_string(max_len));
  }
  rng.shuffle(order);

  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Batch batch;
    int s_src = 0;
    int s_tgt = 0;
    for (std::size_t idx = start; idx < end; ++idx) {
      const auto& [src, tgt] = pairs[order[idx]];
      std::vector<int> src_enc = src_vocab.encode(src, /*add_bos_eos=*/true);
      std::vector<int> tgt_enc = tgt_vocab.encode(tgt, /*add_bos_eos=*/true);
      s_src = std::max(s_src, static_cast<int>(src_enc.size()));
      // tgt_in drops EOS, tgt_out drops BOS; both have tgt_enc.size() - 1 slots
      s_tgt = std::max(s_tgt, static_cast<int>(tgt_enc.size()) - 1);
      batch.src_ids.push_back(std::move(src_enc));

      std::vector<int> tgt_in(tgt_enc.begin(), tgt_enc.end() - 1);
      std::vector<int> tgt_out(tgt_enc.begin() + 1, tgt_enc.end());
      batch.tgt_in_ids.push_back(std::move(tgt_in));
      batch.tgt_out_ids.push_back(std::move(tgt_out));
    }
    const int b = batch.size();
    batch.src_pad_mask = BoolMat(b, s_src, false);
    batch.tgt_pad_mask = BoolMat(b, s_tgt, false);
    batch.causal_mask = BoolMat::causal(s_tgt);
    for (int r = 0; r < b; ++r) {
      batch.src_ids[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(s_src), kPadId);
      batch.tgt_in_ids[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(s_tgt), kPadId);
      batch.tgt_out_ids[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(s_tgt), kPadId);
      for (int c = 0; c < s_src; ++c) {
        batch.src_pad_mask.set(r, c, batch.src_ids[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == kPadId);
      }
      for (int c = 0; c < s_tgt; ++c) {
        batch.tgt_pad_mask.set(r, c, batch.tgt_in_ids[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == kPadId);
      }
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

std::vector<SentencePair> synth_copy_task(int vocab_size, int num_pairs, int min_len,
                                          int max_len, RngStream& rng, SynthMode mode) {
  if (vocab_size < 5) throw ValueError("synth: vocab_size must be >= 5");
  if (min_len < 1 || max_len < min_len) throw ValueError("synth: bad length range");
  const int num_symbols = vocab_size - 4;
  std::vector<SentencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(num_pairs));
  for (int i = 0; i < num_pairs; ++i) {
    const int len = min_len + rng.uniform_int(max_len - min_len + 1);
    std::vector<std::string> src;
    src.reserve(static_cast<std::size_t>(len));
    for (int j = 0; j < len; ++j) {
      src.push_back("s" + std::to_string(rng.uniform_int(num_symbols)));
    }
    std::vector<std::string> tgt = src;
    if (mode == SynthMode::kReverse) std::reverse(tgt.begin(), tgt.end());
    pairs.emplace_back(std::move(src), std::move(tgt));
  }
  return pairs;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const std::string& line : lines) out << line << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace gft::data
