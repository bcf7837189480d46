#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

namespace gft::cmd {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsageError = 2;
inline constexpr int kIoError = 3;

int build_vocab(const std::string& src_file, const std::string& tgt_file, int min_freq,
                const std::string& out_dir, std::ostream& out);

int train(const std::string& config_file, std::ostream& out);

int params(const std::string& config_file, std::ostream& out);

int translate(const std::string& checkpoint_file, const std::string& input_file,
              const std::string& output_file, std::ostream& out,
              const std::optional<std::string>& src_vocab_override = std::nullopt,
              const std::optional<std::string>& tgt_vocab_override = std::nullopt);

/// With a checkpoint: translate src_file and score against ref_file.
/// Without: src_file is an already-decoded hypothesis file scored directly.
int evaluate(const std::optional<std::string>& checkpoint_file, const std::string& src_file,
             const std::string& ref_file, std::ostream& out,
             const std::optional<std::string>& src_vocab_override = std::nullopt,
             const std::optional<std::string>& tgt_vocab_override = std::nullopt);

int gradcheck(const std::string& component, std::uint64_t seed,
              std::optional<double> tolerance, const std::optional<std::string>& json_path,
              std::ostream& out);

/// Maps thrown errors onto the exit-code taxonomy and prints the message.
int run_guarded(std::ostream& err, const std::function<int()>& body);

}  // namespace gft::cmd
