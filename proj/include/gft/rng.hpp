#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace gft {

/// Deterministic random stream keyed by (seed, purpose, counter). Distinct
/// purposes ("init", "dropout", "data-shuffle") give independent streams.
/// Draws are derived from raw engine words rather than std distributions so
/// sequences are identical across standard-library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t counter = 0);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  int uniform_int(int n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

inline RngStream rng_stream(std::uint64_t seed, std::string_view purpose,
                            std::uint64_t counter = 0) {
  return RngStream(seed, purpose, counter);
}

}  // namespace gft
