#include "gft/rng.hpp"

namespace gft {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t counter) {
  std::uint64_t state = seed ^ (fnv1a(purpose) + 0x632be59bd9b4e019ull * (counter + 1));
  engine_.seed(splitmix(state));
}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int RngStream::uniform_int(int n) {
  // Rejection sampling keeps the distribution exact.
  const std::uint64_t nn = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = (~0ull / nn) * nn;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<int>(x % nn);
}

}  // namespace gft
