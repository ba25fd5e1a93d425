#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace twinforge {

// Named deterministic random substream. Two streams built from the same
// (seed, label) pair produce identical draw sequences; distinct labels under
// the same seed produce statistically independent sequences, so adding a new
// consumer never perturbs the draws of existing ones.
//
// All draw helpers are stateless beyond the engine itself (no cached spare
// gaussian value), so a value copy of the stream is a complete snapshot of
// its position.
class RngStream {
 public:
  RngStream() : RngStream(0, "") {}

  RngStream(std::uint64_t seed, std::string_view label)
      : seed_(seed), label_(label), engine_(derive_seed(seed, label)) {}

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  std::uint64_t draw_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in [0, n), unbiased via rejection.
  std::uint32_t uniform_int(std::uint32_t n) {
    const std::uint64_t span = n;
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return static_cast<std::uint32_t>(r % span);
  }

  // Box-Muller without the cached second value; consumes exactly two engine
  // draws per call so stream position is a pure function of the call count.
  double gaussian(double mean, double stddev) {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * mag * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Replace the engine position from a fresh seed while keeping the label.
  void reseed(std::uint64_t seed) {
    seed_ = seed;
    engine_.seed(derive_seed(seed_, label_));
  }

  // Textual fingerprint of the full engine state, for snapshot comparisons.
  std::string state_string() const {
    std::ostringstream os;
    os << label_ << ':' << engine_;
    return os.str();
  }

  bool operator==(const RngStream& other) const {
    return seed_ == other.seed_ && label_ == other.label_ && engine_ == other.engine_;
  }

 private:
  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
    return splitmix64(seed ^ fnv1a(label));
  }

  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
};

}  // namespace twinforge
