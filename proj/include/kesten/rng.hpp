#pragma once

#include <cstdint>
#include <random>

namespace kesten {

/// A seeded random stream. Identified by (seed, stream id); two streams with
/// different ids are statistically independent. Not thread-safe: one stream
/// per thread.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6b657374u};
    engine_.seed(seq);
  }

  double uniform() { return unif_(engine_); }
  /// Uniform on (0, 1]; safe to take the log of.
  double uniform_pos() { return 1.0 - unif_(engine_); }
  double normal() { return norm_(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  /// Index in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  /// Number of trials up to and including the first success, success probability p.
  std::uint64_t geometric(double p) { return std::geometric_distribution<std::uint64_t>(p)(engine_) + 1; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream; consumes one draw from this stream.
  RngStream split() { return RngStream(next_u64(), 0); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace kesten
