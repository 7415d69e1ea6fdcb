#pragma once

#include <cstdint>
#include <random>

namespace vacle {

/// SplitMix64 finalizer. Bijective on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream tags keep calibration and experiment draws disjoint for one seed.
enum class StreamTag : std::uint64_t {
  Calibration = 1,
  Replication = 2,
  Adhoc = 3,
};

/// Derives the seed of stream (tag, group, index) from a master seed.
std::uint64_t stream_seed(std::uint64_t master, StreamTag tag, std::uint64_t group,
                          std::uint64_t index) noexcept;

/// Gaussian source owned by one replication.
///
/// The engine is mt19937_64 seeded by `stream_seed`; normals come from
/// libstdc++'s std::normal_distribution (Marsaglia polar method), so draws
/// are reproducible for a fixed toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  static Rng for_stream(std::uint64_t master, StreamTag tag, std::uint64_t group,
                        std::uint64_t index) {
    return Rng(stream_seed(master, tag, group, index));
  }

  double gaussian() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace vacle
