#include "vacle/rng.hpp"

namespace vacle {

std::uint64_t stream_seed(std::uint64_t master, StreamTag tag, std::uint64_t group,
                          std::uint64_t index) noexcept {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ group);
  return mix64(h ^ index);
}

}  // namespace vacle
