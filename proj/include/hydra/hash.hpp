#pragma once

#include <cstdint>
#include <string>

#include "hydra/trace.hpp"

namespace hydra {

/// SplitMix32 finalizer: golden-ratio increment, two xor-shift-multiply
/// rounds, final xor-shift. Bijective on 32-bit values.
inline std::uint32_t splitmix32(std::uint32_t x) {
  x += 0x9e3779b9u;
  x ^= x >> 16;
  x *= 0x21f0aaadu;
  x ^= x >> 15;
  x *= 0x735a2d97u;
  x ^= x >> 15;
  return x;
}

enum class HashKind { Bitmask, SplitMix32 };

/// Reduction of a block address into a table index of 2^bits entries.
struct HashScheme {
  HashKind kind = HashKind::Bitmask;
  unsigned bits = 19;

  std::uint64_t entries() const { return std::uint64_t(1) << bits; }

  std::uint64_t index(std::uint64_t block_addr) const {
    const std::uint64_t mask = entries() - 1;
    if (kind == HashKind::Bitmask) return block_addr & mask;
    // fold high bits so 64-bit addresses stay covered
    std::uint32_t x = std::uint32_t(block_addr ^ (block_addr >> 32));
    return splitmix32(x) & mask;
  }

  std::string to_string() const {
    return (kind == HashKind::Bitmask ? std::string("bitmask") : std::string("splitmix32")) +
           ":" + std::to_string(bits);
  }

  static HashScheme from_string(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos) throw config_error("bad hash scheme: " + s);
    HashScheme h;
    std::string kind = s.substr(0, colon);
    if (kind == "bitmask")
      h.kind = HashKind::Bitmask;
    else if (kind == "splitmix32")
      h.kind = HashKind::SplitMix32;
    else
      throw config_error("bad hash scheme kind: " + kind);
    h.bits = unsigned(std::stoul(s.substr(colon + 1)));
    if (h.bits == 0 || h.bits > 40) throw config_error("bad hash scheme bits in: " + s);
    return h;
  }

  bool operator==(const HashScheme&) const = default;
};

}  // namespace hydra
