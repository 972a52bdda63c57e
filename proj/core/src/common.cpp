#include "horo/common.hpp"

#include <cstdio>
#include <cstring>

namespace horo {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  return fnv1a(s.data(), s.size(), seed);
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& tag, std::uint64_t index) {
  std::uint64_t h = fnv1a(tag);
  h = fnv1a(&master, sizeof(master), h);
  h = fnv1a(&index, sizeof(index), h);
  // Avoid the all-zero state.
  return h == 0 ? 0x6a09e667f3bcc909ull : h;
}

std::string format_double(double v) {
  // Shortest representation that parses back to the same bits.
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace horo
