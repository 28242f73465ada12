#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace skillmind::rng {

// FNV-1a, used to derive per-item RNG streams from string ids.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 finalizer; spreads low-entropy seeds over the full word.
constexpr std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  return mix(mix(seed) ^ fnv1a(stream));
}

/// Deterministic generator. mt19937_64 output is pinned by the standard, and
/// all bounded draws below avoid std::uniform_*_distribution (whose mapping is
/// implementation-defined), so sequences are identical across platforms.
class Engine {
 public:
  explicit Engine(std::uint64_t seed) : gen_(mix(seed)) {}
  Engine(std::uint64_t seed, std::string_view stream) : gen_(derive_seed(seed, stream)) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, n), unbiased via rejection sampling.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Engine::below: n must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  // First k positions of a partial Fisher-Yates pass, in draw order.
  std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t k) {
    if (k > pool_size) throw std::invalid_argument("Engine::sample_indices: k exceeds pool");
    std::vector<std::size_t> idx(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(pool_size - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace skillmind::rng
