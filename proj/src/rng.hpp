#pragma once

#include <cstdint>
#include <vector>

namespace gicn {

// Deterministic splitmix64 generator. Draws are derived from raw bits only,
// so sequences are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n); n > 0. Modulo bias is ~n/2^64, irrelevant at this scale.
  int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

  // Independent generator derived from this one's seed and a stream tag.
  Rng fork(uint64_t stream) const { return Rng(mix(state_, stream)); }

  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = int(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[size_t(j)]);
    }
  }

  // k distinct values from [0, n), k <= n, in selection order.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) pool[size_t(i)] = i;
    std::vector<int> out;
    out.reserve(size_t(k));
    for (int i = 0; i < k; ++i) {
      int j = i + uniform_int(n - i);
      std::swap(pool[size_t(i)], pool[size_t(j)]);
      out.push_back(pool[size_t(i)]);
    }
    return out;
  }

 private:
  uint64_t state_;
};

}  // namespace gicn
