#pragma once
#include <cmath>
#include <cstdint>

namespace brickyard {

// splitmix64. Self-contained so seeded runs are bit-identical across
// compilers and standard libraries (std::normal_distribution is not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n)
  uint64_t uniform_index(uint64_t n) {
    uint64_t limit = ~uint64_t(0) - ~uint64_t(0) % n;
    uint64_t x;
    do { x = next_u64(); } while (x >= limit);
    return x % n;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do { u1 = uniform(); } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  // independent child stream, stable under reordering of other draws
  Rng child(uint64_t tag) const {
    Rng r(state_ ^ (0x632be59bd9b4e019ull * (tag + 1)));
    r.next_u64();
    return r;
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  Rng r(a ^ (0x9e3779b97f4a7c15ull * (b + 1)));
  return r.next_u64();
}

}  // namespace brickyard
