#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace evex {

using vec = std::vector<double>;

// Error taxonomy. Everything user-facing throws one of these so the CLI can
// map them onto its exit-code contract.
struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct size_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct parameter_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct state_error : std::logic_error {
  using std::logic_error::logic_error;
};
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct convergence_error : std::runtime_error {
  double residual;
  explicit convergence_error(const std::string& msg, double res)
      : std::runtime_error(msg), residual(res) {}
};

inline double dot(const vec& a, const vec& b) {
  if (a.size() != b.size()) throw dimension_error("dot: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const vec& a) { return std::sqrt(dot(a, a)); }

inline double clip01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

inline double sigmoid(double x) {
  // split to avoid overflow in exp for large |x|
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// FNV-1a, seeded. std::hash is implementation-defined, so feature hashing
// uses this to stay reproducible.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 1469598103934665603ull ^ (seed * 0x9e3779b97f4a7c15ull);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t seed) {
  return fnv1a(s.data(), s.size(), seed);
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic random stream. xoshiro-free: a splitmix-seeded 64-bit state
// stepped by splitmix is enough here, and the double transforms are ours so
// the bits never depend on libstdc++ internals.
class rng_stream {
 public:
  explicit rng_stream(uint64_t seed) : state_(splitmix64(seed ^ 0xd1b54a32d192ed03ull)) {}

  // derive an independent stream for (seed, a, b, c); used so per-instance
  // noise does not depend on iteration order
  static rng_stream derive(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = splitmix64(seed);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return rng_stream(s);
  }

  uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // uniform on [0,1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform on (0,1), safe for log()
  double uniform_open() {
    double u = uniform();
    return u <= 0.0 ? 0x1.0p-53 : u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    if (hi < lo) throw parameter_error("uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  double normal() {
    // Box-Muller; one value per call keeps the stream layout simple
    double u1 = uniform_open();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double logistic() {
    double u = uniform_open();
    if (u >= 1.0) u = 1.0 - 0x1.0p-53;
    return std::log(u) - std::log1p(-u);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace evex
