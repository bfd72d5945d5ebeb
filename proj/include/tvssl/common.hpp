#ifndef TVSSL_COMMON_HPP_
#define TVSSL_COMMON_HPP_

#include <cstdint>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tvssl {

struct DimError : std::runtime_error {
  explicit DimError(const std::string& msg) : std::runtime_error("dim error: " + msg) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

#define TVSSL_CHECK(cond, msg)                      \
  do {                                              \
    if (!(cond)) {                                  \
      std::ostringstream oss_;                      \
      oss_ << msg;                                  \
      throw ::tvssl::DimError(oss_.str());          \
    }                                               \
  } while (0)

#define TVSSL_CHECK_CFG(cond, msg)                  \
  do {                                              \
    if (!(cond)) {                                  \
      std::ostringstream oss_;                      \
      oss_ << msg;                                  \
      throw ::tvssl::ConfigError(oss_.str());       \
    }                                               \
  } while (0)

// SplitMix64. Used to derive independent stream seeds from (seed, index...)
// so augmentation draws are replayable regardless of evaluation order.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

// Deterministic RNG wrapper. std::*_distribution is implementation-defined,
// so uniform/normal draws are generated by hand.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return std::ldexp(static_cast<double>(gen_() >> 11), -53); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int64_t uniform_int(int64_t n) {
    return static_cast<int64_t>(gen_() % static_cast<uint64_t>(n));
  }

  // Box-Muller, one value per call (the pair's second half is dropped
  // to keep the stream position a pure function of the call count).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace tvssl

#endif  // TVSSL_COMMON_HPP_
