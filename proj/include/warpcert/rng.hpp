#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "warpcert/common.hpp"

namespace warpcert {

// All randomized stages draw from mt19937_64 through the helpers below only,
// so a (seed, stage) pair fully determines the sample stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stage-scoped child stream; avoids coupling between pipeline stages that
  // would otherwise share one cursor.
  static Rng stage(std::uint64_t seed, const std::string& tag) {
    return Rng(seed ^ fnv1a(tag));
  }

  double uniform() {
    // 53-bit mantissa in [0,1).
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t integer(std::uint64_t bound) { return engine_() % bound; }

  // Marsaglia polar method; explicit so the stream does not depend on the
  // standard library's unspecified normal_distribution algorithm.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // Uniform point on the unit sphere of R^dim.
  Vec unit_vector(int dim) {
    Vec p(dim);
    double norm2;
    do {
      for (int i = 0; i < dim; ++i) p[i] = normal();
      norm2 = p.squaredNorm();
    } while (norm2 == 0.0);
    return p / std::sqrt(norm2);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace warpcert
