#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace warpcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double pi = 3.14159265358979323846;

// Bad scalar argument (out of the documented range).
struct parameter_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Ambient or fiber dimension outside the supported range (n >= 4).
struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A builder could not realize its postconditions from admissible inputs.
struct construction_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Circle/geodesic selection ran out of perturbation retries.
struct packing_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Geodesic mesh failed a structural check (e.g. disconnected graph).
struct mesh_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Finite-difference oracle hit a degenerate metric sample.
struct oracle_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Variant { sphere, torus };

inline const char* variant_name(Variant v) {
  return v == Variant::sphere ? "sphere" : "torus";
}

inline double clamp_unit(double x) {
  if (x > 1.0) return 1.0;
  if (x < -1.0) return -1.0;
  return x;
}

// FNV-1a, used to fingerprint configs in run manifests.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace warpcert
