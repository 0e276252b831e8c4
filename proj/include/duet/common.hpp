#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace duet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// All RNG in the library goes through one engine type so that seeded runs
// reproduce bit for bit within a build.
using Rng = std::mt19937_64;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidInput : Error {
  using Error::Error;
};
struct DegenerateInput : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct StateError : Error {
  using Error::Error;
};
struct TrainingError : Error {
  using Error::Error;
};
struct StreamExhausted : Error {
  using Error::Error;
};
struct UnsupportedVersion : Error {
  using Error::Error;
};

namespace defaults {
inline constexpr int kFps = 30;
inline constexpr int kHistoryLen = 20;   // h
inline constexpr int kPredictLen = 40;   // k
inline constexpr int kDiffusionSteps = 8;
inline constexpr double kGuidanceScale = 5.0;
inline constexpr double kTextMaskRate = 0.15;
inline constexpr double kFieldThresh = 0.2;        // meters, joint pair contact
inline constexpr double kFootHeightThresh = 0.05;  // meters
inline constexpr double kFootSpeedThresh = 0.15;   // meters/second
}  // namespace defaults

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

// Rotation about +Y by yaw; forward(+Z) maps to (sin yaw, 0, cos yaw).
inline Mat3 yaw_rotation(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Vec3 rotate_y(double yaw, const Vec3& v) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x() + s * v.z(), v.y(), -s * v.x() + c * v.z()};
}

inline Vec3 heading_dir(double yaw) { return {std::sin(yaw), 0.0, std::cos(yaw)}; }

inline double normal_sample(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline MatX normal_matrix(int rows, int cols, Rng& rng) {
  MatX m(rows, cols);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

// 64-bit FNV-1a; used wherever a stable cross-run hash of bytes is needed
// (std::hash is implementation defined).
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace duet
