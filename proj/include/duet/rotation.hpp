#pragma once

#include <Eigen/Geometry>

#include "duet/common.hpp"

namespace duet {

// 6D rotation encoding: the first two columns of the matrix, column major.
inline Eigen::Matrix<double, 6, 1> rot_to_6d(const Mat3& r) {
  Eigen::Matrix<double, 6, 1> out;
  out << r(0, 0), r(1, 0), r(2, 0), r(0, 1), r(1, 1), r(2, 1);
  return out;
}

// Gram-Schmidt on the two encoded columns, third column by cross product.
// Near-parallel or near-zero columns cannot span a frame.
inline Mat3 six_d_to_rot(const Eigen::Matrix<double, 6, 1>& v) {
  Vec3 a(v[0], v[1], v[2]);
  Vec3 b(v[3], v[4], v[5]);
  const double an = a.norm();
  if (an < 1e-8) throw DegenerateInput("six_d_to_rot: first column has (near-)zero norm");
  const Vec3 c0 = a / an;
  Vec3 b_perp = b - b.dot(c0) * c0;
  const double bn = b_perp.norm();
  if (bn < 1e-8) throw DegenerateInput("six_d_to_rot: columns are (near-)parallel");
  const Vec3 c1 = b_perp / bn;
  const Vec3 c2 = c0.cross(c1);
  Mat3 r;
  r.col(0) = c0;
  r.col(1) = c1;
  r.col(2) = c2;
  return r;
}

// Shortest-arc rotation taking unit vector `from` to unit vector `to`.
// Antiparallel inputs get a half-turn about a deterministic perpendicular.
inline Mat3 shortest_arc(const Vec3& from, const Vec3& to) {
  const double d = from.dot(to);
  if (d > 1.0 - 1e-12) return Mat3::Identity();
  if (d < -1.0 + 1e-12) {
    Vec3 axis = from.cross(Vec3::UnitX());
    if (axis.squaredNorm() < 1e-12) axis = from.cross(Vec3::UnitY());
    axis.normalize();
    return Eigen::AngleAxisd(M_PI, axis).toRotationMatrix();
  }
  const Vec3 axis = from.cross(to).normalized();
  return Eigen::AngleAxisd(std::acos(std::clamp(d, -1.0, 1.0)), axis).toRotationMatrix();
}

}  // namespace duet
