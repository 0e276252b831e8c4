#pragma once

#include "duet/common.hpp"
#include "duet/motion.hpp"

namespace duet {

struct RewardConfig {
  double imitation_sharpness = 100.0;  // k_p in the exponent
  double default_scale = 0.5;
  double root_saturation = 0.4;        // meters; no extra reward beyond this
  int similarity_joints = 22;          // 24 pads two zero joints (no-op on cosine)
  // tracker safety: keep the root at least floor * saturation away from the
  // actor once the deviation weight passes the threshold
  double safety_floor = 0.5;
  double safety_weight_threshold = 0.5;

  void validate() const {
    if (imitation_sharpness <= 0) throw InvalidInput("reward: k_p must be positive");
    if (root_saturation <= 0) throw InvalidInput("reward: saturation distance must be positive");
    if (similarity_joints != 22 && similarity_joints != 24)
      throw InvalidInput("reward: similarity joint count must be 22 or 24");
  }
};

struct RewardBreakdown {
  double w = 0;
  double r_imitation = 0;
  double r_default = 0;
  double r_root = 0;
  double r_total = 0;
};

// Deviation weight from per-frame cosine similarity of flattened
// root-relative joint positions: w = (1 - mean similarity) / 2, so agreeing
// windows give 0 and opposing windows give 1. Rows are frames; columns are
// 66 root-relative coordinates (a 24-joint setting appends zero columns,
// which leaves the cosine unchanged).
inline double deviation_weight(const MatX& y_hat, const MatX& y_real, const RewardConfig& config = {}) {
  config.validate();
  if (y_hat.rows() != y_real.rows() || y_hat.cols() != y_real.cols())
    throw InvalidInput("deviation_weight: window shape mismatch");
  if (y_hat.rows() < 1) throw InvalidInput("deviation_weight: empty windows");
  double sum = 0;
  for (int n = 0; n < y_hat.rows(); ++n) {
    const double na = y_hat.row(n).norm();
    const double nb = y_real.row(n).norm();
    if (na < 1e-12 || nb < 1e-12) throw DegenerateInput("deviation_weight: zero-norm frame vector");
    sum += y_hat.row(n).dot(y_real.row(n)) / (na * nb);
  }
  const double mean_similarity = sum / static_cast<double>(y_hat.rows());
  return 0.5 * (1.0 - mean_similarity);
}

namespace detail {
inline double mean_joint_distance(const GlobalPose& a, const GlobalPose& b) {
  double sum = 0;
  for (int j = 0; j < Skeleton::kJointCount; ++j)
    sum += (a.joint_positions[static_cast<size_t>(j)] - b.joint_positions[static_cast<size_t>(j)]).norm();
  return sum / Skeleton::kJointCount;
}
}  // namespace detail

// Reward for staying near a neutral standing pose: 0.5 exp(-100 d) with d
// the mean per-joint distance (a whole-body norm would kill the exponent).
inline double reward_default(const GlobalPose& pose, const GlobalPose& rest_pose, const RewardConfig& config = {}) {
  config.validate();
  return config.default_scale * std::exp(-config.imitation_sharpness * detail::mean_joint_distance(pose, rest_pose));
}

// Root separation reward: rises linearly with distance to the actor root
// and saturates at 1 from 0.4 m out (no extra reward beyond that). The
// saturating clamp form max(d, 0.4) reads as a distance, not a reward, so
// the linear ramp is used.
inline double reward_root(const Vec3& root_pos, const Vec3& actor_root_real, const RewardConfig& config = {}) {
  config.validate();
  const double d = (root_pos - actor_root_real).norm();
  return std::min(d, config.root_saturation) / config.root_saturation;
}

// Keypoint imitation against the planned target frame.
inline double reward_imitation(const GlobalPose& pose, const GlobalPose& goal_pose, const RewardConfig& config = {}) {
  config.validate();
  double mse = 0;
  for (int j = 0; j < Skeleton::kJointCount; ++j)
    mse += (pose.joint_positions[static_cast<size_t>(j)] - goal_pose.joint_positions[static_cast<size_t>(j)])
               .squaredNorm();
  mse /= Skeleton::kJointCount;
  return std::exp(-config.imitation_sharpness * mse);
}

// Linear interpolation between tracking the plan and retreating to safe
// defaults: r = (1 - w) r_imitation + w (r_default + r_root).
inline RewardBreakdown combined_reward(const GlobalPose& pose, const GlobalPose& goal, const GlobalPose& rest_pose,
                                       const MatX& y_hat, const MatX& y_real, const Vec3& actor_root_real,
                                       const RewardConfig& config = {}) {
  RewardBreakdown out;
  out.w = deviation_weight(y_hat, y_real, config);
  out.r_imitation = reward_imitation(pose, goal, config);
  out.r_default = reward_default(pose, rest_pose, config);
  out.r_root = reward_root(pose.root(), actor_root_real, config);
  out.r_total = (1.0 - out.w) * out.r_imitation + out.w * (out.r_default + out.r_root);
  return out;
}

// Deterministic stand-in for the physics tracker: exponential blend of all
// joints toward the goal. With actor context, the root is pushed out to the
// safety radius whenever the deviation weight exceeds the threshold.
inline GlobalPose kinematic_tracker_step(const GlobalPose& current, const GlobalPose& goal, double blend_rate,
                                         const Vec3* actor_root = nullptr, double deviation = 0.0,
                                         const RewardConfig& config = {}) {
  if (!(blend_rate > 0.0 && blend_rate <= 1.0)) throw InvalidInput("tracker: blend rate must lie in (0, 1]");
  GlobalPose next = current;
  for (int j = 0; j < Skeleton::kJointCount; ++j)
    next.joint_positions[static_cast<size_t>(j)] =
        current.joint_positions[static_cast<size_t>(j)] +
        blend_rate * (goal.joint_positions[static_cast<size_t>(j)] - current.joint_positions[static_cast<size_t>(j)]);
  double cy = std::cos(current.root_yaw), sy = std::sin(current.root_yaw);
  const double gy_c = std::cos(goal.root_yaw), gy_s = std::sin(goal.root_yaw);
  next.root_yaw = std::atan2(sy + blend_rate * (gy_s - sy), cy + blend_rate * (gy_c - cy));

  if (actor_root && deviation > config.safety_weight_threshold) {
    const double min_dist = config.safety_floor * config.root_saturation;
    Vec3 offset = next.root() - *actor_root;
    offset.y() = 0.0;
    const double d = offset.norm();
    if (d < min_dist) {
      const Vec3 push = (d > 1e-9 ? (offset / d).eval() : Vec3(0, 0, 1)) * (min_dist - d);
      for (auto& p : next.joint_positions) p += push;
    }
  }
  return next;
}

}  // namespace duet
