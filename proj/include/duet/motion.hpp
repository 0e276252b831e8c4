#pragma once

#include <array>
#include <vector>

#include "duet/common.hpp"
#include "duet/skeleton.hpp"

namespace duet {

enum class AgentId { actor, reactor };

inline const char* to_string(AgentId id) { return id == AgentId::actor ? "actor" : "reactor"; }

// One frame of raw global motion: 22 joint positions (meters, Y up, ground
// plane y = 0) plus the root heading about Y. joint_positions[0] is the pelvis.
struct GlobalPose {
  std::array<Vec3, Skeleton::kJointCount> joint_positions{};
  double root_yaw = 0.0;  // radians in (-pi, pi]

  const Vec3& root() const { return joint_positions[0]; }
};

struct MotionClip {
  double fps = defaults::kFps;
  std::vector<GlobalPose> frames;
  AgentId agent_id = AgentId::actor;

  int size() const { return static_cast<int>(frames.size()); }
  bool empty() const { return frames.empty(); }

  void validate() const {
    if (fps <= 0) throw InvalidInput("motion clip: fps must be positive");
    for (const auto& f : frames) {
      for (const auto& p : f.joint_positions)
        if (!p.allFinite()) throw InvalidInput("motion clip: non-finite joint position");
      if (!std::isfinite(f.root_yaw)) throw InvalidInput("motion clip: non-finite root yaw");
    }
  }
};

// Label = 1 iff the foot joint is both low and slow. Horizontal speed uses
// the backward frame difference, forward difference on the first frame.
inline std::vector<std::array<double, 4>> detect_foot_contacts(const MotionClip& clip,
                                                               const Skeleton& skeleton,
                                                               double height_thresh = defaults::kFootHeightThresh,
                                                               double speed_thresh = defaults::kFootSpeedThresh) {
  if (clip.empty()) throw InvalidInput("detect_foot_contacts: empty clip");
  if (height_thresh <= 0 || speed_thresh <= 0)
    throw InvalidInput("detect_foot_contacts: thresholds must be positive");
  const int n = clip.size();
  std::vector<std::array<double, 4>> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int prev = (i == 0) ? 0 : i - 1;
    const int next = (i == 0) ? std::min(1, n - 1) : i;
    for (int f = 0; f < 4; ++f) {
      const int j = skeleton.foot_joint_ids[static_cast<size_t>(f)];
      const Vec3& p = clip.frames[static_cast<size_t>(i)].joint_positions[static_cast<size_t>(j)];
      const Vec3& a = clip.frames[static_cast<size_t>(prev)].joint_positions[static_cast<size_t>(j)];
      const Vec3& b = clip.frames[static_cast<size_t>(next)].joint_positions[static_cast<size_t>(j)];
      const double dx = b.x() - a.x(), dz = b.z() - a.z();
      const double speed = std::sqrt(dx * dx + dz * dz) * clip.fps;
      labels[static_cast<size_t>(i)][static_cast<size_t>(f)] =
          (p.y() < height_thresh && speed < speed_thresh) ? 1.0 : 0.0;
    }
  }
  return labels;
}

}  // namespace duet
