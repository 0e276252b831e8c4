#pragma once

#include <array>
#include <vector>

#include "duet/common.hpp"
#include "duet/motion.hpp"
#include "duet/rotation.hpp"
#include "duet/skeleton.hpp"

namespace duet {

// Per-frame interaction vector z = (reactor x, relative actor y, contact
// field I), 263 + 144 + 36 = 443 numbers. Offsets below index into it.
namespace layout {
inline constexpr int kReactorDim = 263;
inline constexpr int kActorDim = 144;
inline constexpr int kFieldDim = 36;
inline constexpr int kFrameDim = kReactorDim + kActorDim + kFieldDim;  // 443

// reactor block
inline constexpr int R_HEIGHT = 0;    // root height (1)
inline constexpr int R_ROOTVEL = 1;   // yaw rate, local XZ linear velocity (3)
inline constexpr int R_JPOS = 4;      // local joint positions, joints 1..21 (63)
inline constexpr int R_JVEL = 67;     // local joint velocities, joints 0..21 (66)
inline constexpr int R_ROT6 = 133;    // 6D joint rotations, joints 1..21 (126)
inline constexpr int R_FOOT = 259;    // foot contact labels (4)
// actor block, all expressed in the reactor's per-frame root frame
inline constexpr int A_OFF = 263;     // actor root offset (3)
inline constexpr int A_YAW = 266;     // relative heading as (cos, sin) (2)
inline constexpr int A_LINVEL = 268;  // actor root linear velocity (3)
inline constexpr int A_JPOS = 271;    // actor joint positions (66)
inline constexpr int A_JVEL = 337;    // actor joint velocities (66)
inline constexpr int A_FOOT = 403;    // actor foot contact labels (4)
// interaction field, row = reactor contact joint, column = actor contact joint
inline constexpr int F_BASE = 407;    // 6 x 6 binary matrix, row major (36)

inline bool is_binary_dim(int d) {
  return (d >= R_FOOT && d < R_FOOT + 4) || (d >= A_FOOT && d < A_FOOT + 4) || (d >= F_BASE && d < kFrameDim);
}

// Pose sub-features for the prefix continuity penalty: reactor height,
// local positions and rotations plus the actor's relative pose. Velocities
// and contact labels are excluded.
inline bool is_prefix_dim(int d) {
  if (d == R_HEIGHT) return true;
  if (d >= R_JPOS && d < R_JPOS + 63) return true;
  if (d >= R_ROT6 && d < R_ROT6 + 126) return true;
  if (d >= A_OFF && d < A_OFF + 3) return true;
  if (d >= A_YAW && d < A_YAW + 2) return true;
  if (d >= A_JPOS && d < A_JPOS + 66) return true;
  return false;
}

inline int prefix_dim_count() {
  int n = 0;
  for (int d = 0; d < kFrameDim; ++d)
    if (is_prefix_dim(d)) ++n;
  return n;
}
}  // namespace layout

// Rigid map from canonical coordinates back to global: x_g = R(yaw) x_c + t.
struct CanonicalTransform {
  Vec3 translation = Vec3::Zero();  // y component is always 0
  double yaw = 0.0;

  Vec3 apply(const Vec3& p) const { return rotate_y(yaw, p) + translation; }
  Vec3 invert(const Vec3& p) const { return rotate_y(-yaw, p - translation); }
  bool is_identity(double tol = 0.0) const {
    return translation.norm() <= tol && std::abs(yaw) <= tol;
  }
};

// Reactor root state in canonical coordinates (XZ position + heading).
struct RootState {
  double x = 0.0;
  double z = 0.0;
  double yaw = 0.0;
};

// A canonicalized two-agent sequence: one 443-d row per frame, plus the
// reactor root trajectory in canonical coordinates and the transform back
// to global. `anchor` indexes the frame whose root sits at the origin.
struct CanonicalSeq {
  MatX frames;  // L x 443
  std::vector<RootState> reactor_states;
  CanonicalTransform transform;
  int anchor = 0;
  double fps = defaults::kFps;

  int size() const { return static_cast<int>(frames.rows()); }
};

// Entry (i, j) = 1 iff reactor contact joint i and actor contact joint j
// are within `thresh` meters. A distance exactly equal counts as contact.
inline Eigen::Matrix<double, 6, 6> compute_interaction_field(const GlobalPose& pose_x, const GlobalPose& pose_y,
                                                             const Skeleton& skeleton,
                                                             double thresh = defaults::kFieldThresh) {
  if (thresh <= 0) throw InvalidInput("compute_interaction_field: thresh must be positive");
  Eigen::Matrix<double, 6, 6> field;
  for (int i = 0; i < 6; ++i) {
    const Vec3& a = pose_x.joint_positions[static_cast<size_t>(skeleton.contact_field_ids[static_cast<size_t>(i)])];
    for (int j = 0; j < 6; ++j) {
      const Vec3& b = pose_y.joint_positions[static_cast<size_t>(skeleton.contact_field_ids[static_cast<size_t>(j)])];
      field(i, j) = ((a - b).norm() <= thresh) ? 1.0 : 0.0;
    }
  }
  return field;
}

namespace detail {

// Finite-difference context: frame 0 uses the forward difference, later
// frames the backward one. Returns the (prev, next) index pair.
inline std::pair<int, int> diff_pair(int n, int clip_len) {
  if (n == 0) return {0, std::min(1, clip_len - 1)};
  return {n - 1, n};
}

inline Vec3 root_xz(const GlobalPose& p) { return {p.root().x(), 0.0, p.root().z()}; }

}  // namespace detail

// Builds the canonical interaction features for clip frames [begin, end).
// At `anchor_frame` the reactor root XZ is the canonical origin and its
// heading is +Z; the actor is carried through the same transform. Frame
// differences use clip context outside the range when it exists, so
// velocities stay consistent across window boundaries.
inline CanonicalSeq canonicalize(const MotionClip& reactor, const MotionClip& actor, const Skeleton& skeleton,
                                 int anchor_frame, const std::vector<std::array<double, 4>>& contacts_x,
                                 const std::vector<std::array<double, 4>>& contacts_y,
                                 double field_thresh = defaults::kFieldThresh, int begin = 0, int end = -1) {
  if (reactor.size() != actor.size()) throw InvalidInput("canonicalize: mismatched clip lengths");
  if (reactor.empty()) throw InvalidInput("canonicalize: empty clips");
  if (reactor.fps != actor.fps) throw InvalidInput("canonicalize: mismatched fps");
  const int len = reactor.size();
  if (end < 0) end = len;
  if (begin < 0 || begin >= end || end > len) throw InvalidInput("canonicalize: invalid frame range");
  if (anchor_frame < begin || anchor_frame >= end) throw InvalidInput("canonicalize: anchor outside range");
  if (static_cast<int>(contacts_x.size()) != len || static_cast<int>(contacts_y.size()) != len)
    throw InvalidInput("canonicalize: contact label count mismatch");

  const double fps = reactor.fps;
  const auto& anchor_pose = reactor.frames[static_cast<size_t>(anchor_frame)];

  CanonicalSeq seq;
  seq.fps = fps;
  seq.anchor = anchor_frame - begin;
  seq.transform.translation = detail::root_xz(anchor_pose);
  seq.transform.yaw = anchor_pose.root_yaw;

  const int L = end - begin;
  seq.frames.resize(L, layout::kFrameDim);
  seq.reactor_states.resize(static_cast<size_t>(L));

  const auto rest = skeleton.rest_positions();

  for (int out = 0; out < L; ++out) {
    const int n = begin + out;
    const auto [prev, next] = detail::diff_pair(n, len);
    const GlobalPose& rx = reactor.frames[static_cast<size_t>(n)];
    const GlobalPose& ry = actor.frames[static_cast<size_t>(n)];
    const GlobalPose& rx_prev = reactor.frames[static_cast<size_t>(prev)];
    const GlobalPose& rx_next = reactor.frames[static_cast<size_t>(next)];
    const GlobalPose& ry_prev = actor.frames[static_cast<size_t>(prev)];
    const GlobalPose& ry_next = actor.frames[static_cast<size_t>(next)];

    auto row = seq.frames.row(out);
    const double yaw = rx.root_yaw;
    // Velocities are rotated into the frame they come from, so decode can
    // re-apply the same rotation before knowing the destination state.
    const double vel_yaw = rx_prev.root_yaw;
    const Vec3 root = rx.root();
    const Vec3 root_xz(root.x(), 0.0, root.z());

    row[layout::R_HEIGHT] = root.y();
    row[layout::R_ROOTVEL + 0] = wrap_angle(rx_next.root_yaw - rx_prev.root_yaw) * fps;
    {
      const Vec3 v = rotate_y(-vel_yaw, rx_next.root() - rx_prev.root()) * fps;
      row[layout::R_ROOTVEL + 1] = v.x();
      row[layout::R_ROOTVEL + 2] = v.z();
    }
    for (int j = 1; j < Skeleton::kJointCount; ++j) {
      const Vec3 p = rotate_y(-yaw, rx.joint_positions[static_cast<size_t>(j)] - root_xz);
      row.segment<3>(layout::R_JPOS + 3 * (j - 1)) = p;
    }
    for (int j = 0; j < Skeleton::kJointCount; ++j) {
      const Vec3 v = rotate_y(-vel_yaw, rx_next.joint_positions[static_cast<size_t>(j)] -
                                            rx_prev.joint_positions[static_cast<size_t>(j)]) *
                     fps;
      row.segment<3>(layout::R_JVEL + 3 * j) = v;
    }
    for (int j = 1; j < Skeleton::kJointCount; ++j) {
      const int parent = skeleton.parent_index[static_cast<size_t>(j)];
      const Vec3 parent_local =
          parent == 0 ? Vec3(0.0, root.y(), 0.0)
                      : rotate_y(-yaw, rx.joint_positions[static_cast<size_t>(parent)] - root_xz);
      const Vec3 self_local = rotate_y(-yaw, rx.joint_positions[static_cast<size_t>(j)] - root_xz);
      const Vec3 bone = self_local - parent_local;
      const Vec3 rest_bone = rest[static_cast<size_t>(j)] - rest[static_cast<size_t>(parent)];
      Mat3 rot = Mat3::Identity();
      if (bone.norm() > 1e-9 && rest_bone.norm() > 1e-9)
        rot = shortest_arc(rest_bone.normalized(), bone.normalized());
      row.segment<6>(layout::R_ROT6 + 6 * (j - 1)) = rot_to_6d(rot);
    }
    for (int f = 0; f < 4; ++f) row[layout::R_FOOT + f] = contacts_x[static_cast<size_t>(n)][static_cast<size_t>(f)];

    // actor block, relative to the reactor root frame of this frame
    row.segment<3>(layout::A_OFF) = rotate_y(-yaw, ry.root() - root);
    {
      const double rel = wrap_angle(ry.root_yaw - yaw);
      row[layout::A_YAW + 0] = std::cos(rel);
      row[layout::A_YAW + 1] = std::sin(rel);
    }
    row.segment<3>(layout::A_LINVEL) = rotate_y(-vel_yaw, ry_next.root() - ry_prev.root()) * fps;
    for (int j = 0; j < Skeleton::kJointCount; ++j) {
      row.segment<3>(layout::A_JPOS + 3 * j) =
          rotate_y(-yaw, ry.joint_positions[static_cast<size_t>(j)] - root_xz);
      row.segment<3>(layout::A_JVEL + 3 * j) =
          rotate_y(-vel_yaw, ry_next.joint_positions[static_cast<size_t>(j)] -
                                 ry_prev.joint_positions[static_cast<size_t>(j)]) *
          fps;
    }
    for (int f = 0; f < 4; ++f) row[layout::A_FOOT + f] = contacts_y[static_cast<size_t>(n)][static_cast<size_t>(f)];

    const auto field = compute_interaction_field(rx, ry, skeleton, field_thresh);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) row[layout::F_BASE + 6 * i + j] = field(i, j);

    seq.reactor_states[static_cast<size_t>(out)] = {
        rotate_y(-seq.transform.yaw, root_xz - seq.transform.translation).x(),
        rotate_y(-seq.transform.yaw, root_xz - seq.transform.translation).z(),
        wrap_angle(yaw - seq.transform.yaw)};
  }
  return seq;
}

namespace detail {

inline RootState step_forward(const RootState& s, const Eigen::Ref<const VecX>& row, double dt) {
  RootState n;
  n.yaw = s.yaw + row[layout::R_ROOTVEL] * dt;
  const Vec3 d = rotate_y(s.yaw, Vec3(row[layout::R_ROOTVEL + 1], 0.0, row[layout::R_ROOTVEL + 2])) * dt;
  n.x = s.x + d.x();
  n.z = s.z + d.z();
  return n;
}

inline RootState step_backward(const RootState& s, const Eigen::Ref<const VecX>& row, double dt) {
  RootState p;
  p.yaw = s.yaw - row[layout::R_ROOTVEL] * dt;
  const Vec3 d = rotate_y(p.yaw, Vec3(row[layout::R_ROOTVEL + 1], 0.0, row[layout::R_ROOTVEL + 2])) * dt;
  p.x = s.x - d.x();
  p.z = s.z - d.z();
  return p;
}

inline GlobalPose pose_from_features(const Eigen::Ref<const VecX>& row, const RootState& state,
                                     const CanonicalTransform& transform) {
  GlobalPose pose;
  const double yaw_g = state.yaw + transform.yaw;
  const Vec3 root_c(state.x, 0.0, state.z);
  const Vec3 root_g = rotate_y(transform.yaw, root_c) + transform.translation;
  pose.joint_positions[0] = {root_g.x(), row[layout::R_HEIGHT], root_g.z()};
  pose.root_yaw = wrap_angle(yaw_g);
  for (int j = 1; j < Skeleton::kJointCount; ++j) {
    const Vec3 p(row[layout::R_JPOS + 3 * (j - 1)], row[layout::R_JPOS + 3 * (j - 1) + 1],
                 row[layout::R_JPOS + 3 * (j - 1) + 2]);
    pose.joint_positions[static_cast<size_t>(j)] = rotate_y(yaw_g, p) + Vec3(root_g.x(), 0.0, root_g.z());
  }
  return pose;
}

}  // namespace detail

// Rebuilds global reactor motion from canonical features. With an anchor
// index the root trajectory is integrated outward from that frame (the
// inverse of canonicalize); in continuation mode (`anchor_index` < 0) it is
// integrated forward from `start`, the canonical root state one frame
// before the first row — the planner's history-end state.
inline MotionClip recover(const MatX& frames, const CanonicalTransform& transform, double fps,
                          const RootState& start = {}, int anchor_index = -1) {
  if (frames.rows() == 0) throw InvalidInput("recover: empty feature sequence");
  if (frames.cols() != layout::kFrameDim) throw InvalidInput("recover: bad feature dimension");
  const int L = static_cast<int>(frames.rows());
  if (anchor_index >= L) throw InvalidInput("recover: anchor out of range");
  const double dt = 1.0 / fps;

  std::vector<RootState> states(static_cast<size_t>(L));
  if (anchor_index < 0) {
    RootState s = start;
    for (int n = 0; n < L; ++n) {
      s = detail::step_forward(s, frames.row(n), dt);
      states[static_cast<size_t>(n)] = s;
    }
  } else {
    states[static_cast<size_t>(anchor_index)] = RootState{};
    for (int n = anchor_index + 1; n < L; ++n)
      states[static_cast<size_t>(n)] = detail::step_forward(states[static_cast<size_t>(n - 1)], frames.row(n), dt);
    for (int n = anchor_index; n > 0; --n)
      states[static_cast<size_t>(n - 1)] = detail::step_backward(states[static_cast<size_t>(n)], frames.row(n), dt);
  }

  MotionClip clip;
  clip.fps = fps;
  clip.agent_id = AgentId::reactor;
  clip.frames.reserve(static_cast<size_t>(L));
  for (int n = 0; n < L; ++n)
    clip.frames.push_back(detail::pose_from_features(frames.row(n), states[static_cast<size_t>(n)], transform));
  return clip;
}

// Rigid map placing a recovered window so that `final_state` (its last-frame
// canonical root state) lands exactly on the anchor of `target`.
inline CanonicalTransform continuation_transform(const CanonicalTransform& target, const RootState& final_state) {
  CanonicalTransform g;
  g.yaw = target.yaw - final_state.yaw;
  g.translation = target.translation - rotate_y(g.yaw, Vec3(final_state.x, 0.0, final_state.z));
  return g;
}

// Reads the reactor's per-frame local joint positions back out of a feature
// row. Joint 0 is the root at (0, height, 0) in its own frame.
inline Vec3 reactor_local_joint(const Eigen::Ref<const VecX>& row, int j) {
  if (j == 0) return {0.0, row[layout::R_HEIGHT], 0.0};
  return Vec3(row[layout::R_JPOS + 3 * (j - 1)], row[layout::R_JPOS + 3 * (j - 1) + 1],
              row[layout::R_JPOS + 3 * (j - 1) + 2]);
}

inline Vec3 actor_local_joint(const Eigen::Ref<const VecX>& row, int j) {
  return Vec3(row[layout::A_JPOS + 3 * j], row[layout::A_JPOS + 3 * j + 1], row[layout::A_JPOS + 3 * j + 2]);
}

// Per-dimension z-score statistics. Binary dimensions (contact labels and
// the interaction field) keep mean 0 / std 1 so they pass through untouched.
struct NormStats {
  VecX mean = VecX::Zero(layout::kFrameDim);
  VecX std_dev = VecX::Ones(layout::kFrameDim);

  static NormStats compute(const std::vector<const MatX*>& frame_sets) {
    NormStats stats;
    double count = 0;
    VecX sum = VecX::Zero(layout::kFrameDim);
    VecX sum_sq = VecX::Zero(layout::kFrameDim);
    for (const MatX* m : frame_sets) {
      if (m->cols() != layout::kFrameDim) throw InvalidInput("NormStats: bad feature dimension");
      sum += m->colwise().sum().transpose();
      sum_sq += m->array().square().colwise().sum().matrix().transpose();
      count += static_cast<double>(m->rows());
    }
    if (count < 1) throw InvalidInput("NormStats: no frames");
    stats.mean = sum / count;
    for (int d = 0; d < layout::kFrameDim; ++d) {
      const double var = std::max(0.0, sum_sq[d] / count - stats.mean[d] * stats.mean[d]);
      stats.std_dev[d] = std::sqrt(var);
      if (layout::is_binary_dim(d)) {
        stats.mean[d] = 0.0;
        stats.std_dev[d] = 1.0;
      }
    }
    return stats;
  }

  double divisor(int d) const { return std::max(std_dev[d], 1e-8); }

  void validate() const {
    if (mean.size() != layout::kFrameDim || std_dev.size() != layout::kFrameDim)
      throw InvalidInput("NormStats: dimension mismatch");
  }
};

inline MatX normalize_features(const MatX& frames, const NormStats& stats) {
  stats.validate();
  if (frames.cols() != layout::kFrameDim) throw InvalidInput("normalize_features: dimension mismatch");
  MatX out = frames;
  for (int d = 0; d < layout::kFrameDim; ++d) {
    if (layout::is_binary_dim(d)) continue;
    out.col(d) = (frames.col(d).array() - stats.mean[d]) / stats.divisor(d);
  }
  return out;
}

inline MatX denormalize_features(const MatX& frames, const NormStats& stats) {
  stats.validate();
  if (frames.cols() != layout::kFrameDim) throw InvalidInput("denormalize_features: dimension mismatch");
  MatX out = frames;
  for (int d = 0; d < layout::kFrameDim; ++d) {
    if (layout::is_binary_dim(d)) continue;
    out.col(d) = frames.col(d).array() * stats.divisor(d) + stats.mean[d];
  }
  return out;
}

}  // namespace duet
