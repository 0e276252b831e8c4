#pragma once

#include <array>
#include <string>
#include <vector>

#include "duet/common.hpp"

namespace duet {

// SMPL-order 22-joint body. parent_index[0] == -1, every other parent
// precedes its child. The id lists select joints for foot contacts, the
// 6x6 interaction field and the 10x10 cross-distance feature.
struct Skeleton {
  static constexpr int kJointCount = 22;

  std::array<int, kJointCount> parent_index{};
  std::array<Vec3, kJointCount> rest_offsets{};  // parent-relative, meters
  std::array<int, 4> foot_joint_ids{};
  std::array<int, 6> contact_field_ids{};
  std::array<int, 10> cross_distance_ids{};

  const Vec3& rest_offset(int j) const { return rest_offsets[static_cast<size_t>(j)]; }

  // Rest joint positions in a global frame with the pelvis vertically above
  // the origin and heading +Z.
  std::array<Vec3, kJointCount> rest_positions() const {
    std::array<Vec3, kJointCount> out;
    out[0] = rest_offsets[0];
    for (int j = 1; j < kJointCount; ++j)
      out[static_cast<size_t>(j)] = out[static_cast<size_t>(parent_index[static_cast<size_t>(j)])] +
                                    rest_offsets[static_cast<size_t>(j)];
    return out;
  }

  void validate() const {
    for (int j = 1; j < kJointCount; ++j) {
      const int p = parent_index[static_cast<size_t>(j)];
      if (p < 0 || p >= j) throw InvalidInput("skeleton: parent index must precede joint " + std::to_string(j));
    }
    if (parent_index[0] != -1) throw InvalidInput("skeleton: joint 0 must be the root");
    auto check_ids = [](const auto& ids, const char* what) {
      for (size_t a = 0; a < ids.size(); ++a) {
        if (ids[a] < 0 || ids[a] >= kJointCount)
          throw InvalidInput(std::string("skeleton: ") + what + " id out of range");
        for (size_t b = a + 1; b < ids.size(); ++b)
          if (ids[a] == ids[b]) throw InvalidInput(std::string("skeleton: duplicate ") + what + " id");
      }
    };
    check_ids(foot_joint_ids, "foot");
    check_ids(contact_field_ids, "contact-field");
    check_ids(cross_distance_ids, "cross-distance");
  }
};

namespace joints {
enum : int {
  Pelvis = 0,
  LHip = 1,
  RHip = 2,
  Spine1 = 3,
  LKnee = 4,
  RKnee = 5,
  Spine2 = 6,
  LAnkle = 7,
  RAnkle = 8,
  Spine3 = 9,
  LFoot = 10,
  RFoot = 11,
  Neck = 12,
  LCollar = 13,
  RCollar = 14,
  Head = 15,
  LShoulder = 16,
  RShoulder = 17,
  LElbow = 18,
  RElbow = 19,
  LWrist = 20,
  RWrist = 21,
};
}

inline const std::vector<std::string>& smpl22_joint_names() {
  static const std::vector<std::string> names = {
      "pelvis",   "l_hip",      "r_hip",      "spine1",  "l_knee",     "r_knee",
      "spine2",   "l_ankle",    "r_ankle",    "spine3",  "l_foot",     "r_foot",
      "neck",     "l_collar",   "r_collar",   "head",    "l_shoulder", "r_shoulder",
      "l_elbow",  "r_elbow",    "l_wrist",    "r_wrist"};
  return names;
}

// Canonical body used throughout: SMPL-22 topology with desk-scale limb
// lengths (meters, Y up, left = +X). Feet rest slightly above y = 0.
inline Skeleton smpl22_skeleton() {
  using namespace joints;
  Skeleton s;
  s.parent_index = {-1, Pelvis, Pelvis, Pelvis, LHip,    RHip,    Spine1,  LKnee,
                    RKnee, Spine2, LAnkle, RAnkle, Spine3, Spine3, Spine3, Neck,
                    LCollar, RCollar, LShoulder, RShoulder, LElbow, RElbow};
  s.rest_offsets[Pelvis] = {0.0, 0.95, 0.0};
  s.rest_offsets[LHip] = {0.09, -0.06, 0.0};
  s.rest_offsets[RHip] = {-0.09, -0.06, 0.0};
  s.rest_offsets[Spine1] = {0.0, 0.11, 0.0};
  s.rest_offsets[LKnee] = {0.0, -0.40, 0.0};
  s.rest_offsets[RKnee] = {0.0, -0.40, 0.0};
  s.rest_offsets[Spine2] = {0.0, 0.13, 0.0};
  s.rest_offsets[LAnkle] = {0.0, -0.42, 0.0};
  s.rest_offsets[RAnkle] = {0.0, -0.42, 0.0};
  s.rest_offsets[Spine3] = {0.0, 0.06, 0.0};
  s.rest_offsets[LFoot] = {0.0, -0.04, 0.12};
  s.rest_offsets[RFoot] = {0.0, -0.04, 0.12};
  s.rest_offsets[Neck] = {0.0, 0.22, 0.0};
  s.rest_offsets[LCollar] = {0.08, 0.12, 0.0};
  s.rest_offsets[RCollar] = {-0.08, 0.12, 0.0};
  s.rest_offsets[Head] = {0.0, 0.17, 0.0};
  s.rest_offsets[LShoulder] = {0.10, 0.02, 0.0};
  s.rest_offsets[RShoulder] = {-0.10, 0.02, 0.0};
  s.rest_offsets[LElbow] = {0.0, -0.28, 0.0};  // arms hang down at rest
  s.rest_offsets[RElbow] = {0.0, -0.28, 0.0};
  s.rest_offsets[LWrist] = {0.0, -0.25, 0.0};
  s.rest_offsets[RWrist] = {0.0, -0.25, 0.0};
  s.foot_joint_ids = {LAnkle, RAnkle, LFoot, RFoot};
  s.contact_field_ids = {Pelvis, Head, LAnkle, RAnkle, LWrist, RWrist};
  s.cross_distance_ids = {Pelvis, LKnee, RKnee, LFoot, RFoot, LShoulder, RShoulder, Head, LWrist, RWrist};
  s.validate();
  return s;
}

}  // namespace duet
