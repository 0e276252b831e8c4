#include <catch2/catch_amalgamated.hpp>

#include "duet/motion.hpp"
#include "duet/skeleton.hpp"

using namespace duet;

namespace {
MotionClip static_clip(int frames, double foot_height) {
  const auto skel = smpl22_skeleton();
  const auto rest = skel.rest_positions();
  MotionClip clip;
  clip.frames.resize(static_cast<size_t>(frames));
  for (auto& f : clip.frames) {
    for (int j = 0; j < Skeleton::kJointCount; ++j) f.joint_positions[static_cast<size_t>(j)] = rest[static_cast<size_t>(j)];
    for (int id : skel.foot_joint_ids) f.joint_positions[static_cast<size_t>(id)].y() = foot_height;
  }
  return clip;
}
}  // namespace

TEST_CASE("skeleton table is valid") {
  const auto skel = smpl22_skeleton();
  CHECK_NOTHROW(skel.validate());
  const auto rest = skel.rest_positions();
  CHECK(rest[joints::Pelvis].y() == Catch::Approx(0.95));
  CHECK(rest[joints::LFoot].y() == Catch::Approx(0.03));
  CHECK(rest[joints::Head].y() > 1.5);
}

TEST_CASE("foot fixed low and still is always in contact") {
  const auto skel = smpl22_skeleton();
  const auto labels = detect_foot_contacts(static_clip(10, 0.01), skel);
  for (const auto& f : labels)
    for (double v : f) CHECK(v == 1.0);
}

TEST_CASE("foot in mid-air is never in contact") {
  const auto skel = smpl22_skeleton();
  const auto labels = detect_foot_contacts(static_clip(10, 1.0), skel);
  for (const auto& f : labels)
    for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("low but sliding foot fails the speed test") {
  // 0.02 m per frame at 30 fps = 0.6 m/s, above the 0.15 m/s threshold
  const auto skel = smpl22_skeleton();
  auto clip = static_clip(10, 0.02);
  for (int n = 0; n < clip.size(); ++n)
    for (int id : skel.foot_joint_ids)
      clip.frames[static_cast<size_t>(n)].joint_positions[static_cast<size_t>(id)].x() += 0.02 * n;
  const auto labels = detect_foot_contacts(clip, skel, 0.05, 0.15);
  for (const auto& f : labels)
    for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("contact detection rejects bad input") {
  const auto skel = smpl22_skeleton();
  CHECK_THROWS_AS(detect_foot_contacts(MotionClip{}, skel), InvalidInput);
  CHECK_THROWS_AS(detect_foot_contacts(static_clip(5, 0.01), skel, -1.0, 0.1), InvalidInput);
}
