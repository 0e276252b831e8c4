#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "duet/common.hpp"
#include "duet/features.hpp"
#include "duet/motion.hpp"
#include "duet/skeleton.hpp"

namespace duet {

inline constexpr int kMclipVersion = 1;
inline constexpr int kManifestVersion = 1;

enum class Scenario { mirror, follow, handshake };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::mirror: return "mirror";
    case Scenario::follow: return "follow";
    case Scenario::handshake: return "handshake";
  }
  return "mirror";
}

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "mirror") return Scenario::mirror;
  if (s == "follow") return Scenario::follow;
  if (s == "handshake") return Scenario::handshake;
  throw InvalidInput("unknown scenario: " + s);
}

// One synthetic or imported actor/reactor pair. The adapter path for
// external datasets is exactly this: fill two clips and a label.
struct InteractionRecord {
  std::string name;
  MotionClip actor;
  MotionClip reactor;
  std::string label;
  Scenario scenario = Scenario::mirror;
  std::uint64_t seed = 0;

  void validate() const {
    if (actor.size() != reactor.size()) throw InvalidInput("record: clip lengths differ");
    if (actor.fps != reactor.fps) throw InvalidInput("record: clip fps differ");
    actor.validate();
    reactor.validate();
  }
};

// ---------------------------------------------------------------------------
// .mclip text container: JSON header line, then one line of 67 numbers per
// frame (22 x 3 joint positions + root yaw).

inline void save_mclip(const std::string& path, const MotionClip& clip) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  nlohmann::json header = {{"format", "mclip"},
                           {"version", kMclipVersion},
                           {"fps", clip.fps},
                           {"joint_count", Skeleton::kJointCount},
                           {"joint_names", smpl22_joint_names()},
                           {"agent_id", to_string(clip.agent_id)}};
  os << header.dump() << "\n";
  char buf[32];
  for (const auto& f : clip.frames) {
    for (const auto& p : f.joint_positions)
      for (int c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", p[c]);
        os << buf << ' ';
      }
    std::snprintf(buf, sizeof buf, "%.17g", f.root_yaw);
    os << buf << '\n';
  }
}

inline MotionClip load_mclip(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path + ":1: empty file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ":1: bad header: " + e.what());
  }
  if (header.value("format", "") != "mclip") throw ParseError(path + ":1: not an mclip file");
  const int version = header.value("version", -1);
  if (version != kMclipVersion)
    throw UnsupportedVersion(path + ": unsupported mclip version " + std::to_string(version));
  const int joint_count = header.value("joint_count", 0);
  if (joint_count != Skeleton::kJointCount)
    throw InvalidInput(path + ": expected " + std::to_string(Skeleton::kJointCount) + " joints, got " +
                       std::to_string(joint_count));
  MotionClip clip;
  clip.fps = header.value("fps", 0.0);
  clip.agent_id = header.value("agent_id", "actor") == std::string("reactor") ? AgentId::reactor : AgentId::actor;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    GlobalPose pose;
    for (int j = 0; j < Skeleton::kJointCount; ++j)
      for (int c = 0; c < 3; ++c)
        if (!(ls >> pose.joint_positions[static_cast<size_t>(j)][c]))
          throw ParseError(path + ":" + std::to_string(line_no) + ": truncated frame line");
    if (!(ls >> pose.root_yaw)) throw ParseError(path + ":" + std::to_string(line_no) + ": missing root yaw");
    clip.frames.push_back(pose);
  }
  clip.validate();
  return clip;
}

// ---------------------------------------------------------------------------
// Synthetic two-agent data with closed-form reaction rules. The actor walks
// a seeded smooth path with an articulated gait; the reactor is an exact
// function of the actor (mirror/follow) or a jointly planned meeting
// (handshake), so tests can check the rule directly.

namespace synth {

struct RootTrack {
  std::vector<Vec3> pos;    // y = nominal pelvis height
  std::vector<double> yaw;
};

struct GaitStyle {
  double step_freq = 1.4;      // Hz
  double step_length = 0.45;   // meters, full stride reach
  double foot_lift = 0.09;
  double arm_swing = 0.18;
  double pelvis_height = 0.95;
  double bob_amp = 0.015;
  double sway_amp = 0.03;
};

inline GaitStyle random_style(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GaitStyle g;
  g.step_freq = 1.2 + 0.5 * u(rng);
  g.step_length = 0.35 + 0.2 * u(rng);
  g.foot_lift = 0.06 + 0.05 * u(rng);
  g.arm_swing = 0.12 + 0.12 * u(rng);
  g.pelvis_height = 0.92 + 0.06 * u(rng);
  g.bob_amp = 0.01 + 0.01 * u(rng);
  return g;
}

// Smooth wandering root path from a few seeded low-frequency sinusoids.
inline RootTrack wander_track(int frames, double fps, Rng& rng, const GaitStyle& style) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double base_speed = 0.45 + 0.35 * u(rng);
  const double speed_amp = 0.1 * u(rng);
  const double speed_freq = 0.05 + 0.1 * u(rng);
  const double speed_phase = 2.0 * M_PI * u(rng);
  const double yaw0 = 2.0 * M_PI * u(rng) - M_PI;
  const double yaw_amp1 = 0.3 * u(rng), yaw_freq1 = 0.04 + 0.06 * u(rng), yaw_ph1 = 2.0 * M_PI * u(rng);
  const double yaw_amp2 = 0.12 * u(rng), yaw_freq2 = 0.1 + 0.1 * u(rng), yaw_ph2 = 2.0 * M_PI * u(rng);
  const Vec3 start(2.0 * u(rng) - 1.0, 0.0, 2.0 * u(rng) - 1.0);

  RootTrack track;
  track.pos.resize(static_cast<size_t>(frames));
  track.yaw.resize(static_cast<size_t>(frames));
  Vec3 p = start;
  const double dt = 1.0 / fps;
  for (int n = 0; n < frames; ++n) {
    const double tsec = n * dt;
    const double yaw = wrap_angle(yaw0 + yaw_amp1 * std::sin(2.0 * M_PI * yaw_freq1 * tsec + yaw_ph1) +
                                  yaw_amp2 * std::sin(2.0 * M_PI * yaw_freq2 * tsec + yaw_ph2));
    const double speed = std::max(0.0, base_speed + speed_amp * std::sin(2.0 * M_PI * speed_freq * tsec + speed_phase));
    track.yaw[static_cast<size_t>(n)] = yaw;
    track.pos[static_cast<size_t>(n)] = Vec3(p.x(), style.pelvis_height, p.z());
    p += heading_dir(yaw) * speed * dt;
  }
  return track;
}

// Straight approach to a stand point, easing out, then holding (handshake).
inline RootTrack approach_track(int frames, double fps, const Vec3& from, const Vec3& stand, double face_yaw,
                                int arrive_frame, double pelvis_height) {
  RootTrack track;
  track.pos.resize(static_cast<size_t>(frames));
  track.yaw.resize(static_cast<size_t>(frames));
  for (int n = 0; n < frames; ++n) {
    double s = arrive_frame <= 0 ? 1.0 : std::min(1.0, static_cast<double>(n) / arrive_frame);
    s = s * s * (3.0 - 2.0 * s);  // smoothstep
    const Vec3 p = from + (stand - from) * s;
    track.pos[static_cast<size_t>(n)] = Vec3(p.x(), pelvis_height, p.z());
    track.yaw[static_cast<size_t>(n)] = face_yaw;
  }
  (void)fps;
  return track;
}

// Builds a full 22-joint walking body over a root track. Feet hold their
// world position during stance, so ground-truth contacts have exactly zero
// sliding.
inline MotionClip build_body(const RootTrack& track, double fps, const GaitStyle& style,
                             double phase0, AgentId agent) {
  using namespace joints;
  const int frames = static_cast<int>(track.pos.size());
  const double dt = 1.0 / fps;
  MotionClip clip;
  clip.fps = fps;
  clip.agent_id = agent;
  clip.frames.resize(static_cast<size_t>(frames));

  struct FootState {
    bool planted = false;
    Vec3 pos = Vec3::Zero();
  };
  FootState feet[2];  // 0 = left, 1 = right
  const double foot_y = 0.03;
  double phase = phase0;

  for (int n = 0; n < frames; ++n) {
    GlobalPose& pose = clip.frames[static_cast<size_t>(n)];
    const Vec3 root_xz(track.pos[static_cast<size_t>(n)].x(), 0.0, track.pos[static_cast<size_t>(n)].z());
    const double yaw = track.yaw[static_cast<size_t>(n)];
    pose.root_yaw = yaw;

    double speed = 0.0;
    if (n + 1 < frames)
      speed = (track.pos[static_cast<size_t>(n + 1)] - track.pos[static_cast<size_t>(n)]).norm() * fps;
    else if (n > 0)
      speed = (track.pos[static_cast<size_t>(n)] - track.pos[static_cast<size_t>(n - 1)]).norm() * fps;

    const bool moving = speed > 0.05;
    if (moving || !(feet[0].planted && feet[1].planted)) phase += 2.0 * M_PI * style.step_freq * dt;

    const double bob = style.bob_amp * std::sin(2.0 * phase);
    const double pelvis_y = track.pos[static_cast<size_t>(n)].y() + bob;
    pose.joint_positions[Pelvis] = Vec3(root_xz.x(), pelvis_y, root_xz.z());

    // legs with plant-hold stance
    for (int side = 0; side < 2; ++side) {
      const double sgn = side == 0 ? 1.0 : -1.0;  // left = +X
      const double leg_phase = phase + (side == 0 ? 0.0 : M_PI);
      const double swing = std::sin(leg_phase);
      FootState& foot = feet[side];
      const double reach = moving ? 0.5 * style.step_length : 0.0;
      const Vec3 neutral = root_xz + rotate_y(yaw, Vec3(sgn * 0.11, 0.0, 0.0));
      if (swing <= 0.0) {
        if (!foot.planted) {
          foot.pos = neutral + rotate_y(yaw, Vec3(0.0, 0.0, reach));
          foot.pos.y() = foot_y;
          foot.planted = true;
        }
      } else {
        foot.planted = false;
      }
      Vec3 foot_pos;
      if (foot.planted) {
        foot_pos = foot.pos;
      } else {
        const double progress = swing;  // 0..1..0 over the swing half-cycle
        foot_pos = neutral + rotate_y(yaw, Vec3(0.0, 0.0, -std::cos(leg_phase) * reach));
        foot_pos.y() = foot_y + style.foot_lift * progress;
      }
      const int foot_id = side == 0 ? LFoot : RFoot;
      const int ankle_id = side == 0 ? LAnkle : RAnkle;
      const int knee_id = side == 0 ? LKnee : RKnee;
      const int hip_id = side == 0 ? LHip : RHip;
      pose.joint_positions[static_cast<size_t>(foot_id)] = foot_pos;
      const Vec3 ankle = foot_pos + rotate_y(yaw, Vec3(0.0, 0.04, -0.12));
      pose.joint_positions[static_cast<size_t>(ankle_id)] = ankle;
      const Vec3 hip = pose.joint_positions[Pelvis] + rotate_y(yaw, Vec3(sgn * 0.09, -0.06, 0.0));
      pose.joint_positions[static_cast<size_t>(hip_id)] = hip;
      // two-bone IK for the knee, bending forward
      const double l1 = 0.40, l2 = 0.42;
      const Vec3 ha = ankle - hip;
      const double d = std::min(ha.norm(), l1 + l2 - 1e-4);
      const Vec3 dir = ha.norm() > 1e-9 ? (ha / ha.norm()).eval() : Vec3(0, -1, 0);
      const double along = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d);
      const double out = std::sqrt(std::max(0.0, l1 * l1 - along * along));
      const Vec3 fwd = heading_dir(yaw);
      Vec3 bend = (fwd - fwd.dot(dir) * dir);
      if (bend.norm() < 1e-9) bend = Vec3(0, 0, 1);
      bend.normalize();
      pose.joint_positions[static_cast<size_t>(knee_id)] = hip + dir * along + bend * out;
    }

    // spine, neck, head with slight sway
    const double sway = style.sway_amp * std::sin(phase);
    const Vec3 up_sway = rotate_y(yaw, Vec3(sway, 0.0, 0.0));
    const Vec3 spine1 = pose.joint_positions[Pelvis] + Vec3(0, 0.11, 0) + 0.3 * up_sway;
    const Vec3 spine2 = spine1 + Vec3(0, 0.13, 0) + 0.3 * up_sway;
    const Vec3 spine3 = spine2 + Vec3(0, 0.06, 0) + 0.2 * up_sway;
    const Vec3 neck = spine3 + Vec3(0, 0.22, 0) + 0.2 * up_sway;
    const Vec3 head = neck + Vec3(0, 0.17, 0);
    pose.joint_positions[Spine1] = spine1;
    pose.joint_positions[Spine2] = spine2;
    pose.joint_positions[Spine3] = spine3;
    pose.joint_positions[Neck] = neck;
    pose.joint_positions[Head] = head;

    // arms, swinging opposite the legs
    for (int side = 0; side < 2; ++side) {
      const double sgn = side == 0 ? 1.0 : -1.0;
      const double arm_phase = phase + (side == 0 ? M_PI : 0.0);
      const double swing_z = (moving ? style.arm_swing : 0.02) * std::sin(arm_phase);
      const int collar_id = side == 0 ? LCollar : RCollar;
      const int shoulder_id = side == 0 ? LShoulder : RShoulder;
      const int elbow_id = side == 0 ? LElbow : RElbow;
      const int wrist_id = side == 0 ? LWrist : RWrist;
      const Vec3 collar = spine3 + rotate_y(yaw, Vec3(sgn * 0.08, 0.12, 0.0));
      const Vec3 shoulder = collar + rotate_y(yaw, Vec3(sgn * 0.10, 0.02, 0.0));
      const Vec3 elbow = shoulder + rotate_y(yaw, Vec3(sgn * 0.02, -0.26, 0.45 * swing_z));
      const Vec3 wrist = elbow + rotate_y(yaw, Vec3(0.0, -0.24, swing_z));
      pose.joint_positions[static_cast<size_t>(collar_id)] = collar;
      pose.joint_positions[static_cast<size_t>(shoulder_id)] = shoulder;
      pose.joint_positions[static_cast<size_t>(elbow_id)] = elbow;
      pose.joint_positions[static_cast<size_t>(wrist_id)] = wrist;
    }
  }
  return clip;
}

inline GlobalPose reflect_x(const GlobalPose& pose) {
  GlobalPose out = pose;
  for (auto& p : out.joint_positions) p.x() = -p.x();
  out.root_yaw = wrap_angle(-pose.root_yaw);
  return out;
}

}  // namespace synth

inline constexpr int kMirrorDelayFrames = 3;
inline constexpr double kFollowOffsetMeters = 1.0;

// Generates one record. mirror: reactor = actor reflected across the x = 0
// plane with a 3-frame delay. follow: reactor = actor shifted by a fixed
// 1 m world offset opposite its initial heading. handshake: both agents
// approach and clasp right wrists at the midpoint for at least 30 frames.
inline InteractionRecord synth_generate(Scenario scenario, int duration_frames, std::uint64_t seed,
                                        double fps = defaults::kFps) {
  const int min_len = defaults::kHistoryLen + defaults::kPredictLen;
  if (duration_frames < min_len)
    throw InvalidInput("synth_generate: duration must be at least " + std::to_string(min_len) + " frames");
  Rng rng(seed);
  InteractionRecord rec;
  rec.scenario = scenario;
  rec.label = to_string(scenario);
  rec.seed = seed;
  rec.name = std::string(to_string(scenario)) + "_" + std::to_string(seed);

  if (scenario == Scenario::handshake) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto style_a = synth::random_style(rng);
    const auto style_b = synth::random_style(rng);
    const double cx = 2.0 * u(rng) - 1.0, cz = 2.0 * u(rng) - 1.0;
    const double axis = 2.0 * M_PI * u(rng) - M_PI;
    const Vec3 dir = heading_dir(axis);
    const double start_dist = 2.2 + 0.8 * u(rng);
    const Vec3 center(cx, 0.0, cz);
    const int arrive = std::max(30, duration_frames / 3);
    auto track_a = synth::approach_track(duration_frames, fps, center - dir * start_dist, center - dir * 0.42,
                                         axis, arrive, style_a.pelvis_height);
    auto track_b = synth::approach_track(duration_frames, fps, center + dir * start_dist, center + dir * 0.42,
                                         wrap_angle(axis + M_PI), arrive, style_b.pelvis_height);
    rec.actor = synth::build_body(track_a, fps, style_a, 2.0 * M_PI * u(rng), AgentId::actor);
    rec.reactor = synth::build_body(track_b, fps, style_b, 2.0 * M_PI * u(rng), AgentId::reactor);
    // clasp: both right wrists meet at the midpoint once both have arrived
    const int clasp_start = arrive + 5;
    const int clasp_end = duration_frames;
    for (int n = clasp_start; n < clasp_end; ++n) {
      const Vec3 root_a = rec.actor.frames[static_cast<size_t>(n)].joint_positions[joints::Pelvis];
      const Vec3 root_b = rec.reactor.frames[static_cast<size_t>(n)].joint_positions[joints::Pelvis];
      Vec3 meet = 0.5 * (root_a + root_b);
      meet.y() = 1.02;
      for (MotionClip* clip : {&rec.actor, &rec.reactor}) {
        auto& pose = clip->frames[static_cast<size_t>(n)];
        const Vec3 shoulder = pose.joint_positions[joints::RShoulder];
        pose.joint_positions[joints::RWrist] = meet;
        pose.joint_positions[joints::RElbow] = 0.5 * (shoulder + meet) + Vec3(0.0, -0.06, 0.0);
      }
    }
    rec.validate();
    return rec;
  }

  const auto style = synth::random_style(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double phase0 = 2.0 * M_PI * u(rng);
  const auto track = synth::wander_track(duration_frames, fps, rng, style);
  rec.actor = synth::build_body(track, fps, style, phase0, AgentId::actor);

  rec.reactor.fps = fps;
  rec.reactor.agent_id = AgentId::reactor;
  rec.reactor.frames.resize(static_cast<size_t>(duration_frames));
  if (scenario == Scenario::mirror) {
    for (int n = 0; n < duration_frames; ++n) {
      const int src = std::max(0, n - kMirrorDelayFrames);
      rec.reactor.frames[static_cast<size_t>(n)] = synth::reflect_x(rec.actor.frames[static_cast<size_t>(src)]);
    }
  } else {  // follow: fixed world-space trailing offset
    const Vec3 offset = -kFollowOffsetMeters * heading_dir(rec.actor.frames[0].root_yaw);
    for (int n = 0; n < duration_frames; ++n) {
      GlobalPose pose = rec.actor.frames[static_cast<size_t>(n)];
      for (auto& p : pose.joint_positions) p += offset;
      rec.reactor.frames[static_cast<size_t>(n)] = pose;
    }
  }
  rec.validate();
  return rec;
}

// ---------------------------------------------------------------------------
// Dataset directory: manifest.json + per-record .mclip pairs.

struct DatasetManifest {
  int version = kManifestVersion;
  double fps = defaults::kFps;
  NormStats stats;
  std::vector<std::string> vocabulary;
  struct Entry {
    std::string name;
    std::string label;
    Scenario scenario = Scenario::mirror;
    std::uint64_t seed = 0;
    int frames = 0;
    std::string actor_file;
    std::string reactor_file;
  };
  std::vector<Entry> entries;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<InteractionRecord> records;
};

inline NormStats compute_dataset_stats(const std::vector<InteractionRecord>& records, const Skeleton& skeleton,
                                       double field_thresh = defaults::kFieldThresh) {
  std::vector<MatX> all_frames;
  all_frames.reserve(records.size());
  for (const auto& rec : records) {
    const auto cx = detect_foot_contacts(rec.reactor, skeleton);
    const auto cy = detect_foot_contacts(rec.actor, skeleton);
    all_frames.push_back(canonicalize(rec.reactor, rec.actor, skeleton, 0, cx, cy, field_thresh).frames);
  }
  std::vector<const MatX*> ptrs;
  ptrs.reserve(all_frames.size());
  for (const auto& m : all_frames) ptrs.push_back(&m);
  return NormStats::compute(ptrs);
}

inline void save_record(const std::string& dir, const InteractionRecord& rec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_mclip((fs::path(dir) / (rec.name + ".actor.mclip")).string(), rec.actor);
  save_mclip((fs::path(dir) / (rec.name + ".reactor.mclip")).string(), rec.reactor);
}

inline InteractionRecord load_record(const std::string& dir, const DatasetManifest::Entry& entry) {
  namespace fs = std::filesystem;
  InteractionRecord rec;
  rec.name = entry.name;
  rec.label = entry.label;
  rec.scenario = entry.scenario;
  rec.seed = entry.seed;
  rec.actor = load_mclip((fs::path(dir) / entry.actor_file).string());
  rec.reactor = load_mclip((fs::path(dir) / entry.reactor_file).string());
  rec.validate();
  return rec;
}

inline void save_dataset(const std::string& dir, const Dataset& dataset) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json j;
  j["format"] = "duet-dataset";
  j["version"] = dataset.manifest.version;
  j["fps"] = dataset.manifest.fps;
  j["vocabulary"] = dataset.manifest.vocabulary;
  j["stats"] = {{"mean", std::vector<double>(dataset.manifest.stats.mean.data(),
                                             dataset.manifest.stats.mean.data() + layout::kFrameDim)},
                {"std", std::vector<double>(dataset.manifest.stats.std_dev.data(),
                                            dataset.manifest.stats.std_dev.data() + layout::kFrameDim)}};
  j["records"] = nlohmann::json::array();
  for (size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& rec = dataset.records[i];
    save_record(dir, rec);
    j["records"].push_back({{"name", rec.name},
                            {"label", rec.label},
                            {"scenario", to_string(rec.scenario)},
                            {"seed", rec.seed},
                            {"frames", rec.actor.size()},
                            {"actor_file", rec.name + ".actor.mclip"},
                            {"reactor_file", rec.name + ".reactor.mclip"}});
  }
  std::ofstream os((fs::path(dir) / "manifest.json").string());
  if (!os) throw Error("cannot write manifest in " + dir);
  os << j.dump(2) << "\n";
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream is((fs::path(dir) / "manifest.json").string());
  if (!is) throw Error("cannot open manifest in " + dir);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(dir + "/manifest.json: " + e.what());
  }
  if (j.value("format", "") != "duet-dataset") throw ParseError(dir + ": not a dataset directory");
  const int version = j.value("version", -1);
  if (version != kManifestVersion)
    throw UnsupportedVersion(dir + ": unsupported dataset version " + std::to_string(version));

  Dataset ds;
  ds.manifest.version = version;
  ds.manifest.fps = j.value("fps", static_cast<double>(defaults::kFps));
  ds.manifest.vocabulary = j.value("vocabulary", std::vector<std::string>{});
  const auto mean = j["stats"]["mean"].get<std::vector<double>>();
  const auto stdv = j["stats"]["std"].get<std::vector<double>>();
  if (static_cast<int>(mean.size()) != layout::kFrameDim || static_cast<int>(stdv.size()) != layout::kFrameDim)
    throw ParseError(dir + ": stats dimension mismatch");
  ds.manifest.stats.mean = Eigen::Map<const VecX>(mean.data(), layout::kFrameDim);
  ds.manifest.stats.std_dev = Eigen::Map<const VecX>(stdv.data(), layout::kFrameDim);

  for (const auto& r : j["records"]) {
    DatasetManifest::Entry e;
    e.name = r.value("name", "");
    e.label = r.value("label", "");
    e.scenario = scenario_from_string(r.value("scenario", "mirror"));
    e.seed = r.value("seed", 0ull);
    e.frames = r.value("frames", 0);
    e.actor_file = r.value("actor_file", "");
    e.reactor_file = r.value("reactor_file", "");
    ds.manifest.entries.push_back(e);
    ds.records.push_back(load_record(dir, e));
  }
  return ds;
}

inline Dataset generate_dataset(const std::vector<Scenario>& scenarios, int clips_per_scenario, int duration_frames,
                                std::uint64_t seed, const Skeleton& skeleton,
                                double field_thresh = defaults::kFieldThresh) {
  Dataset ds;
  std::uint64_t next = seed;
  for (Scenario sc : scenarios) {
    ds.manifest.vocabulary.push_back(to_string(sc));
    for (int c = 0; c < clips_per_scenario; ++c) ds.records.push_back(synth_generate(sc, duration_frames, next++));
  }
  ds.manifest.stats = compute_dataset_stats(ds.records, skeleton, field_thresh);
  for (const auto& rec : ds.records) {
    DatasetManifest::Entry e;
    e.name = rec.name;
    e.label = rec.label;
    e.scenario = rec.scenario;
    e.seed = rec.seed;
    e.frames = rec.actor.size();
    e.actor_file = rec.name + ".actor.mclip";
    e.reactor_file = rec.name + ".reactor.mclip";
    ds.manifest.entries.push_back(e);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Training crops: h history frames plus N consecutive k-frame windows at a
// uniformly random valid offset. Records too short for one crop are skipped
// with a warning.

struct CropSpec {
  int record = 0;
  int offset = 0;
};

class CropSampler {
 public:
  CropSampler(const std::vector<InteractionRecord>& records, int windows, int history_len, int predict_len,
              bool warn = true)
      : records_(&records), windows_(windows), history_len_(history_len), predict_len_(predict_len) {
    if (windows < 1) throw InvalidInput("crop sampler: N must be >= 1");
    const int need = crop_length();
    for (size_t i = 0; i < records.size(); ++i) {
      if (records[i].actor.size() >= need) {
        eligible_.push_back(static_cast<int>(i));
      } else if (warn) {
        std::cerr << "warning: record '" << records[i].name << "' shorter than " << need << " frames, skipped\n";
      }
    }
    if (eligible_.empty()) throw InvalidInput("crop sampler: no record is long enough");
  }

  int crop_length() const { return history_len_ + windows_ * predict_len_; }

  int valid_offsets(int record_index) const {
    const int len = (*records_)[static_cast<size_t>(record_index)].actor.size();
    return std::max(0, len - crop_length() + 1);
  }

  CropSpec draw(Rng& rng) const {
    std::uniform_int_distribution<size_t> pick(0, eligible_.size() - 1);
    const int rec = eligible_[pick(rng)];
    std::uniform_int_distribution<int> off(0, valid_offsets(rec) - 1);
    return {rec, off(rng)};
  }

  const std::vector<int>& eligible() const { return eligible_; }

 private:
  const std::vector<InteractionRecord>* records_;
  int windows_;
  int history_len_;
  int predict_len_;
  std::vector<int> eligible_;
};

}  // namespace duet
