#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <iostream>
#include <numeric>
#include <vector>

#include "duet/dataset.hpp"
#include "duet/denoiser.hpp"
#include "duet/features.hpp"
#include "duet/motion.hpp"

namespace duet {

// Gaussian moments of a feature set for Frechet-distance computations.
struct FeatureStats {
  VecX mean;
  MatX cov;
  long count = 0;

  static FeatureStats fit(const std::vector<VecX>& features) {
    if (features.empty()) throw InvalidInput("FeatureStats: empty feature set");
    const int dim = static_cast<int>(features.front().size());
    FeatureStats s;
    s.count = static_cast<long>(features.size());
    s.mean = VecX::Zero(dim);
    for (const auto& f : features) {
      if (f.size() != dim) throw InvalidInput("FeatureStats: inconsistent dimensions");
      s.mean += f;
    }
    s.mean /= static_cast<double>(s.count);
    s.cov = MatX::Zero(dim, dim);
    for (const auto& f : features) {
      const VecX d = f - s.mean;
      s.cov += d * d.transpose();
    }
    s.cov /= static_cast<double>(std::max<long>(1, s.count - 1));
    return s;
  }
};

namespace detail {

// Symmetric PSD square root by eigendecomposition. Eigenvalues below -1e-8
// mean the input was not PSD; small negatives are clamped to zero.
inline MatX sqrt_psd(const MatX& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<MatX> eig((m + m.transpose()) / 2.0);
  VecX vals = eig.eigenvalues();
  for (int i = 0; i < vals.size(); ++i) {
    if (vals[i] < -1e-8) throw InvalidInput(std::string(what) + ": covariance is not positive semidefinite");
    vals[i] = std::sqrt(std::max(0.0, vals[i]));
  }
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

// Frechet distance between Gaussian feature statistics:
// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)), with the matrix square
// root taken through the symmetric form (Sa^(1/2) Sb Sa^(1/2))^(1/2).
inline double fid(const FeatureStats& a, const FeatureStats& b) {
  if (a.mean.size() != b.mean.size()) throw InvalidInput("fid: dimension mismatch");
  const MatX root_a = detail::sqrt_psd(a.cov, "fid");
  const MatX inner = root_a * b.cov * root_a;
  Eigen::SelfAdjointEigenSolver<MatX> eig((inner + inner.transpose()) / 2.0);
  double trace_sqrt = 0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()[i];
    if (v < -1e-8) throw InvalidInput("fid: product matrix is not positive semidefinite");
    trace_sqrt += std::sqrt(std::max(0.0, v));
  }
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
  return std::max(0.0, d);
}

// Mean pairwise distance between two disjoint subsets of size S_d drawn
// from the feature set. Shrinks S_d to floor(n/2) with a warning when the
// set is small.
inline double diversity(const std::vector<VecX>& features, int s_d = 200, std::uint64_t seed = 0) {
  const int n = static_cast<int>(features.size());
  if (n < 2) throw InvalidInput("diversity: need at least two samples");
  if (n < 2 * s_d) {
    std::cerr << "warning: diversity subset size reduced from " << s_d << " to " << n / 2 << "\n";
    s_d = n / 2;
  }
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  double sum = 0;
  for (int i = 0; i < s_d; ++i)
    sum += (features[static_cast<size_t>(idx[static_cast<size_t>(i)])] -
            features[static_cast<size_t>(idx[static_cast<size_t>(i + s_d)])])
               .norm();
  return sum / static_cast<double>(s_d);
}

// Mean Euclidean distance over paired motion/text features.
inline double mmdist(const std::vector<VecX>& motion_features, const std::vector<VecX>& text_features) {
  if (motion_features.size() != text_features.size()) throw InvalidInput("mmdist: length mismatch");
  if (motion_features.empty()) throw InvalidInput("mmdist: empty feature lists");
  double sum = 0;
  for (size_t i = 0; i < motion_features.size(); ++i) {
    if (motion_features[i].size() != text_features[i].size()) throw InvalidInput("mmdist: dimension mismatch");
    sum += (motion_features[i] - text_features[i]).norm();
  }
  return sum / static_cast<double>(motion_features.size());
}

inline constexpr int kMotionFeatureDim = 256;

namespace detail {

inline constexpr int kDescriptorDim = 246;

// Fixed seeded orthogonal embedding of the raw descriptor into 256 dims,
// shared by every extraction call.
inline const MatX& motion_feature_projection() {
  static const MatX proj = [] {
    Rng rng(0xD0E7F00Dull);
    const MatX g = normal_matrix(kMotionFeatureDim, kDescriptorDim, rng);
    Eigen::HouseholderQR<MatX> qr(g);
    return MatX(qr.householderQ() * MatX::Identity(kMotionFeatureDim, kDescriptorDim));
  }();
  return proj;
}

}  // namespace detail

// Deterministic kinematic descriptor of a reactor window: moments of local
// joint positions, velocities and root motion plus contact rates, embedded
// into 256 dimensions by a fixed seeded orthogonal map. A stand-in for a
// learned feature extractor, so absolute FID values are internal to this
// suite.
inline VecX extract_motion_features(const MotionClip& window, const Skeleton& skeleton) {
  if (window.size() < 2) throw InvalidInput("extract_motion_features: need at least two frames");
  const int L = window.size();
  const auto contacts = detect_foot_contacts(window, skeleton);

  const int J = Skeleton::kJointCount;
  MatX local_pos(L, 63);
  MatX local_vel(L, 66);
  VecX yaw_rate(L), root_speed(L), root_height(L);
  for (int n = 0; n < L; ++n) {
    const auto& pose = window.frames[static_cast<size_t>(n)];
    const int prev = (n == 0) ? 0 : n - 1;
    const int next = (n == 0) ? std::min(1, L - 1) : n;
    const auto& pose_prev = window.frames[static_cast<size_t>(prev)];
    const auto& pose_next = window.frames[static_cast<size_t>(next)];
    const Vec3 root_xz(pose.root().x(), 0.0, pose.root().z());
    for (int j = 1; j < J; ++j)
      local_pos.row(n).segment<3>(3 * (j - 1)) =
          rotate_y(-pose.root_yaw, pose.joint_positions[static_cast<size_t>(j)] - root_xz);
    for (int j = 0; j < J; ++j)
      local_vel.row(n).segment<3>(3 * j) =
          rotate_y(-pose_prev.root_yaw, pose_next.joint_positions[static_cast<size_t>(j)] -
                                            pose_prev.joint_positions[static_cast<size_t>(j)]) *
          window.fps;
    yaw_rate[n] = wrap_angle(pose_next.root_yaw - pose_prev.root_yaw) * window.fps;
    const Vec3 dv = pose_next.root() - pose_prev.root();
    root_speed[n] = std::sqrt(dv.x() * dv.x() + dv.z() * dv.z()) * window.fps;
    root_height[n] = pose.root().y();
  }

  auto mean_std = [&](const VecX& v, double& m, double& s) {
    m = v.mean();
    s = std::sqrt(std::max(0.0, v.array().square().mean() - m * m));
  };

  // 63*2 position moments + 22*2 speed moments + 66 velocity means +
  // 3*2 root moments + 4 contact rates = 246
  VecX d(detail::kDescriptorDim);
  int at = 0;
  for (int c = 0; c < 63; ++c) {
    double m, s;
    mean_std(local_pos.col(c), m, s);
    d[at++] = m;
    d[at++] = s;
  }
  for (int j = 0; j < J; ++j) {
    VecX speeds(L);
    for (int n = 0; n < L; ++n) speeds[n] = local_vel.row(n).segment<3>(3 * j).norm();
    double m, s;
    mean_std(speeds, m, s);
    d[at++] = m;
    d[at++] = s;
  }
  for (int c = 0; c < 66; ++c) d[at++] = local_vel.col(c).mean();
  double m, s;
  mean_std(yaw_rate, m, s);
  d[at++] = m;
  d[at++] = s;
  mean_std(root_speed, m, s);
  d[at++] = m;
  d[at++] = s;
  mean_std(root_height, m, s);
  d[at++] = m;
  d[at++] = s;
  for (int f = 0; f < 4; ++f) {
    double rate = 0;
    for (const auto& c : contacts) rate += c[static_cast<size_t>(f)];
    d[at++] = rate / L;
  }

  return detail::motion_feature_projection() * d;
}

// ---------------------------------------------------------------------------
// Physics plausibility. The body surface is approximated by spheres of
// `joint_radius` around every joint.

struct PhysicsMetrics {
  double penetration_mm = 0;
  double floating_mm = 0;
  double skating_mm_per_frame = 0;
};

inline PhysicsMetrics physics_metrics(const MotionClip& clip, const Skeleton& skeleton, double joint_radius = 0.06) {
  if (clip.empty()) throw InvalidInput("physics_metrics: empty clip");
  const auto contacts = detect_foot_contacts(clip, skeleton);
  double pen_sum = 0, float_sum = 0;
  long pen_frames = 0, float_frames = 0;
  for (int n = 0; n < clip.size(); ++n) {
    double bottom = std::numeric_limits<double>::infinity();
    for (const auto& p : clip.frames[static_cast<size_t>(n)].joint_positions)
      bottom = std::min(bottom, p.y() - joint_radius);
    bool any_contact = false;
    for (double c : contacts[static_cast<size_t>(n)]) any_contact = any_contact || c > 0.5;
    if (bottom < 0) {
      pen_sum += -bottom;
      ++pen_frames;
    } else if (bottom > 0 && !any_contact) {
      // frames standing on a labeled contact are regular stance, not floating
      float_sum += bottom;
      ++float_frames;
    }
  }
  PhysicsMetrics out;
  out.penetration_mm = pen_frames ? 1000.0 * pen_sum / static_cast<double>(pen_frames) : 0.0;
  out.floating_mm = float_frames ? 1000.0 * float_sum / static_cast<double>(float_frames) : 0.0;

  double skate_sum = 0;
  long skate_events = 0;
  for (int n = 1; n < clip.size(); ++n) {
    for (int f = 0; f < 4; ++f) {
      if (contacts[static_cast<size_t>(n)][static_cast<size_t>(f)] > 0.5 &&
          contacts[static_cast<size_t>(n - 1)][static_cast<size_t>(f)] > 0.5) {
        const int j = skeleton.foot_joint_ids[static_cast<size_t>(f)];
        const Vec3 d = clip.frames[static_cast<size_t>(n)].joint_positions[static_cast<size_t>(j)] -
                       clip.frames[static_cast<size_t>(n - 1)].joint_positions[static_cast<size_t>(j)];
        skate_sum += std::sqrt(d.x() * d.x() + d.z() * d.z());
        ++skate_events;
      }
    }
  }
  out.skating_mm_per_frame = skate_events ? 1000.0 * skate_sum / static_cast<double>(skate_events) : 0.0;
  return out;
}

// Maximum per-frame overlap volume (liters) between the two agents'
// joint-sphere unions, by voxel counting over the intersection of their
// bounding boxes.
inline double interpenetration_volume(const MotionClip& clip_x, const MotionClip& clip_y, const Skeleton& skeleton,
                                      const std::vector<double>& joint_radii, double grid = 0.01) {
  if (clip_x.size() != clip_y.size()) throw InvalidInput("interpenetration_volume: clip length mismatch");
  if (static_cast<int>(joint_radii.size()) != Skeleton::kJointCount)
    throw InvalidInput("interpenetration_volume: need one radius per joint");
  (void)skeleton;

  auto bbox = [&](const GlobalPose& pose, Vec3& lo, Vec3& hi) {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (int j = 0; j < Skeleton::kJointCount; ++j) {
      const double r = joint_radii[static_cast<size_t>(j)];
      const Vec3& p = pose.joint_positions[static_cast<size_t>(j)];
      lo = lo.cwiseMin(p - Vec3::Constant(r));
      hi = hi.cwiseMax(p + Vec3::Constant(r));
    }
  };
  auto inside = [&](const GlobalPose& pose, const Vec3& q) {
    for (int j = 0; j < Skeleton::kJointCount; ++j) {
      const double r = joint_radii[static_cast<size_t>(j)];
      if ((pose.joint_positions[static_cast<size_t>(j)] - q).squaredNorm() <= r * r) return true;
    }
    return false;
  };

  double max_liters = 0;
  for (int n = 0; n < clip_x.size(); ++n) {
    const auto& pa = clip_x.frames[static_cast<size_t>(n)];
    const auto& pb = clip_y.frames[static_cast<size_t>(n)];
    Vec3 lo_a, hi_a, lo_b, hi_b;
    bbox(pa, lo_a, hi_a);
    bbox(pb, lo_b, hi_b);
    const Vec3 lo = lo_a.cwiseMax(lo_b);
    const Vec3 hi = hi_a.cwiseMin(hi_b);
    if ((hi - lo).minCoeff() <= 0) continue;
    long count = 0;
    for (double x = lo.x() + grid / 2; x < hi.x(); x += grid)
      for (double y = lo.y() + grid / 2; y < hi.y(); y += grid)
        for (double z = lo.z() + grid / 2; z < hi.z(); z += grid) {
          const Vec3 q(x, y, z);
          if (inside(pa, q) && inside(pb, q)) ++count;
        }
    max_liters = std::max(max_liters, 1000.0 * static_cast<double>(count) * grid * grid * grid);
  }
  return max_liters;
}

// 10 x 10 inter-agent distances over the cross-distance joints, flattened
// row major with reactor joints as rows.
inline VecX cross_distance_features(const GlobalPose& pose_x, const GlobalPose& pose_y, const Skeleton& skeleton) {
  VecX out(100);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      out[10 * i + j] =
          (pose_x.joint_positions[static_cast<size_t>(skeleton.cross_distance_ids[static_cast<size_t>(i)])] -
           pose_y.joint_positions[static_cast<size_t>(skeleton.cross_distance_ids[static_cast<size_t>(j)])])
              .norm();
  return out;
}

// Window-level cross-distance feature: per-frame features averaged.
inline VecX window_cross_feature(const MotionClip& reactor, const MotionClip& actor, int begin, int end,
                                 const Skeleton& skeleton) {
  VecX sum = VecX::Zero(100);
  for (int n = begin; n < end; ++n)
    sum += cross_distance_features(reactor.frames[static_cast<size_t>(n)], actor.frames[static_cast<size_t>(n)],
                                   skeleton);
  return sum / static_cast<double>(end - begin);
}

// ---------------------------------------------------------------------------

struct MetricReport {
  double fid = 0;
  double diversity = 0;
  double mmdist = 0;
  double penetration_mm = 0;
  double floating_mm = 0;
  double skating_mm_per_frame = 0;
  double iv_liters = 0;
  double fid_cd = 0;
  double div_cd = 0;

  void validate() const {
    for (double v : {fid, diversity, mmdist, penetration_mm, floating_mm, skating_mm_per_frame, iv_liters, fid_cd,
                     div_cd})
      if (!std::isfinite(v) || v < 0) throw Error("metric report: values must be finite and nonnegative");
  }
};

inline void write_metric_report(std::ostream& os, const MetricReport& report) {
  os << "fid: " << report.fid << "\n";
  os << "diversity: " << report.diversity << "\n";
  os << "mmdist: " << report.mmdist << "\n";
  os << "penetration: " << report.penetration_mm << " mm\n";
  os << "floating: " << report.floating_mm << " mm\n";
  os << "skating: " << report.skating_mm_per_frame << " mm/contact-frame\n";
  os << "interpenetration_volume: " << report.iv_liters << " liters\n";
  os << "fid_cd: " << report.fid_cd << "\n";
  os << "div_cd: " << report.div_cd << "\n";
}

struct EvaluateOptions {
  int window_len = defaults::kPredictLen;
  int s_d = 200;
  std::uint64_t seed = 0;
  double joint_radius = 0.06;
  double iv_grid = 0.01;
};

struct PerRecordMetrics {
  std::string name;
  PhysicsMetrics physics;
  double iv_liters = 0;
};

// Full evaluation of generated records against a reference set: reaction
// quality in motion-feature space, physics plausibility of the generated
// reactor, and interaction quality against each record's actor.
inline MetricReport evaluate_sets(const std::vector<InteractionRecord>& generated,
                                  const std::vector<InteractionRecord>& reference, const Skeleton& skeleton,
                                  const EvaluateOptions& opts, std::vector<PerRecordMetrics>* per_record = nullptr) {
  if (generated.empty() || reference.empty()) throw InvalidInput("evaluate: empty record sets");
  const int k = opts.window_len;

  auto windows_of = [&](const std::vector<InteractionRecord>& recs, bool cross) {
    std::vector<VecX> feats;
    for (const auto& rec : recs) {
      const int n_windows = rec.reactor.size() / k;
      for (int w = 0; w < n_windows; ++w) {
        if (cross) {
          feats.push_back(window_cross_feature(rec.reactor, rec.actor, w * k, (w + 1) * k, skeleton));
        } else {
          MotionClip window;
          window.fps = rec.reactor.fps;
          window.frames.assign(rec.reactor.frames.begin() + w * k, rec.reactor.frames.begin() + (w + 1) * k);
          feats.push_back(extract_motion_features(window, skeleton));
        }
      }
    }
    if (feats.size() < 2) throw InvalidInput("evaluate: need at least two windows per set");
    return feats;
  };

  MetricReport report;
  const auto gen_feats = windows_of(generated, false);
  const auto ref_feats = windows_of(reference, false);
  report.fid = fid(FeatureStats::fit(gen_feats), FeatureStats::fit(ref_feats));
  report.diversity = diversity(gen_feats, opts.s_d, opts.seed);

  // text features at the motion-feature dimension, one per generated window
  std::vector<VecX> text_feats;
  {
    size_t at = 0;
    for (const auto& rec : generated) {
      const int n_windows = rec.reactor.size() / k;
      const VecX t = embed_text(rec.label, kMotionFeatureDim);
      for (int w = 0; w < n_windows; ++w, ++at) text_feats.push_back(t);
    }
  }
  report.mmdist = mmdist(gen_feats, text_feats);

  const std::vector<double> radii(Skeleton::kJointCount, opts.joint_radius);
  double pen = 0, flt = 0, skate = 0, iv = 0;
  for (const auto& rec : generated) {
    const auto ph = physics_metrics(rec.reactor, skeleton, opts.joint_radius);
    const double rec_iv = interpenetration_volume(rec.reactor, rec.actor, skeleton, radii, opts.iv_grid);
    pen += ph.penetration_mm;
    flt += ph.floating_mm;
    skate += ph.skating_mm_per_frame;
    iv += rec_iv;
    if (per_record) per_record->push_back({rec.name, ph, rec_iv});
  }
  const double n_gen = static_cast<double>(generated.size());
  report.penetration_mm = pen / n_gen;
  report.floating_mm = flt / n_gen;
  report.skating_mm_per_frame = skate / n_gen;
  report.iv_liters = iv / n_gen;

  const auto gen_cd = windows_of(generated, true);
  const auto ref_cd = windows_of(reference, true);
  report.fid_cd = fid(FeatureStats::fit(gen_cd), FeatureStats::fit(ref_cd));
  report.div_cd = diversity(gen_cd, opts.s_d, opts.seed);
  report.validate();
  return report;
}

}  // namespace duet
