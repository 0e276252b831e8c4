#pragma once

#include "duet/common.hpp"
#include "duet/features.hpp"
#include "duet/skeleton.hpp"

namespace duet {

struct LossWeights {
  double lambda_foot = 0.2;
  double lambda_inter = 0.5;
  double lambda_prefix = 0.1;

  void validate() const {
    if (lambda_foot < 0 || lambda_inter < 0 || lambda_prefix < 0)
      throw InvalidInput("loss weights must be >= 0");
  }
};

struct LossBreakdown {
  double total = 0;
  double simple = 0;
  double foot = 0;
  double inter = 0;
  double prefix = 0;
};

// Mean squared error over every window element, in normalized feature
// space. Gradients accumulate into `grad` when given.
inline double loss_simple(const MatX& z0, const MatX& z0_hat, MatX* grad = nullptr) {
  if (z0.rows() != z0_hat.rows() || z0.cols() != z0_hat.cols()) throw InvalidInput("loss_simple: shape mismatch");
  const double n = static_cast<double>(z0.size());
  const MatX diff = z0_hat - z0;
  if (grad) *grad += (2.0 / n) * diff;
  return diff.squaredNorm() / n;
}

// Foot sliding penalty: squared foot-joint velocity gated by the predicted
// contact label, summed over both agents, feet and frames. Local-frame
// velocities differ from global ones by a per-frame rotation, which leaves
// the masked squared norm unchanged, so no transform is applied here.
inline double loss_foot(const MatX& z0_hat, const NormStats& stats, const Skeleton& skeleton,
                        MatX* grad = nullptr) {
  if (z0_hat.cols() != layout::kFrameDim) throw InvalidInput("loss_foot: bad feature dimension");
  double total = 0;
  for (int n = 0; n < z0_hat.rows(); ++n) {
    for (int f = 0; f < 4; ++f) {
      const int j = skeleton.foot_joint_ids[static_cast<size_t>(f)];
      // reactor side
      {
        const int vd = layout::R_JVEL + 3 * j;
        const int ld = layout::R_FOOT + f;
        Vec3 v;
        for (int c = 0; c < 3; ++c) v[c] = z0_hat(n, vd + c) * stats.divisor(vd + c) + stats.mean[vd + c];
        const double label = z0_hat(n, ld);
        total += label * label * v.squaredNorm();
        if (grad) {
          for (int c = 0; c < 3; ++c) (*grad)(n, vd + c) += 2.0 * label * label * v[c] * stats.divisor(vd + c);
          (*grad)(n, ld) += 2.0 * label * v.squaredNorm();
        }
      }
      // actor side
      {
        const int vd = layout::A_JVEL + 3 * j;
        const int ld = layout::A_FOOT + f;
        Vec3 v;
        for (int c = 0; c < 3; ++c) v[c] = z0_hat(n, vd + c) * stats.divisor(vd + c) + stats.mean[vd + c];
        const double label = z0_hat(n, ld);
        total += label * label * v.squaredNorm();
        if (grad) {
          for (int c = 0; c < 3; ++c) (*grad)(n, vd + c) += 2.0 * label * label * v[c] * stats.divisor(vd + c);
          (*grad)(n, ld) += 2.0 * label * v.squaredNorm();
        }
      }
    }
  }
  return total;
}

namespace detail {

// Local position of a reactor/actor contact joint from a denormalized view
// of one feature row, together with the owning dims for gradient scatter.
struct JointRead {
  Vec3 p;
  int dims[3];   // feature dims of the 3 components, -1 where absent
};

inline JointRead read_reactor_joint(const MatX& z, const NormStats& stats, int n, int j) {
  JointRead r;
  if (j == 0) {
    r.p = Vec3(0.0, z(n, layout::R_HEIGHT) * stats.divisor(layout::R_HEIGHT) + stats.mean[layout::R_HEIGHT], 0.0);
    r.dims[0] = -1;
    r.dims[1] = layout::R_HEIGHT;
    r.dims[2] = -1;
  } else {
    const int d = layout::R_JPOS + 3 * (j - 1);
    for (int c = 0; c < 3; ++c) {
      r.p[c] = z(n, d + c) * stats.divisor(d + c) + stats.mean[d + c];
      r.dims[c] = d + c;
    }
  }
  return r;
}

inline JointRead read_actor_joint(const MatX& z, const NormStats& stats, int n, int j) {
  JointRead r;
  const int d = layout::A_JPOS + 3 * j;
  for (int c = 0; c < 3; ++c) {
    r.p[c] = z(n, d + c) * stats.divisor(d + c) + stats.mean[d + c];
    r.dims[c] = d + c;
  }
  return r;
}

}  // namespace detail

// Contact-distance penalty: squared distance between every reactor/actor
// contact-joint pair, gated by the predicted interaction field, in the
// shared per-frame root frame.
inline double loss_inter(const MatX& z0_hat, const NormStats& stats, const Skeleton& skeleton,
                         MatX* grad = nullptr) {
  if (z0_hat.cols() != layout::kFrameDim) throw InvalidInput("loss_inter: bad feature dimension");
  double total = 0;
  for (int n = 0; n < z0_hat.rows(); ++n) {
    for (int i = 0; i < 6; ++i) {
      const auto jx = detail::read_reactor_joint(z0_hat, stats, n, skeleton.contact_field_ids[static_cast<size_t>(i)]);
      for (int j = 0; j < 6; ++j) {
        const auto jy = detail::read_actor_joint(z0_hat, stats, n, skeleton.contact_field_ids[static_cast<size_t>(j)]);
        const int fd = layout::F_BASE + 6 * i + j;
        const double g = z0_hat(n, fd);
        const Vec3 diff = jx.p - jy.p;
        total += g * g * diff.squaredNorm();
        if (grad) {
          for (int c = 0; c < 3; ++c) {
            if (jx.dims[c] >= 0) (*grad)(n, jx.dims[c]) += 2.0 * g * g * diff[c] * stats.divisor(jx.dims[c]);
            if (jy.dims[c] >= 0) (*grad)(n, jy.dims[c]) -= 2.0 * g * g * diff[c] * stats.divisor(jy.dims[c]);
          }
          (*grad)(n, fd) += 2.0 * g * diff.squaredNorm();
        }
      }
    }
  }
  return total;
}

// Boundary continuity: mean squared gap between the last history frame and
// the first predicted frame over the pose sub-features only.
inline double loss_prefix(const MatX& history, const MatX& z0_hat, const NormStats& stats,
                          MatX* grad = nullptr) {
  if (history.rows() < 1) throw InvalidInput("loss_prefix: empty history");
  if (history.cols() != layout::kFrameDim || z0_hat.cols() != layout::kFrameDim)
    throw InvalidInput("loss_prefix: bad feature dimension");
  const int last = static_cast<int>(history.rows()) - 1;
  const double count = static_cast<double>(layout::prefix_dim_count());
  double total = 0;
  for (int d = 0; d < layout::kFrameDim; ++d) {
    if (!layout::is_prefix_dim(d)) continue;
    const double a = history(last, d) * stats.divisor(d) + stats.mean[d];
    const double b = z0_hat(0, d) * stats.divisor(d) + stats.mean[d];
    const double diff = b - a;
    total += diff * diff / count;
    if (grad) (*grad)(0, d) += 2.0 * diff * stats.divisor(d) / count;
  }
  return total;
}

// Weighted sum of all four terms. The gradient (w.r.t. the normalized
// prediction) accumulates into `grad` when given.
inline LossBreakdown total_loss(const MatX& z0, const MatX& z0_hat, const MatX& history, const LossWeights& weights,
                                const NormStats& stats, const Skeleton& skeleton, MatX* grad = nullptr) {
  weights.validate();
  LossBreakdown out;
  MatX term_grad;
  MatX* tg = nullptr;
  if (grad) {
    term_grad = MatX::Zero(z0_hat.rows(), z0_hat.cols());
    tg = &term_grad;
  }
  auto take = [&](double weight) {
    if (grad && weight != 0.0) *grad += weight * term_grad;
    if (grad) term_grad.setZero();
  };
  out.simple = loss_simple(z0, z0_hat, tg);
  take(1.0);
  out.foot = loss_foot(z0_hat, stats, skeleton, tg);
  take(weights.lambda_foot);
  out.inter = loss_inter(z0_hat, stats, skeleton, tg);
  take(weights.lambda_inter);
  out.prefix = loss_prefix(history, z0_hat, stats, tg);
  take(weights.lambda_prefix);
  out.total = out.simple + weights.lambda_foot * out.foot + weights.lambda_inter * out.inter +
              weights.lambda_prefix * out.prefix;
  return out;
}

}  // namespace duet
