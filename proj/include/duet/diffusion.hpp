#pragma once

#include <vector>

#include "duet/common.hpp"

namespace duet {

// Per-step DDPM constants. Step indices are zero based: t runs over [0, T),
// alpha_bar[t] is the cumulative product of alpha up to and including t,
// and the virtual alpha_bar[-1] is 1.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> beta;
  // posterior q(z_{t-1} | z_t, z_0) coefficients
  std::vector<double> post_coef_clean;  // on the predicted clean sample
  std::vector<double> post_coef_noisy;  // on z_t
  std::vector<double> post_variance;

  void validate() const {
    if (T < 1 || static_cast<int>(alpha.size()) != T) throw InvalidInput("noise schedule: bad step count");
    double prod = 1.0;
    double prev_bar = 1.0;
    for (int t = 0; t < T; ++t) {
      if (!(alpha[t] > 0.0 && alpha[t] < 1.0)) throw InvalidInput("noise schedule: alpha out of (0,1)");
      prod *= alpha[t];
      if (std::abs(alpha_bar[t] - prod) > 1e-12) throw InvalidInput("noise schedule: alpha_bar mismatch");
      if (alpha_bar[t] >= prev_bar) throw InvalidInput("noise schedule: alpha_bar must strictly decrease");
      prev_bar = alpha_bar[t];
    }
  }
};

enum class ScheduleKind { cosine, linear };

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "cosine") return ScheduleKind::cosine;
  if (s == "linear") return ScheduleKind::linear;
  throw InvalidInput("unknown schedule kind: " + s);
}

inline const char* to_string(ScheduleKind k) { return k == ScheduleKind::cosine ? "cosine" : "linear"; }

// Cosine: alpha_bar_t tracks cos^2(((t+1)/T + s)/(1 + s) * pi/2) / f(0) with
// s = 0.008 and the per-step ratio clamped to [1e-3, 0.9999] so small-T
// schedules stay valid. Linear: beta from 1e-4 to 0.02 across the steps.
inline NoiseSchedule build_schedule(int T = defaults::kDiffusionSteps, ScheduleKind kind = ScheduleKind::cosine) {
  if (T < 1) throw InvalidInput("build_schedule: T must be >= 1");
  NoiseSchedule sched;
  sched.T = T;
  sched.alpha.resize(static_cast<size_t>(T));
  if (kind == ScheduleKind::cosine) {
    constexpr double s = 0.008;
    auto f = [&](double u) {
      const double c = std::cos((u + s) / (1.0 + s) * M_PI / 2.0);
      return c * c;
    };
    double prev = 1.0;
    for (int t = 0; t < T; ++t) {
      const double bar = f(static_cast<double>(t + 1) / T) / f(0.0);
      sched.alpha[static_cast<size_t>(t)] = std::clamp(bar / prev, 1e-3, 0.9999);
      prev = bar;
    }
  } else {
    constexpr double beta_lo = 1e-4, beta_hi = 0.02;
    for (int t = 0; t < T; ++t) {
      const double u = (T == 1) ? 0.0 : static_cast<double>(t) / (T - 1);
      sched.alpha[static_cast<size_t>(t)] = 1.0 - (beta_lo + (beta_hi - beta_lo) * u);
    }
  }
  sched.alpha_bar.resize(static_cast<size_t>(T));
  sched.beta.resize(static_cast<size_t>(T));
  sched.post_coef_clean.resize(static_cast<size_t>(T));
  sched.post_coef_noisy.resize(static_cast<size_t>(T));
  sched.post_variance.resize(static_cast<size_t>(T));
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    const double a = sched.alpha[static_cast<size_t>(t)];
    const double prev_bar = prod;
    prod *= a;
    sched.alpha_bar[static_cast<size_t>(t)] = prod;
    const double beta = 1.0 - a;
    sched.beta[static_cast<size_t>(t)] = beta;
    const double one_minus_bar = 1.0 - prod;
    sched.post_coef_clean[static_cast<size_t>(t)] = std::sqrt(prev_bar) * beta / one_minus_bar;
    sched.post_coef_noisy[static_cast<size_t>(t)] = std::sqrt(a) * (1.0 - prev_bar) / one_minus_bar;
    sched.post_variance[static_cast<size_t>(t)] = beta * (1.0 - prev_bar) / one_minus_bar;
  }
  sched.validate();
  return sched;
}

struct GuidanceConfig {
  double w = defaults::kGuidanceScale;
  double mask_rate = defaults::kTextMaskRate;

  void validate() const {
    if (w < 0) throw InvalidInput("guidance: w must be >= 0");
    if (mask_rate < 0 || mask_rate > 1) throw InvalidInput("guidance: mask_rate must lie in [0, 1]");
  }
};

// Closed-form forward noising: z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) eps.
inline MatX forward_diffuse(const MatX& z0, int t, const MatX& noise, const NoiseSchedule& sched) {
  if (t < 0 || t >= sched.T) throw InvalidInput("forward_diffuse: t out of range");
  if (noise.rows() != z0.rows() || noise.cols() != z0.cols())
    throw InvalidInput("forward_diffuse: noise shape mismatch");
  const double bar = sched.alpha_bar[static_cast<size_t>(t)];
  return std::sqrt(bar) * z0 + std::sqrt(1.0 - bar) * noise;
}

// One reverse step given the predicted clean sample. t = 0 returns the
// prediction itself untouched; otherwise the standard posterior mean plus
// sqrt(variance) * noise.
inline MatX posterior_step(const MatX& z_t, const MatX& z0_hat, int t, const NoiseSchedule& sched,
                           const MatX& noise) {
  if (t < 0 || t >= sched.T) throw InvalidInput("posterior_step: t out of range");
  if (z0_hat.rows() != z_t.rows() || z0_hat.cols() != z_t.cols())
    throw InvalidInput("posterior_step: shape mismatch");
  if (t == 0) return z0_hat;
  if (noise.rows() != z_t.rows() || noise.cols() != z_t.cols())
    throw InvalidInput("posterior_step: noise shape mismatch");
  return sched.post_coef_clean[static_cast<size_t>(t)] * z0_hat +
         sched.post_coef_noisy[static_cast<size_t>(t)] * z_t +
         std::sqrt(sched.post_variance[static_cast<size_t>(t)]) * noise;
}

inline MatX cfg_combine(const MatX& pred_uncond, const MatX& pred_cond, double w) {
  if (pred_uncond.rows() != pred_cond.rows() || pred_uncond.cols() != pred_cond.cols())
    throw InvalidInput("cfg_combine: shape mismatch");
  return pred_uncond + w * (pred_cond - pred_uncond);
}

// Reverse sampling loop from a given start. `denoise(z_t, t, conditioned)`
// must return the predicted clean window; when `has_text` is false only the
// unconditional branch runs and no guidance is applied.
template <typename DenoiseFn>
MatX sample_loop(DenoiseFn&& denoise, MatX z, bool has_text, const NoiseSchedule& sched,
                 const GuidanceConfig& guidance, Rng& rng) {
  guidance.validate();
  for (int t = sched.T - 1; t >= 0; --t) {
    MatX pred = denoise(z, t, false);
    if (has_text) pred = cfg_combine(pred, denoise(z, t, true), guidance.w);
    MatX noise;
    if (t > 0) noise = normal_matrix(static_cast<int>(z.rows()), static_cast<int>(z.cols()), rng);
    z = posterior_step(z, pred, t, sched, noise);
  }
  return z;
}

// Full window sampling from unit Gaussian noise.
template <typename DenoiseFn>
MatX sample_window(DenoiseFn&& denoise, int rows, int cols, bool has_text, const NoiseSchedule& sched,
                   const GuidanceConfig& guidance, Rng& rng) {
  MatX z = normal_matrix(rows, cols, rng);
  return sample_loop(denoise, std::move(z), has_text, sched, guidance, rng);
}

}  // namespace duet
