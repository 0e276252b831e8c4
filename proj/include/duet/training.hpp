#pragma once

#include <functional>
#include <string>
#include <vector>

#include "duet/dataset.hpp"
#include "duet/denoiser.hpp"
#include "duet/diffusion.hpp"
#include "duet/losses.hpp"

namespace duet {

// Iterations count individual window steps (the inner rollout loop), so one
// crop of N windows advances the counter by N.
struct TrainPlan {
  int max_iters = 30000;
  int phase1_end = -1;  // default: max_iters / 3
  int phase2_end = -1;  // default: 2 * max_iters / 3
  int windows = 3;      // N consecutive windows per crop
  int batch_size = 1;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: only on completion

  TrainPlan resolved() const {
    TrainPlan p = *this;
    if (p.phase1_end < 0) p.phase1_end = p.max_iters / 3;
    if (p.phase2_end < 0) p.phase2_end = 2 * p.max_iters / 3;
    p.validate();
    return p;
  }

  void validate() const {
    if (max_iters < 1) throw InvalidInput("train plan: max_iters must be >= 1");
    if (windows < 1) throw InvalidInput("train plan: N must be >= 1");
    if (batch_size < 1) throw InvalidInput("train plan: batch size must be >= 1");
    if (phase1_end >= 0 && phase2_end >= 0 && phase1_end > phase2_end)
      throw InvalidInput("train plan: phase boundaries out of order");
  }

  int phase_of(int iter) const {
    if (iter < phase1_end) return 0;
    if (iter < phase2_end) return 1;
    return 2;
  }
};

// Probability of feeding ground-truth history: 1 through phase one, linear
// from 1 to 0 across phase two, 0 afterwards.
inline double schedule_probability(int iter, const TrainPlan& plan) {
  if (iter < 0) throw InvalidInput("schedule_probability: negative iteration");
  if (iter < plan.phase1_end) return 1.0;
  if (iter >= plan.phase2_end) return 0.0;
  const double span = static_cast<double>(plan.phase2_end - plan.phase1_end);
  return span <= 0 ? 0.0 : static_cast<double>(plan.phase2_end - iter) / span;
}

enum class HistoryProvenance { dataset, rollout };

struct LossCurvePoint {
  int iter = 0;
  double total = 0, simple = 0, foot = 0, inter = 0, prefix = 0;
  double p = 1.0;
};

struct TrainResult {
  std::vector<LossCurvePoint> curve;
  long dataset_histories[3] = {0, 0, 0};  // indexed by phase
  long rollout_histories[3] = {0, 0, 0};
  long masked_text_draws = 0;
  long text_draws = 0;
  long sampling_calls = 0;
  int adam_steps = 0;
  double final_simple_avg = 0.0;  // mean of L_simple over the last stretch
};

inline void write_loss_csv(const std::string& path, const std::vector<LossCurvePoint>& curve) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write loss curve: " + path);
  os << "iter,total,simple,foot,inter,prefix,p\n";
  for (const auto& pt : curve)
    os << pt.iter << ',' << pt.total << ',' << pt.simple << ',' << pt.foot << ',' << pt.inter << ',' << pt.prefix
       << ',' << pt.p << '\n';
}

namespace detail {

// Per-crop training state: the working reactor clip accumulates this crop's
// rollout splices while the actor stays real.
struct CropState {
  const InteractionRecord* rec = nullptr;
  CropSpec spec;
  MotionClip working_reactor;
  std::vector<std::array<double, 4>> working_cx;
  std::vector<std::array<double, 4>> actor_cy;
  std::vector<MatX> targets_norm;  // N windows from the untouched dataset clip
  HistoryProvenance next_history = HistoryProvenance::dataset;
};

}  // namespace detail

struct TrainContext {
  const Skeleton* skeleton = nullptr;
  double field_thresh = defaults::kFieldThresh;
  AdamConfig adam;
  // cosine decay of the learning rate down to this fraction of the peak;
  // 1.0 keeps it constant
  double lr_min_frac = 0.05;
  // called every plan.checkpoint_every iters and once at the end
  std::function<void(int iter, const DenoiserParams&, int adam_step)> on_checkpoint;

  double lr_at(int iter, int max_iters) const {
    const double u = max_iters > 1 ? static_cast<double>(iter) / (max_iters - 1) : 1.0;
    return adam.lr * (lr_min_frac + (1.0 - lr_min_frac) * 0.5 * (1.0 + std::cos(M_PI * u)));
  }
};

// Scheduled training: per window step, noise the dataset target, denoise
// with the collected history, step the optimizer, then with probability
// 1 - p replace the history span with the model's own full-sampling rollout
// (re-canonicalized around the predicted reactor). The initial history is
// subject to the same draw, using unconditioned sampling from a masked
// (all-zero) prefix, so phase-3 histories are rollout-provenance throughout.
inline TrainResult train(const Dataset& dataset, DenoiserParams& params, const NoiseSchedule& sched,
                         const TrainPlan& plan_in, const LossWeights& weights, const GuidanceConfig& guidance,
                         const TrainContext& ctx) {
  const TrainPlan plan = plan_in.resolved();
  weights.validate();
  guidance.validate();
  const Skeleton& skel = *ctx.skeleton;
  const auto& cfg = params.config;
  const int h = cfg.history_len, k = cfg.predict_len, N = plan.windows;
  const double fps = dataset.manifest.fps;
  const NormStats& stats = dataset.manifest.stats;

  CropSampler sampler(dataset.records, N, h, k);
  Rng rng(plan.seed);
  std::uniform_int_distribution<int> draw_t(0, sched.T - 1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  TrainResult result;
  result.curve.reserve(static_cast<size_t>(plan.max_iters));

  auto make_crop = [&](detail::CropState& cs) {
    cs.spec = sampler.draw(rng);
    cs.rec = &dataset.records[static_cast<size_t>(cs.spec.record)];
    cs.working_reactor = cs.rec->reactor;
    cs.working_cx = detect_foot_contacts(cs.rec->reactor, skel);
    cs.actor_cy = detect_foot_contacts(cs.rec->actor, skel);
    cs.next_history = HistoryProvenance::dataset;
    const int begin = cs.spec.offset;
    const auto seq = canonicalize(cs.rec->reactor, cs.rec->actor, skel, begin + h - 1, cs.working_cx, cs.actor_cy,
                                  ctx.field_thresh, begin, begin + h + N * k);
    cs.targets_norm.clear();
    for (int w = 0; w < N; ++w)
      cs.targets_norm.push_back(normalize_features(seq.frames.middleRows(h + w * k, k), stats));
    return cs;
  };

  // unguided, unconditioned full sampling used for history rollouts
  auto rollout_sample = [&](const MatX& z_start, const MatX& history_norm) {
    ++result.sampling_calls;
    auto fn = [&](const MatX& z, int t, bool) {
      return denoise(params, z, history_norm, ConditionBundle::make(t, cfg));
    };
    GuidanceConfig unguided;
    unguided.w = 0.0;
    unguided.mask_rate = guidance.mask_rate;
    return sample_loop(fn, z_start, false, sched, unguided, rng);
  };

  auto splice = [&](detail::CropState& cs, int at, const MotionClip& piece, int piece_begin, int count) {
    for (int f = 0; f < count; ++f)
      cs.working_reactor.frames[static_cast<size_t>(at + f)] = piece.frames[static_cast<size_t>(piece_begin + f)];
    cs.working_cx = detect_foot_contacts(cs.working_reactor, skel);
  };

  std::vector<detail::CropState> batch(static_cast<size_t>(plan.batch_size));

  int iter = 0;
  while (iter < plan.max_iters) {
    for (auto& cs : batch) make_crop(cs);
    for (int i = 1; i <= N && iter < plan.max_iters; ++i) {
      const double p = schedule_probability(iter, plan);
      const int phase = plan.phase_of(iter);
      LossBreakdown mean_loss;
      params.zero_grads();

      for (auto& cs : batch) {
        const int window_start = cs.spec.offset + h + (i - 1) * k;

        if (i == 1) {
          // the initial history participates in the same schedule: when the
          // draw says rollout, it is sampled unconditioned from a masked
          // all-zero prefix and spliced over the dataset prefix
          if (uni(rng) > p) {
            const int prefix_begin = cs.spec.offset;
            const auto prefix_seq =
                canonicalize(cs.rec->reactor, cs.rec->actor, skel, prefix_begin + h - 1, cs.working_cx, cs.actor_cy,
                             ctx.field_thresh, prefix_begin, prefix_begin + h);
            MatX z_start = normal_matrix(k, layout::kFrameDim, rng);
            const MatX sampled = rollout_sample(std::move(z_start), MatX::Zero(h, layout::kFrameDim));
            MatX denorm = denormalize_features(sampled, stats);
            const auto recovered = recover(denorm, CanonicalTransform{}, fps);
            // place the sampled motion so its last frame lands on the prefix anchor
            RootState fin;
            {
              const auto& last = recovered.frames.back();
              fin = {last.root().x(), last.root().z(), last.root_yaw};
            }
            const auto g = continuation_transform(prefix_seq.transform, fin);
            MotionClip placed = recovered;
            for (auto& f : placed.frames) {
              for (auto& pt : f.joint_positions) pt = g.apply(pt);
              f.root_yaw = wrap_angle(f.root_yaw + g.yaw);
            }
            splice(cs, prefix_begin, placed, k - h, h);
            cs.next_history = HistoryProvenance::rollout;
          } else {
            cs.next_history = HistoryProvenance::dataset;
          }
        }

        const auto history_seq =
            canonicalize(cs.working_reactor, cs.rec->actor, skel, window_start - h, cs.working_cx, cs.actor_cy,
                         ctx.field_thresh, window_start - h, window_start);
        const MatX history_norm = normalize_features(history_seq.frames, stats);
        (cs.next_history == HistoryProvenance::rollout ? result.rollout_histories : result.dataset_histories)[phase]++;

        const int t = draw_t(rng);
        const MatX noise = normal_matrix(k, layout::kFrameDim, rng);
        const MatX& z0 = cs.targets_norm[static_cast<size_t>(i - 1)];
        const MatX z_t = forward_diffuse(z0, t, noise, sched);

        const bool masked = uni(rng) < guidance.mask_rate;
        (masked ? result.masked_text_draws : result.text_draws)++;
        ConditionBundle cond = ConditionBundle::make(t, cfg, masked ? std::string() : cs.rec->label);

        ForwardTape tape;
        const MatX pred = denoise(params, z_t, history_norm, cond, &tape);
        MatX grad = MatX::Zero(k, layout::kFrameDim);
        const auto breakdown = total_loss(z0, pred, history_norm, weights, stats, skel, &grad);
        if (!std::isfinite(breakdown.total))
          throw TrainingError("non-finite loss at iter " + std::to_string(iter) + " (simple=" +
                              std::to_string(breakdown.simple) + ", foot=" + std::to_string(breakdown.foot) +
                              ", inter=" + std::to_string(breakdown.inter) + ")");
        grad /= static_cast<double>(plan.batch_size);
        denoiser_backward(params, tape, grad);
        mean_loss.total += breakdown.total / plan.batch_size;
        mean_loss.simple += breakdown.simple / plan.batch_size;
        mean_loss.foot += breakdown.foot / plan.batch_size;
        mean_loss.inter += breakdown.inter / plan.batch_size;
        mean_loss.prefix += breakdown.prefix / plan.batch_size;
      }

      AdamConfig opt = ctx.adam;
      opt.lr = ctx.lr_at(iter, plan.max_iters);
      optimizer_step(params, opt, ++result.adam_steps);

      // decide the history source for the next window, per sample
      if (i < N) {
        for (auto& cs : batch) {
          const int window_start = cs.spec.offset + h + (i - 1) * k;
          if (uni(rng) > p) {
            const auto history_seq =
                canonicalize(cs.working_reactor, cs.rec->actor, skel, window_start - h, cs.working_cx, cs.actor_cy,
                             ctx.field_thresh, window_start - h, window_start);
            const MatX history_norm = normalize_features(history_seq.frames, stats);
            const MatX noise = normal_matrix(k, layout::kFrameDim, rng);
            const MatX z_start =
                forward_diffuse(cs.targets_norm[static_cast<size_t>(i - 1)], sched.T - 1, noise, sched);
            const MatX sampled = rollout_sample(z_start, history_norm);
            MatX denorm = denormalize_features(sampled, stats);
            const auto recovered =
                recover(denorm, history_seq.transform, fps, history_seq.reactor_states.back());
            splice(cs, window_start, recovered, 0, k);
            cs.next_history = HistoryProvenance::rollout;
          } else {
            cs.next_history = HistoryProvenance::dataset;
          }
        }
      }

      LossCurvePoint pt;
      pt.iter = iter;
      pt.total = mean_loss.total;
      pt.simple = mean_loss.simple;
      pt.foot = mean_loss.foot;
      pt.inter = mean_loss.inter;
      pt.prefix = mean_loss.prefix;
      pt.p = p;
      result.curve.push_back(pt);

      ++iter;
      if (plan.checkpoint_every > 0 && ctx.on_checkpoint && iter % plan.checkpoint_every == 0)
        ctx.on_checkpoint(iter, params, result.adam_steps);
    }
  }

  if (ctx.on_checkpoint) ctx.on_checkpoint(iter, params, result.adam_steps);
  const int tail = std::min<int>(100, static_cast<int>(result.curve.size()));
  for (int i = 0; i < tail; ++i) result.final_simple_avg += result.curve[result.curve.size() - 1 - i].simple / tail;
  return result;
}

}  // namespace duet
