#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

#include "duet/denoiser.hpp"
#include "duet/diffusion.hpp"
#include "duet/features.hpp"
#include "duet/losses.hpp"
#include "duet/reward.hpp"
#include "duet/stream.hpp"

namespace duet {

struct PlannerConfig {
  bool rest_pose_init = false;        // deterministic alternative to sampled warm-up
  double spawn_distance = 1.5;        // meters in front of the actor at warm-up
  double field_thresh = defaults::kFieldThresh;
  GuidanceConfig guidance;
  std::uint64_t seed = 0;
  double fps = defaults::kFps;
  // streaming
  int max_windows = -1;               // -1: run until the source ends
  bool paced = false;                 // sleep to real-time between frames
  bool track = false;                 // route output through the kinematic tracker
  double tracker_blend = 0.5;
  RewardConfig reward;
  bool threaded_ingest = false;       // pull actor frames on a separate thread

  int warmup_frames(int history_len) const { return std::max(defaults::kFps, history_len); }
};

// Runtime buffers of the online loop. Both clips are global-frame and stay
// time-aligned between windows; the rng is the only source of randomness.
struct PlannerState {
  MotionClip reactor;
  MotionClip actor;
  std::string text;
  int window_index = 0;
  long frame_clock = 0;  // index of the next expected actor frame
  Rng rng{0};
};

struct PlannedWindow {
  std::vector<GlobalPose> reactor_frames;
  MatX prediction_raw;  // k x 443, denormalized canonical features
  CanonicalTransform transform;
  double boundary_gap = 0.0;  // RMS over pose dims against the history end
  double plan_millis = 0.0;
};

namespace detail {

inline GlobalPose place_rest_pose(const Skeleton& skeleton, const Vec3& root_xz, double yaw) {
  const auto rest = skeleton.rest_positions();
  GlobalPose pose;
  pose.root_yaw = wrap_angle(yaw);
  for (int j = 0; j < Skeleton::kJointCount; ++j)
    pose.joint_positions[static_cast<size_t>(j)] =
        rotate_y(yaw, rest[static_cast<size_t>(j)]) + Vec3(root_xz.x(), 0.0, root_xz.z());
  return pose;
}

inline void ingest_frame(PlannerState& state, const StreamFrame& frame) {
  if (frame.t < state.frame_clock)
    throw InvalidInput("stream: timestamps must be strictly increasing (got " + std::to_string(frame.t) +
                       " after " + std::to_string(state.frame_clock - 1) + ")");
  state.frame_clock = frame.t + 1;
  state.actor.frames.push_back(frame.pose);
  if (frame.text) state.text = *frame.text;
}

}  // namespace detail

// Collects one second of actor motion and initializes the reactor prefix,
// either by unconditioned sampling from a masked (all-zero) history or with
// rest poses. The reactor spawns facing the actor at `spawn_distance`.
inline PlannerState warmup(FrameSource& source, const DenoiserParams& params, const NormStats& stats,
                           const NoiseSchedule& sched, const Skeleton& skeleton, const PlannerConfig& config) {
  const auto& cfg = params.config;
  const int W = config.warmup_frames(cfg.history_len);
  PlannerState state;
  state.rng.seed(config.seed);
  state.actor.fps = config.fps;
  state.actor.agent_id = AgentId::actor;
  state.reactor.fps = config.fps;
  state.reactor.agent_id = AgentId::reactor;

  for (int i = 0; i < W; ++i) {
    auto frame = source.next();
    if (!frame)
      throw StreamExhausted("stream ended during warm-up after " + std::to_string(i) + " of " +
                            std::to_string(W) + " frames");
    detail::ingest_frame(state, *frame);
  }

  const auto& first = state.actor.frames.front();
  const Vec3 spawn_xz = Vec3(first.root().x(), 0.0, first.root().z()) + config.spawn_distance * heading_dir(first.root_yaw);
  const double spawn_yaw = wrap_angle(first.root_yaw + M_PI);

  if (config.rest_pose_init) {
    const auto pose = detail::place_rest_pose(skeleton, spawn_xz, spawn_yaw);
    state.reactor.frames.assign(static_cast<size_t>(W), pose);
  } else {
    auto fn = [&](const MatX& z, int t, bool) {
      return denoise(params, z, MatX::Zero(cfg.history_len, layout::kFrameDim), ConditionBundle::make(t, cfg));
    };
    GuidanceConfig unguided = config.guidance;
    unguided.w = 0.0;
    const MatX sampled =
        sample_window(fn, cfg.predict_len, layout::kFrameDim, false, sched, unguided, state.rng);
    const MatX denorm = denormalize_features(sampled, stats);
    const auto recovered = recover(denorm, CanonicalTransform{}, config.fps);
    CanonicalTransform spawn;
    spawn.translation = spawn_xz;
    spawn.yaw = spawn_yaw;
    const auto& last = recovered.frames.back();
    const auto g = continuation_transform(spawn, RootState{last.root().x(), last.root().z(), last.root_yaw});
    std::vector<GlobalPose> placed;
    placed.reserve(recovered.frames.size());
    for (const auto& f : recovered.frames) {
      GlobalPose p = f;
      for (auto& q : p.joint_positions) q = g.apply(q);
      p.root_yaw = wrap_angle(p.root_yaw + g.yaw);
      placed.push_back(p);
    }
    // keep the last W sampled frames, padding at the front if k < W
    state.reactor.frames.clear();
    for (int i = 0; i < W; ++i) {
      const int idx = static_cast<int>(placed.size()) - W + i;
      state.reactor.frames.push_back(placed[static_cast<size_t>(std::max(0, idx))]);
    }
  }
  return state;
}

// One Alg-style planning step: canonicalize the last h frames of both
// buffers, sample a window (guided when text is present), recover it through
// the stored transform and append it to the reactor buffer.
inline PlannedWindow plan_next_window(PlannerState& state, const DenoiserParams& params, const NormStats& stats,
                                      const NoiseSchedule& sched, const Skeleton& skeleton,
                                      const PlannerConfig& config) {
  const auto& cfg = params.config;
  const int h = cfg.history_len, k = cfg.predict_len;
  if (state.reactor.size() < h || state.actor.size() < h) throw StateError("planner: not warmed up");
  if (state.reactor.size() != state.actor.size()) throw StateError("planner: buffers out of alignment");
  const auto t_start = std::chrono::steady_clock::now();

  // sub-clips with one frame of velocity context keep this O(h) per window
  const int L = state.reactor.size();
  const int ctx = (L > h) ? 1 : 0;
  MotionClip rx, ry;
  rx.fps = ry.fps = config.fps;
  rx.agent_id = AgentId::reactor;
  ry.agent_id = AgentId::actor;
  for (int i = L - h - ctx; i < L; ++i) {
    rx.frames.push_back(state.reactor.frames[static_cast<size_t>(i)]);
    ry.frames.push_back(state.actor.frames[static_cast<size_t>(i)]);
  }
  const auto cx = detect_foot_contacts(rx, skeleton);
  const auto cy = detect_foot_contacts(ry, skeleton);
  const auto hist_seq =
      canonicalize(rx, ry, skeleton, ctx + h - 1, cx, cy, config.field_thresh, ctx, ctx + h);
  const MatX hist_norm = normalize_features(hist_seq.frames, stats);

  const bool has_text = !state.text.empty();
  auto fn = [&](const MatX& z, int t, bool conditioned) {
    return denoise(params, z, hist_norm,
                   ConditionBundle::make(t, cfg, conditioned ? state.text : std::string()));
  };
  const MatX sampled = sample_window(fn, k, layout::kFrameDim, has_text, sched, config.guidance, state.rng);

  PlannedWindow out;
  out.prediction_raw = denormalize_features(sampled, stats);
  out.transform = hist_seq.transform;
  out.boundary_gap = std::sqrt(loss_prefix(denormalize_features(hist_seq.frames, stats), out.prediction_raw,
                                           NormStats{}));
  const auto recovered = recover(out.prediction_raw, hist_seq.transform, config.fps);
  out.reactor_frames = recovered.frames;
  for (const auto& f : recovered.frames) state.reactor.frames.push_back(f);
  ++state.window_index;
  out.plan_millis =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t capacity) : capacity_(capacity) {}

  void push(T value) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
    if (closed_) return;
    queue_.push_back(std::move(value));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    T value = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return value;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  size_t capacity_;
  std::deque<T> queue_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_empty_, not_full_;
};

// Pulls the inner source on its own thread through a bounded queue.
// Ordering is preserved, so results match the single-context mode.
class ThreadedSource : public FrameSource {
 public:
  explicit ThreadedSource(FrameSource& inner, size_t capacity = 64) : queue_(capacity) {
    worker_ = std::thread([this, &inner] {
      while (auto f = inner.next()) queue_.push(std::move(*f));
      queue_.close();
    });
  }
  ~ThreadedSource() override {
    queue_.close();
    if (worker_.joinable()) worker_.join();
  }
  std::optional<StreamFrame> next() override { return queue_.pop(); }

 private:
  BoundedQueue<StreamFrame> queue_;
  std::thread worker_;
};

struct RunReport {
  int windows = 0;
  long frames_emitted = 0;
  double latency_min_ms = 0, latency_mean_ms = 0, latency_p95_ms = 0, latency_max_ms = 0;
  std::vector<double> window_latencies_ms;
  std::vector<double> boundary_gaps;
  std::vector<RewardBreakdown> window_rewards;  // tracked mode only
  bool source_exhausted = false;
};

namespace detail {

inline void finalize_latencies(RunReport& report) {
  if (report.window_latencies_ms.empty()) return;
  auto sorted = report.window_latencies_ms;
  std::sort(sorted.begin(), sorted.end());
  report.latency_min_ms = sorted.front();
  report.latency_max_ms = sorted.back();
  double sum = 0;
  for (double v : sorted) sum += v;
  report.latency_mean_ms = sum / static_cast<double>(sorted.size());
  const size_t idx = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1;
  report.latency_p95_ms = sorted[std::min(idx, sorted.size() - 1)];
}

}  // namespace detail

// The full online loop: warm up, then per window plan k frames, emit them,
// and ingest the next k actor frames. Planning always happens before the
// matching actor interval arrives, so emission never waits on the actor.
// In tracked mode the window is replayed through the kinematic tracker
// against the actually-received actor motion and emitted afterwards, with
// per-window rewards recorded.
inline RunReport run_stream(FrameSource& raw_source, FrameSink& sink, const DenoiserParams& params,
                            const NormStats& stats, const NoiseSchedule& sched, const Skeleton& skeleton,
                            const PlannerConfig& config) {
  std::unique_ptr<ThreadedSource> threaded;
  FrameSource* source = &raw_source;
  if (config.threaded_ingest) {
    threaded = std::make_unique<ThreadedSource>(raw_source);
    source = threaded.get();
  }

  PlannerState state = warmup(*source, params, stats, sched, skeleton, config);
  const int k = params.config.predict_len;
  RunReport report;
  GlobalPose tracked = state.reactor.frames.back();

  const auto frame_period = std::chrono::duration<double>(1.0 / config.fps);
  std::optional<StreamFrame> pending;
  while (config.max_windows < 0 || report.windows < config.max_windows) {
    // one-frame lookahead after the first window: a new window is only
    // planned while the actor stream is still alive
    if (report.windows > 0) {
      pending = source->next();
      if (!pending) {
        report.source_exhausted = true;
        break;
      }
    }
    const long window_t0 = state.frame_clock;
    PlannedWindow plan = plan_next_window(state, params, stats, sched, skeleton, config);
    report.window_latencies_ms.push_back(plan.plan_millis);
    report.boundary_gaps.push_back(plan.boundary_gap);

    if (!config.track) {
      for (int j = 0; j < k; ++j) {
        StreamFrame f;
        f.t = window_t0 + j;
        f.pose = plan.reactor_frames[static_cast<size_t>(j)];
        sink.emit(f);
        ++report.frames_emitted;
        if (config.paced) std::this_thread::sleep_for(frame_period);
      }
    }

    // ingest the actor frames covering this window's interval
    int got = 0;
    if (pending) {
      detail::ingest_frame(state, *pending);
      pending.reset();
      ++got;
    }
    for (; got < k; ++got) {
      auto frame = source->next();
      if (!frame) break;
      detail::ingest_frame(state, *frame);
    }

    if (config.track) {
      // deviation weight over the window: predicted vs received actor,
      // both as root-relative joint positions in the planned reactor frame
      const int have = std::min(got, k);
      if (have > 0) {
        MotionClip planned_clip, real_clip;
        planned_clip.fps = real_clip.fps = config.fps;
        for (int j = 0; j < have; ++j) {
          planned_clip.frames.push_back(plan.reactor_frames[static_cast<size_t>(j)]);
          real_clip.frames.push_back(
              state.actor.frames[static_cast<size_t>(state.actor.size() - have + j)]);
        }
        const std::vector<std::array<double, 4>> zeros(static_cast<size_t>(have), {0, 0, 0, 0});
        const auto rel = canonicalize(planned_clip, real_clip, skeleton, 0, zeros, zeros, config.field_thresh);
        const MatX y_real_rel = rel.frames.middleCols(layout::A_JPOS, 66);
        const MatX y_hat_rel = plan.prediction_raw.topRows(have).middleCols(layout::A_JPOS, 66);
        double w = 1.0;  // a zero-information prediction counts as full deviation
        try {
          w = deviation_weight(y_hat_rel, y_real_rel, config.reward);
        } catch (const DegenerateInput&) {
        }

        RewardBreakdown window_reward;
        window_reward.w = w;
        for (int j = 0; j < have; ++j) {
          const auto& goal = plan.reactor_frames[static_cast<size_t>(j)];
          const auto& actor_pose = real_clip.frames[static_cast<size_t>(j)];
          const Vec3 actor_root = actor_pose.root();
          tracked = kinematic_tracker_step(tracked, goal, config.tracker_blend, &actor_root, w, config.reward);
          const auto rest_here =
              detail::place_rest_pose(skeleton, Vec3(tracked.root().x(), 0.0, tracked.root().z()), tracked.root_yaw);
          window_reward.r_imitation += reward_imitation(tracked, goal, config.reward) / have;
          window_reward.r_default += reward_default(tracked, rest_here, config.reward) / have;
          window_reward.r_root += reward_root(tracked.root(), actor_root, config.reward) / have;
          StreamFrame f;
          f.t = window_t0 + j;
          f.pose = tracked;
          sink.emit(f);
          ++report.frames_emitted;
        }
        window_reward.r_total =
            (1.0 - w) * window_reward.r_imitation + w * (window_reward.r_default + window_reward.r_root);
        report.window_rewards.push_back(window_reward);
      }
    }

    ++report.windows;
    if (got < k) {
      report.source_exhausted = true;
      break;
    }
  }
  detail::finalize_latencies(report);
  return report;
}

}  // namespace duet
