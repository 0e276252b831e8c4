#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "duet/planner.hpp"
#include "duet/dataset.hpp"
#include "test_helpers.hpp"

using namespace duet;

namespace {

DenoiserConfig planner_config() {
  DenoiserConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.time_embed_dim = 8;
  cfg.text_embed_dim = 8;
  cfg.history_len = 5;
  cfg.predict_len = 10;
  return cfg;
}

struct Rig {
  DenoiserParams params;
  NormStats stats;
  NoiseSchedule sched;
  Skeleton skel = smpl22_skeleton();
  PlannerConfig config;
  MotionClip actor;

  Rig() : params(init_denoiser(planner_config(), 44)), sched(build_schedule(4)) {
    // random weights so an untrained model still emits nonzero motion
    Rng rng(45);
    for (Tensor* t : params.all())
      t->value = normal_matrix(static_cast<int>(t->value.rows()), static_cast<int>(t->value.cols()), rng) * 0.2;
    const auto rec = synth_generate(Scenario::mirror, 200, 17);
    actor = rec.actor;
    config.rest_pose_init = true;
    config.seed = 5;
  }
};

}  // namespace

TEST_CASE("warmup collects one second and fails cleanly on early EOF") {
  Rig rig;
  {
    ClipReplaySource source(rig.actor);
    const auto state = warmup(source, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
    CHECK(state.actor.size() == 30);
    CHECK(state.reactor.size() == 30);
    CHECK(state.window_index == 0);
  }
  {
    MotionClip short_clip = rig.actor;
    short_clip.frames.resize(29);
    ClipReplaySource source(short_clip);
    CHECK_THROWS_AS(warmup(source, rig.params, rig.stats, rig.sched, rig.skel, rig.config), StreamExhausted);
  }
}

TEST_CASE("rest-pose warmup fills the buffer with the rest pose") {
  Rig rig;
  ClipReplaySource source(rig.actor);
  const auto state = warmup(source, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  for (const auto& f : state.reactor.frames) {
    CHECK((f.root() - state.reactor.frames.front().root()).norm() == 0.0);
    for (int j = 0; j < Skeleton::kJointCount; ++j)
      CHECK((f.joint_positions[static_cast<size_t>(j)] -
             state.reactor.frames.front().joint_positions[static_cast<size_t>(j)])
                .norm() == 0.0);
  }
  // spawned facing the actor at the configured distance
  const Vec3 d = state.reactor.frames.front().root() - rig.actor.frames.front().root();
  CHECK(std::sqrt(d.x() * d.x() + d.z() * d.z()) == Catch::Approx(rig.config.spawn_distance).margin(1e-9));
}

TEST_CASE("sampled warmup is deterministic and distinct from rest poses") {
  Rig rig;
  rig.config.rest_pose_init = false;
  ClipReplaySource s1(rig.actor), s2(rig.actor);
  const auto a = warmup(s1, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  const auto b = warmup(s2, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  REQUIRE(a.reactor.size() == b.reactor.size());
  for (int n = 0; n < a.reactor.size(); ++n)
    CHECK((a.reactor.frames[static_cast<size_t>(n)].root() - b.reactor.frames[static_cast<size_t>(n)].root())
              .norm() == 0.0);
  bool moved = false;
  for (int n = 1; n < a.reactor.size(); ++n)
    moved = moved ||
            (a.reactor.frames[static_cast<size_t>(n)].root() - a.reactor.frames[0].root()).norm() > 1e-9;
  CHECK(moved);
}

TEST_CASE("planning appends exactly k frames and keeps buffers aligned") {
  Rig rig;
  ClipReplaySource source(rig.actor);
  auto state = warmup(source, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  const int before = state.reactor.size();
  const auto plan = plan_next_window(state, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  CHECK(static_cast<int>(plan.reactor_frames.size()) == rig.params.config.predict_len);
  CHECK(state.reactor.size() == before + rig.params.config.predict_len);
  CHECK(state.window_index == 1);
  CHECK(plan.prediction_raw.rows() == rig.params.config.predict_len);
  CHECK(plan.prediction_raw.cols() == layout::kFrameDim);
  CHECK(plan.boundary_gap >= 0.0);
}

TEST_CASE("planning twice from the same state and seed is identical") {
  Rig rig;
  ClipReplaySource source(rig.actor);
  const auto state0 = warmup(source, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  auto s1 = state0;
  auto s2 = state0;
  const auto a = plan_next_window(s1, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  const auto b = plan_next_window(s2, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  CHECK((a.prediction_raw - b.prediction_raw).cwiseAbs().maxCoeff() == 0.0);
  for (size_t n = 0; n < a.reactor_frames.size(); ++n)
    CHECK((a.reactor_frames[n].root() - b.reactor_frames[n].root()).norm() == 0.0);
}

TEST_CASE("emitted windows stay consistent under re-canonicalization") {
  // recovering then re-encoding the emitted frames must reproduce the
  // generated canonical features
  Rig rig;
  ClipReplaySource source(rig.actor);
  auto state = warmup(source, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  const int h = rig.params.config.history_len;
  const int k = rig.params.config.predict_len;
  const int hist_end = state.reactor.size();
  const auto plan = plan_next_window(state, rig.params, rig.stats, rig.sched, rig.skel, rig.config);

  // rebuild clips covering [hist_end - h, hist_end + k) and re-canonicalize
  // at the same anchor (last history frame)
  MotionClip rx, ry;
  rx.fps = ry.fps = rig.config.fps;
  for (int n = hist_end - h; n < hist_end + k; ++n) {
    rx.frames.push_back(state.reactor.frames[static_cast<size_t>(n)]);
    // the actor buffer has no frames for the prediction span yet; reuse the
    // replay clip which run_stream would have ingested
    ry.frames.push_back(rig.actor.frames[static_cast<size_t>(n)]);
  }
  const auto cx = detect_foot_contacts(rx, rig.skel);
  const auto cy = detect_foot_contacts(ry, rig.skel);
  const auto seq = canonicalize(rx, ry, rig.skel, h - 1, cx, cy, rig.config.field_thresh);
  // reactor pose features of the re-encoded prediction match the generated
  // window (velocities/contacts are re-derived, so compare pose dims)
  for (int n = 0; n < k; ++n) {
    CHECK(std::abs(seq.frames(h + n, layout::R_HEIGHT) - plan.prediction_raw(n, layout::R_HEIGHT)) < 1e-5);
    for (int d = 0; d < 63; ++d)
      CHECK(std::abs(seq.frames(h + n, layout::R_JPOS + d) - plan.prediction_raw(n, layout::R_JPOS + d)) < 1e-5);
  }
}

TEST_CASE("run_stream emits exactly one window per k actor frames") {
  Rig rig;
  const int k = rig.params.config.predict_len;
  const int warm = rig.config.warmup_frames(rig.params.config.history_len);
  const int n_windows = 10;
  MotionClip clip = rig.actor;
  clip.frames.resize(static_cast<size_t>(warm + n_windows * k));
  ClipReplaySource source(clip);
  VectorSink sink;
  const auto report = run_stream(source, sink, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  CHECK(report.windows == n_windows);
  CHECK(report.frames_emitted == n_windows * k);
  CHECK(static_cast<long>(sink.frames.size()) == report.frames_emitted);
  // timestamps continue the warmup clock contiguously
  for (size_t i = 0; i < sink.frames.size(); ++i) CHECK(sink.frames[i].t == warm + static_cast<long>(i));
  CHECK(report.latency_p95_ms >= report.latency_min_ms);
}

TEST_CASE("run_stream respects the window limit and reports latencies") {
  Rig rig;
  ClipReplaySource source(rig.actor);
  VectorSink sink;
  rig.config.max_windows = 3;
  const auto report = run_stream(source, sink, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  CHECK(report.windows == 3);
  CHECK(report.window_latencies_ms.size() == 3);
  CHECK(report.latency_mean_ms > 0.0);
}

TEST_CASE("seeded stream runs are byte-identical in deterministic mode") {
  Rig rig;
  auto run = [&] {
    ClipReplaySource source(rig.actor);
    VectorSink sink;
    run_stream(source, sink, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
    std::string all;
    for (const auto& f : sink.frames) all += serialize_stream_frame(f) + "\n";
    return all;
  };
  CHECK(run() == run());
}

TEST_CASE("threaded ingestion produces the same frames as the single-context mode") {
  Rig rig;
  rig.config.max_windows = 4;
  auto run = [&](bool threaded) {
    rig.config.threaded_ingest = threaded;
    ClipReplaySource source(rig.actor);
    VectorSink sink;
    run_stream(source, sink, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
    std::string all;
    for (const auto& f : sink.frames) all += serialize_stream_frame(f) + "\n";
    return all;
  };
  CHECK(run(false) == run(true));
}

TEST_CASE("tracked mode emits tracked frames and bounded rewards") {
  Rig rig;
  rig.config.track = true;
  rig.config.max_windows = 3;
  ClipReplaySource source(rig.actor);
  VectorSink sink;
  const auto report = run_stream(source, sink, rig.params, rig.stats, rig.sched, rig.skel, rig.config);
  CHECK(report.windows == 3);
  REQUIRE(report.window_rewards.size() == 3);
  for (const auto& r : report.window_rewards) {
    CHECK(r.w >= 0.0);
    CHECK(r.w <= 1.0);
    CHECK(r.r_imitation >= 0.0);
    CHECK(r.r_imitation <= 1.0);
    CHECK(r.r_default >= 0.0);
    CHECK(r.r_default <= 0.5);
    CHECK(r.r_root >= 0.0);
    CHECK(r.r_root <= 1.0);
    CHECK(r.r_total == Catch::Approx((1 - r.w) * r.r_imitation + r.w * (r.r_default + r.r_root)));
  }
}

TEST_CASE("stream frames serialize and parse losslessly") {
  Rng rng(8);
  const auto clip = testing::random_clip(1, rng);
  StreamFrame f;
  f.t = 1234;
  f.pose = clip.frames[0];
  f.text = "mirror";
  const auto line = serialize_stream_frame(f);
  const auto back = parse_stream_frame(line);
  CHECK(back.t == f.t);
  CHECK(back.text == f.text);
  for (int j = 0; j < Skeleton::kJointCount; ++j)
    CHECK((back.pose.joint_positions[static_cast<size_t>(j)] - f.pose.joint_positions[static_cast<size_t>(j)])
              .norm() < 1e-12);
  CHECK_THROWS_AS(parse_stream_frame("{not json"), ParseError);
  CHECK_THROWS_AS(parse_stream_frame(R"({"t":0,"p":[1,2,3],"yaw":0})"), ParseError);
}

TEST_CASE("non-monotonic timestamps are rejected") {
  Rig rig;
  struct BadSource : FrameSource {
    const MotionClip* clip;
    int at = 0;
    explicit BadSource(const MotionClip& c) : clip(&c) {}
    std::optional<StreamFrame> next() override {
      StreamFrame f;
      f.t = at == 5 ? 2 : at;  // repeats an old timestamp
      f.pose = clip->frames[static_cast<size_t>(at)];
      ++at;
      return f;
    }
  } source(rig.actor);
  CHECK_THROWS_AS(warmup(source, rig.params, rig.stats, rig.sched, rig.skel, rig.config), InvalidInput);
}

TEST_CASE("frames round trip over a loopback TCP connection") {
  int port = 0;
  Rng rng(9);
  const auto clip = testing::random_clip(3, rng);
  std::thread client;
  TcpStream server;
  std::thread accept_thread([&] { server = TcpStream::accept_one(0, &port); });
  while (port == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  TcpStream peer = TcpStream::connect("127.0.0.1", port);
  accept_thread.join();

  TcpSink peer_sink(&peer);
  for (int n = 0; n < 3; ++n) {
    StreamFrame f;
    f.t = n;
    f.pose = clip.frames[static_cast<size_t>(n)];
    peer_sink.emit(f);
  }
  TcpSource server_source(&server);
  for (int n = 0; n < 3; ++n) {
    const auto f = server_source.next();
    REQUIRE(f.has_value());
    CHECK(f->t == n);
    CHECK((f->pose.root() - clip.frames[static_cast<size_t>(n)].root()).norm() < 1e-12);
  }
}
