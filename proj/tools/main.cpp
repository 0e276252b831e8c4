// duet: two-agent reactive motion synthesis toolkit.
//
// Subcommands: gen-data, train, sample, stream, evaluate, inspect.
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <CLI11.hpp>

#include <cstdlib>
#include <set>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "duet/dataset.hpp"
#include "duet/denoiser.hpp"
#include "duet/diffusion.hpp"
#include "duet/metrics.hpp"
#include "duet/planner.hpp"
#include "duet/stream.hpp"
#include "duet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_data_dir() {
  const char* env = std::getenv("DUET_DATA_DIR");
  return env ? std::string(env) : std::string("data");
}

void echo_config(const std::string& out_dir, const json& effective) {
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "effective_config.json");
  os << effective.dump(2) << "\n";
}

struct GenDataArgs {
  std::string out;
  std::string scenario = "all";
  int clips = 8;
  int frames = 300;
  std::uint64_t seed = 1;
  double fps = duet::defaults::kFps;
  double field_thresh = duet::defaults::kFieldThresh;
};

int cmd_gen_data(const GenDataArgs& a) {
  std::vector<duet::Scenario> scenarios;
  if (a.scenario == "all") {
    scenarios = {duet::Scenario::mirror, duet::Scenario::follow, duet::Scenario::handshake};
  } else {
    scenarios = {duet::scenario_from_string(a.scenario)};
  }
  const auto skel = duet::smpl22_skeleton();
  auto ds = duet::generate_dataset(scenarios, a.clips, a.frames, a.seed, skel, a.field_thresh);
  ds.manifest.fps = a.fps;
  duet::save_dataset(a.out, ds);
  echo_config(a.out, json{{"command", "gen-data"},
                          {"out", a.out},
                          {"scenario", a.scenario},
                          {"clips", a.clips},
                          {"frames", a.frames},
                          {"seed", a.seed},
                          {"fps", a.fps},
                          {"field_thresh_m", a.field_thresh}});
  std::cout << "wrote " << ds.records.size() << " records to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out = "run";
  std::string config_file;
  int iters = 30000;
  int phase1_end = -1;
  int phase2_end = -1;
  int windows = 3;
  int batch = 1;
  std::uint64_t seed = 0;
  int layers = 2, hidden = 64, heads = 4, time_dim = 64, text_dim = 64;
  bool paper_profile = false;
  int history = duet::defaults::kHistoryLen;
  int prediction = duet::defaults::kPredictLen;
  int timesteps = duet::defaults::kDiffusionSteps;
  std::string schedule = "cosine";
  double lr = 1e-4;
  double guidance_w = duet::defaults::kGuidanceScale;
  double mask_rate = duet::defaults::kTextMaskRate;
  double lambda_foot = 0.2, lambda_inter = 0.5, lambda_prefix = 0.1;
  double field_thresh = duet::defaults::kFieldThresh;
  int checkpoint_every = 0;
};

void apply_train_config_file(TrainArgs& a, const std::set<std::string>& flag_overrides) {
  if (a.config_file.empty()) return;
  std::ifstream is(a.config_file);
  if (!is) throw duet::InvalidInput("cannot open config file: " + a.config_file);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw duet::ParseError(a.config_file + ": " + e.what());
  }
  auto get = [&](const char* key, auto& slot) {
    // command-line flags win over config-file values
    if (flag_overrides.count(key)) return;
    if (j.contains(key)) slot = j[key].get<std::decay_t<decltype(slot)>>();
  };
  get("data", a.data);
  get("out", a.out);
  get("iters", a.iters);
  get("phase1_end", a.phase1_end);
  get("phase2_end", a.phase2_end);
  get("windows", a.windows);
  get("batch", a.batch);
  get("seed", a.seed);
  get("layers", a.layers);
  get("hidden", a.hidden);
  get("heads", a.heads);
  get("time_dim", a.time_dim);
  get("text_dim", a.text_dim);
  get("history", a.history);
  get("prediction", a.prediction);
  get("timesteps", a.timesteps);
  get("schedule", a.schedule);
  get("lr", a.lr);
  get("guidance_w", a.guidance_w);
  get("mask_rate", a.mask_rate);
  get("lambda_foot", a.lambda_foot);
  get("lambda_inter", a.lambda_inter);
  get("lambda_prefix", a.lambda_prefix);
  get("checkpoint_every", a.checkpoint_every);
}

int cmd_train(TrainArgs a, const std::set<std::string>& flag_overrides) {
  apply_train_config_file(a, flag_overrides);
  const auto skel = duet::smpl22_skeleton();
  const auto ds = duet::load_dataset(a.data);

  duet::DenoiserConfig cfg;
  if (a.paper_profile) {
    cfg = duet::DenoiserConfig::paper();
  } else {
    cfg.layers = a.layers;
    cfg.hidden = a.hidden;
    cfg.heads = a.heads;
    cfg.time_embed_dim = a.time_dim;
    cfg.text_embed_dim = a.text_dim;
  }
  cfg.history_len = a.history;
  cfg.predict_len = a.prediction;
  cfg.validate();

  const auto sched = duet::build_schedule(a.timesteps, duet::schedule_kind_from_string(a.schedule));
  auto params = duet::init_denoiser(cfg, a.seed);
  duet::TrainPlan plan;
  plan.max_iters = a.iters;
  plan.phase1_end = a.phase1_end;
  plan.phase2_end = a.phase2_end;
  plan.windows = a.windows;
  plan.batch_size = a.batch;
  plan.seed = a.seed;
  plan.checkpoint_every = a.checkpoint_every;
  duet::LossWeights weights{a.lambda_foot, a.lambda_inter, a.lambda_prefix};
  duet::GuidanceConfig guidance;
  guidance.w = a.guidance_w;
  guidance.mask_rate = a.mask_rate;

  fs::create_directories(a.out);
  duet::TrainContext ctx;
  ctx.skeleton = &skel;
  ctx.field_thresh = a.field_thresh;
  ctx.adam.lr = a.lr;
  ctx.on_checkpoint = [&](int iter, const duet::DenoiserParams& p, int adam_step) {
    if (a.checkpoint_every <= 0) return;
    const auto path = fs::path(a.out) / ("checkpoint_" + std::to_string(iter) + ".ckpt");
    duet::save_checkpoint(path.string(), p, ds.manifest.stats, adam_step);
  };

  echo_config(a.out, json{{"command", "train"},
                          {"data", a.data},
                          {"out", a.out},
                          {"iters", a.iters},
                          {"windows", a.windows},
                          {"batch", a.batch},
                          {"seed", a.seed},
                          {"layers", cfg.layers},
                          {"hidden", cfg.hidden},
                          {"heads", cfg.heads},
                          {"history", cfg.history_len},
                          {"prediction", cfg.predict_len},
                          {"timesteps", a.timesteps},
                          {"schedule", a.schedule},
                          {"lr", a.lr},
                          {"guidance_w", a.guidance_w},
                          {"mask_rate", a.mask_rate},
                          {"lambda_foot", a.lambda_foot},
                          {"lambda_inter", a.lambda_inter},
                          {"lambda_prefix", a.lambda_prefix}});

  const auto result = duet::train(ds, params, sched, plan, weights, guidance, ctx);
  duet::save_checkpoint((fs::path(a.out) / "checkpoint.ckpt").string(), params, ds.manifest.stats,
                        result.adam_steps);
  duet::write_loss_csv((fs::path(a.out) / "loss_curve.csv").string(), result.curve);
  std::cout << "trained " << result.curve.size() << " iters; final L_simple (tail mean) = "
            << result.final_simple_avg << "\n";
  std::cout << "checkpoint: " << (fs::path(a.out) / "checkpoint.ckpt").string() << "\n";
  return 0;
}

struct SampleArgs {
  std::string data;
  std::string checkpoint;
  std::string out = "generated";
  std::string record;  // empty: all records
  int windows = -1;    // -1: as many as the actor clip allows
  std::uint64_t seed = 0;
  double guidance_w = duet::defaults::kGuidanceScale;
  int timesteps = duet::defaults::kDiffusionSteps;
  std::string schedule = "cosine";
  bool rest_init = false;
  bool no_text = false;
};

int cmd_sample(const SampleArgs& a) {
  const auto skel = duet::smpl22_skeleton();
  const auto ds = duet::load_dataset(a.data);
  const auto ck = duet::load_checkpoint(a.checkpoint);
  const auto sched = duet::build_schedule(a.timesteps, duet::schedule_kind_from_string(a.schedule));

  duet::PlannerConfig pcfg;
  pcfg.guidance.w = a.guidance_w;
  pcfg.seed = a.seed;
  pcfg.rest_pose_init = a.rest_init;
  pcfg.fps = ds.manifest.fps;
  pcfg.max_windows = a.windows;

  duet::Dataset out_ds;
  out_ds.manifest.fps = ds.manifest.fps;
  out_ds.manifest.stats = ds.manifest.stats;
  out_ds.manifest.vocabulary = ds.manifest.vocabulary;

  for (const auto& rec : ds.records) {
    if (!a.record.empty() && rec.name != a.record) continue;
    // one warm-up pass to capture the reactor prefix, then the stream run
    // on a fresh replay so window sampling sees the same rng sequence
    duet::PlannerState warm_state;
    {
      duet::ClipReplaySource wsrc(rec.actor);
      warm_state = duet::warmup(wsrc, ck.params, ck.stats, sched, skel, pcfg);
    }
    duet::ClipReplaySource source(rec.actor, a.no_text ? std::string() : rec.label);
    duet::VectorSink sink;
    const auto report = duet::run_stream(source, sink, ck.params, ck.stats, sched, skel, pcfg);
    if (report.frames_emitted == 0) {
      std::cerr << "warning: record '" << rec.name << "' too short to sample, skipped\n";
      continue;
    }
    duet::InteractionRecord gen;
    gen.name = rec.name;
    gen.label = rec.label;
    gen.scenario = rec.scenario;
    gen.seed = a.seed;
    gen.actor.fps = gen.reactor.fps = ds.manifest.fps;
    gen.actor.agent_id = duet::AgentId::actor;
    gen.reactor.agent_id = duet::AgentId::reactor;
    for (const auto& f : warm_state.reactor.frames) gen.reactor.frames.push_back(f);
    for (const auto& f : sink.frames) gen.reactor.frames.push_back(f.pose);
    const size_t span = std::min(gen.reactor.frames.size(), rec.actor.frames.size());
    gen.reactor.frames.resize(span);
    gen.actor.frames.assign(rec.actor.frames.begin(), rec.actor.frames.begin() + static_cast<long>(span));
    out_ds.records.push_back(std::move(gen));

    double gap = 0;
    for (double g : report.boundary_gaps) gap += g;
    std::cout << rec.name << ": " << report.windows << " windows, mean boundary gap "
              << (report.boundary_gaps.empty() ? 0.0 : gap / report.boundary_gaps.size()) << ", p95 latency "
              << report.latency_p95_ms << " ms\n";
  }
  if (out_ds.records.empty()) throw duet::InvalidInput("sample: no records matched");
  for (const auto& rec : out_ds.records) {
    duet::DatasetManifest::Entry e;
    e.name = rec.name;
    e.label = rec.label;
    e.scenario = rec.scenario;
    e.seed = rec.seed;
    e.frames = rec.actor.size();
    e.actor_file = rec.name + ".actor.mclip";
    e.reactor_file = rec.name + ".reactor.mclip";
    out_ds.manifest.entries.push_back(e);
  }
  duet::save_dataset(a.out, out_ds);
  echo_config(a.out, json{{"command", "sample"},
                          {"data", a.data},
                          {"checkpoint", a.checkpoint},
                          {"out", a.out},
                          {"record", a.record},
                          {"windows", a.windows},
                          {"seed", a.seed},
                          {"guidance_w", a.guidance_w},
                          {"timesteps", a.timesteps},
                          {"schedule", a.schedule},
                          {"rest_init", a.rest_init}});
  std::cout << "wrote " << out_ds.records.size() << " generated records to " << a.out << "\n";
  return 0;
}

struct StreamArgs {
  std::string checkpoint;
  int listen = -1;
  std::string connect_host;
  int connect_port = -1;
  std::string text;
  int windows = -1;
  std::uint64_t seed = 0;
  double guidance_w = duet::defaults::kGuidanceScale;
  int timesteps = duet::defaults::kDiffusionSteps;
  std::string schedule = "cosine";
  bool rest_init = false;
  bool paced = false;
  bool track = false;
  double blend = 0.5;
  std::string rewards_csv;
  std::string report_path;
  bool deterministic = true;
  bool threaded_ingest = false;
};

int cmd_stream(const StreamArgs& a) {
  const auto skel = duet::smpl22_skeleton();
  const auto ck = duet::load_checkpoint(a.checkpoint);
  const auto sched = duet::build_schedule(a.timesteps, duet::schedule_kind_from_string(a.schedule));

  duet::PlannerConfig pcfg;
  pcfg.guidance.w = a.guidance_w;
  pcfg.seed = a.seed;
  pcfg.rest_pose_init = a.rest_init;
  pcfg.max_windows = a.windows;
  pcfg.paced = a.paced;
  pcfg.track = a.track;
  pcfg.tracker_blend = a.blend;
  pcfg.threaded_ingest = a.threaded_ingest && !a.deterministic;

  std::unique_ptr<duet::TcpStream> tcp;
  std::unique_ptr<duet::FrameSource> source;
  std::unique_ptr<duet::FrameSink> sink;
  if (a.listen >= 0) {
    int port = a.listen;
    tcp = std::make_unique<duet::TcpStream>(duet::TcpStream::accept_one(a.listen, &port));
    std::cerr << "accepted connection on port " << port << "\n";
    source = std::make_unique<duet::TcpSource>(tcp.get());
    sink = std::make_unique<duet::TcpSink>(tcp.get());
  } else if (a.connect_port >= 0) {
    tcp = std::make_unique<duet::TcpStream>(duet::TcpStream::connect(a.connect_host, a.connect_port));
    source = std::make_unique<duet::TcpSource>(tcp.get());
    sink = std::make_unique<duet::TcpSink>(tcp.get());
  } else {
    source = std::make_unique<duet::IstreamSource>(std::cin);
    sink = std::make_unique<duet::OstreamSink>(std::cout);
  }

  const auto report = duet::run_stream(*source, *sink, ck.params, ck.stats, sched, skel, pcfg);

  std::ostringstream rep;
  rep << "windows: " << report.windows << "\n";
  rep << "frames_emitted: " << report.frames_emitted << "\n";
  rep << "latency_min: " << report.latency_min_ms << " ms\n";
  rep << "latency_mean: " << report.latency_mean_ms << " ms\n";
  rep << "latency_p95: " << report.latency_p95_ms << " ms\n";
  rep << "latency_max: " << report.latency_max_ms << " ms\n";
  if (!a.report_path.empty()) {
    std::ofstream os(a.report_path);
    os << rep.str();
  } else {
    std::cerr << rep.str();
  }
  if (!a.rewards_csv.empty() && a.track) {
    std::ofstream os(a.rewards_csv);
    os << "window,w,r_imitation,r_default,r_root,r_total\n";
    for (size_t i = 0; i < report.window_rewards.size(); ++i) {
      const auto& r = report.window_rewards[i];
      os << i << ',' << r.w << ',' << r.r_imitation << ',' << r.r_default << ',' << r.r_root << ',' << r.r_total
         << '\n';
    }
  }
  return 0;
}

struct EvaluateArgs {
  std::string generated;
  std::string reference;
  std::string out;
  std::string csv;
  int window = duet::defaults::kPredictLen;
  int s_d = 200;
  std::uint64_t seed = 0;
  double radius = 0.06;
  double grid = 0.01;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto skel = duet::smpl22_skeleton();
  const auto gen = duet::load_dataset(a.generated);
  const auto ref = duet::load_dataset(a.reference);
  duet::EvaluateOptions opts;
  opts.window_len = a.window;
  opts.s_d = a.s_d;
  opts.seed = a.seed;
  opts.joint_radius = a.radius;
  opts.iv_grid = a.grid;
  std::vector<duet::PerRecordMetrics> per_record;
  const auto report = duet::evaluate_sets(gen.records, ref.records, skel, opts, &per_record);
  if (!a.out.empty()) {
    const auto parent = fs::path(a.out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream os(a.out);
    duet::write_metric_report(os, report);
  }
  duet::write_metric_report(std::cout, report);
  if (!a.csv.empty()) {
    std::ofstream os(a.csv);
    os << "record,penetration_mm,floating_mm,skating_mm_per_contact_frame,iv_liters\n";
    for (const auto& r : per_record)
      os << r.name << ',' << r.physics.penetration_mm << ',' << r.physics.floating_mm << ','
         << r.physics.skating_mm_per_frame << ',' << r.iv_liters << '\n';
  }
  return 0;
}

struct InspectArgs {
  std::string data;
  std::string checkpoint;
};

int cmd_inspect(const InspectArgs& a) {
  if (a.data.empty() && a.checkpoint.empty())
    throw duet::InvalidInput("inspect: give --data and/or --checkpoint");
  if (!a.data.empty()) {
    const auto ds = duet::load_dataset(a.data);
    std::cout << "dataset: " << a.data << "\n";
    std::cout << "  records: " << ds.records.size() << ", fps: " << ds.manifest.fps << "\n";
    std::cout << "  vocabulary:";
    for (const auto& v : ds.manifest.vocabulary) std::cout << " " << v;
    std::cout << "\n";
    for (const auto& e : ds.manifest.entries)
      std::cout << "  " << e.name << ": " << e.frames << " frames, label '" << e.label << "'\n";
    double max_std = 0;
    for (int d = 0; d < duet::layout::kFrameDim; ++d) max_std = std::max(max_std, ds.manifest.stats.std_dev[d]);
    std::cout << "  stats: mean-norm " << ds.manifest.stats.mean.norm() << ", max std " << max_std << "\n";
  }
  if (!a.checkpoint.empty()) {
    const auto ck = duet::load_checkpoint(a.checkpoint);
    const auto& c = ck.params.config;
    std::cout << "checkpoint: " << a.checkpoint << "\n";
    std::cout << "  layers " << c.layers << ", hidden " << c.hidden << ", heads " << c.heads << ", history "
              << c.history_len << ", prediction " << c.predict_len << "\n";
    long total = 0;
    const auto tensors = ck.params.all();
    for (const auto* t : tensors) total += static_cast<long>(t->value.size());
    std::cout << "  tensors: " << tensors.size() << ", parameters: " << total << ", adam step " << ck.adam_step
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duet: auto-regressive two-agent reaction synthesis"};
  app.require_subcommand(1);

  GenDataArgs gen;
  gen.out = default_data_dir();
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic two-agent dataset with known reaction rules");
  c_gen->add_option("--out", gen.out, "Output dataset directory")->capture_default_str();
  c_gen->add_option("--scenario", gen.scenario, "mirror | follow | handshake | all")->capture_default_str();
  c_gen->add_option("--clips", gen.clips, "Clips per scenario")->capture_default_str();
  c_gen->add_option("--frames", gen.frames, "Frames per clip (30 fps)")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  c_gen->add_option("--fps", gen.fps, "Frame rate, frames/second")->capture_default_str();
  c_gen->add_option("--field-thresh", gen.field_thresh, "Interaction field contact threshold, meters")
      ->capture_default_str();

  TrainArgs tr;
  tr.data = default_data_dir();
  auto* c_train = app.add_subcommand("train", "Train the denoiser with three-phase scheduled rollouts");
  c_train->add_option("--data", tr.data, "Dataset directory")->capture_default_str();
  c_train->add_option("--out", tr.out, "Run output directory (checkpoint, loss CSV)")->capture_default_str();
  c_train->add_option("--config", tr.config_file, "JSON config file; flags override its values");
  c_train->add_option("--iters", tr.iters, "Total window-step iterations")->capture_default_str();
  c_train->add_option("--phase1-end", tr.phase1_end, "First phase boundary in iters (default iters/3)");
  c_train->add_option("--phase2-end", tr.phase2_end, "Second phase boundary in iters (default 2*iters/3)");
  c_train->add_option("--windows", tr.windows, "Consecutive windows N per crop")->capture_default_str();
  c_train->add_option("--batch", tr.batch, "Independent crops per optimizer step")->capture_default_str();
  c_train->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
  c_train->add_option("--layers", tr.layers, "Transformer layers")->capture_default_str();
  c_train->add_option("--hidden", tr.hidden, "Hidden width")->capture_default_str();
  c_train->add_option("--heads", tr.heads, "Attention heads")->capture_default_str();
  c_train->add_option("--time-dim", tr.time_dim, "Diffusion-step embedding dim")->capture_default_str();
  c_train->add_option("--text-dim", tr.text_dim, "Text embedding dim")->capture_default_str();
  c_train->add_flag("--paper-profile", tr.paper_profile, "Use the 8-layer, 512-wide profile");
  c_train->add_option("--history", tr.history, "History length h, frames")->capture_default_str();
  c_train->add_option("--prediction", tr.prediction, "Prediction window k, frames")->capture_default_str();
  c_train->add_option("--timesteps", tr.timesteps, "Diffusion steps T")->capture_default_str();
  c_train->add_option("--schedule", tr.schedule, "cosine | linear")->capture_default_str();
  c_train->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  c_train->add_option("--guidance-w", tr.guidance_w, "Classifier-free guidance weight w")->capture_default_str();
  c_train->add_option("--mask-rate", tr.mask_rate, "Text mask probability")->capture_default_str();
  c_train->add_option("--lambda-foot", tr.lambda_foot, "Foot contact loss weight")->capture_default_str();
  c_train->add_option("--lambda-inter", tr.lambda_inter, "Interaction loss weight")->capture_default_str();
  c_train->add_option("--lambda-prefix", tr.lambda_prefix, "Prefix continuity loss weight")->capture_default_str();
  c_train->add_option("--field-thresh", tr.field_thresh, "Interaction field threshold, meters")
      ->capture_default_str();
  c_train->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint interval in iters (0: final only)")
      ->capture_default_str();

  SampleArgs sa;
  sa.data = default_data_dir();
  auto* c_sample = app.add_subcommand("sample", "Replay recorded actor clips through the planner");
  c_sample->add_option("--data", sa.data, "Dataset directory with actor clips")->capture_default_str();
  c_sample->add_option("--checkpoint", sa.checkpoint, "Trained checkpoint")->required();
  c_sample->add_option("--out", sa.out, "Output directory for generated records")->capture_default_str();
  c_sample->add_option("--record", sa.record, "Only this record (default: all)");
  c_sample->add_option("--windows", sa.windows, "Windows per record (-1: all the clip allows)")
      ->capture_default_str();
  c_sample->add_option("--seed", sa.seed, "Sampling seed")->capture_default_str();
  c_sample->add_option("--guidance-w", sa.guidance_w, "Classifier-free guidance weight w")->capture_default_str();
  c_sample->add_option("--timesteps", sa.timesteps, "Diffusion steps T")->capture_default_str();
  c_sample->add_option("--schedule", sa.schedule, "cosine | linear")->capture_default_str();
  c_sample->add_flag("--rest-init", sa.rest_init, "Rest-pose warm-up instead of unconditioned sampling");
  c_sample->add_flag("--no-text", sa.no_text, "Ignore record labels (unconditioned sampling)");

  StreamArgs st;
  auto* c_stream = app.add_subcommand("stream", "Run the online planner over stdio or TCP");
  c_stream->add_option("--checkpoint", st.checkpoint, "Trained checkpoint")->required();
  c_stream->add_option("--listen", st.listen, "Listen on this TCP port and serve one client");
  c_stream->add_option("--connect-host", st.connect_host, "Connect to this host");
  c_stream->add_option("--connect-port", st.connect_port, "Connect to this port");
  c_stream->add_option("--text", st.text, "Initial text prompt");
  c_stream->add_option("--windows", st.windows, "Stop after this many windows (-1: until EOF)")
      ->capture_default_str();
  c_stream->add_option("--seed", st.seed, "Sampling seed")->capture_default_str();
  c_stream->add_option("--guidance-w", st.guidance_w, "Classifier-free guidance weight w")->capture_default_str();
  c_stream->add_option("--timesteps", st.timesteps, "Diffusion steps T")->capture_default_str();
  c_stream->add_option("--schedule", st.schedule, "cosine | linear")->capture_default_str();
  c_stream->add_flag("--rest-init", st.rest_init, "Rest-pose warm-up");
  c_stream->add_flag("--paced", st.paced, "Pace emission to 30 fps wall time");
  c_stream->add_flag("--track", st.track, "Route output through the kinematic tracker, with rewards");
  c_stream->add_option("--blend", st.blend, "Tracker blend rate in (0, 1]")->capture_default_str();
  c_stream->add_option("--rewards-csv", st.rewards_csv, "Write per-window rewards CSV here");
  c_stream->add_option("--report", st.report_path, "Write the latency report here (default stderr)");
  c_stream->add_flag("--deterministic,!--no-deterministic", st.deterministic,
                     "Single-context execution (default on)");
  c_stream->add_flag("--threaded-ingest", st.threaded_ingest,
                     "Pull actor frames on a separate thread (needs --no-deterministic)");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Compare generated records against a reference set");
  c_eval->add_option("--generated", ev.generated, "Generated dataset directory")->required();
  c_eval->add_option("--reference", ev.reference, "Reference dataset directory")->required();
  c_eval->add_option("--out", ev.out, "Write the metric report here (also printed)");
  c_eval->add_option("--csv", ev.csv, "Write per-record physics/IV CSV here");
  c_eval->add_option("--window", ev.window, "Window length in frames for feature extraction")
      ->capture_default_str();
  c_eval->add_option("--sd", ev.s_d, "Diversity subset size S_d")->capture_default_str();
  c_eval->add_option("--seed", ev.seed, "Diversity subset seed")->capture_default_str();
  c_eval->add_option("--radius", ev.radius, "Joint sphere radius, meters")->capture_default_str();
  c_eval->add_option("--grid", ev.grid, "IV voxel size, meters")->capture_default_str();

  InspectArgs in;
  auto* c_inspect = app.add_subcommand("inspect", "Print dataset and checkpoint summaries");
  c_inspect->add_option("--data", in.data, "Dataset directory");
  c_inspect->add_option("--checkpoint", in.checkpoint, "Checkpoint file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_gen->parsed()) return cmd_gen_data(gen);
    if (c_train->parsed()) {
      std::set<std::string> overridden;
      for (const auto* opt : c_train->get_options())
        if (opt->count() > 0) {
          std::string name = opt->get_single_name();
          for (auto& ch : name)
            if (ch == '-') ch = '_';
          overridden.insert(name);
        }
      return cmd_train(tr, overridden);
    }
    if (c_sample->parsed()) return cmd_sample(sa);
    if (c_stream->parsed()) return cmd_stream(st);
    if (c_eval->parsed()) return cmd_evaluate(ev);
    if (c_inspect->parsed()) return cmd_inspect(in);
  } catch (const duet::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const duet::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const duet::UnsupportedVersion& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
