#include <CLI11.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "blimp/agent.hpp"
#include "blimp/config.hpp"
#include "blimp/env.hpp"
#include "blimp/harness.hpp"
#include "blimp/pid.hpp"
#include "blimp/plots.hpp"

namespace fs = std::filesystem;
using namespace blimp;

namespace {

// Common layered-config flags, attached to every subcommand.
struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
  std::string seed_text;  // empty = not given
  std::string out_dir;    // empty = config default
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file, "config file (ini-style sections)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.sets, "override a key: section.key=value (repeatable)");
  cmd->add_option("--seed", opts.seed_text, "master seed (shorthand for --set seed=N)");
  cmd->add_option("--out", opts.out_dir, "output directory (shorthand for --set out_dir=DIR)");
}

RunConfig build_config(const CommonOpts& opts) {
  std::vector<std::string> overrides = opts.sets;
  if (!opts.seed_text.empty()) overrides.push_back("seed=" + opts.seed_text);
  if (!opts.out_dir.empty()) overrides.push_back("out_dir=" + opts.out_dir);
  return load_run_config(opts.config_file, overrides);
}

// Creates the output directory and drops the resolved snapshot into it.
void prepare_out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_config_file(cfg, cfg.out_dir + "/" + kResolvedConfigName);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::uint64_t eval_cell_seed(const RunConfig& cfg) {
  // same derivation a one-cell sweep uses, so eval and sweep cells agree
  return mix_seed(cfg.seed, 0);
}

std::unique_ptr<QrdqnAgent> load_agent(const std::string& checkpoint, const RunConfig& cfg) {
  bool mismatch = false;
  auto agent = std::make_unique<QrdqnAgent>(
      QrdqnAgent::load(checkpoint, training_config_hash(cfg), &mismatch));
  if (mismatch)
    std::fprintf(stderr,
                 "warning: checkpoint '%s' was trained under a different configuration\n",
                 checkpoint.c_str());
  return agent;
}

TrackSpec track_from_config(const RunConfig& cfg) {
  TrackSpec track = make_square_track(cfg.task.side_length, cfg.task.altitude,
                                      cfg.task.counter_clockwise);
  track.trigger_radius = cfg.task.trigger_radius;
  track.laps = cfg.task.laps;
  track.validate();
  return track;
}

int run_train(const CommonOpts& opts) {
  RunConfig cfg = build_config(opts);
  prepare_out_dir(cfg);
  BlimpEnv env(cfg.dynamics, cfg.env, cfg.wind_field(), mix_seed(cfg.seed, 0x656e76));
  QrdqnAgent agent(cfg.network_shape(), cfg.agent);
  const std::uint64_t hash = training_config_hash(cfg);

  TrainResult result = train(env, agent, cfg.out_dir, hash);

  const std::string metrics_path = cfg.out_dir + "/metrics.csv";
  write_metrics_csv(metrics_path, result.metrics);
  const std::string final_path = cfg.out_dir + "/checkpoint_final.bin";
  agent.save(final_path, hash);

  std::printf("episodes %zu  env steps %lld  updates %lld  skipped %lld\n",
              result.metrics.size(), result.env_steps, result.updates, result.skipped_updates);
  if (!result.metrics.empty()) {
    double tail_return = 0.0;
    std::size_t tail = std::min<std::size_t>(result.metrics.size(), 20);
    for (std::size_t i = result.metrics.size() - tail; i < result.metrics.size(); ++i)
      tail_return += result.metrics[i].episode_return;
    std::printf("mean return over last %zu episodes: %.17g\n", tail, tail_return / tail);
  }
  std::printf("metrics: %s\n", metrics_path.c_str());
  for (const std::string& svg : plot_metrics(result.metrics, cfg.out_dir))
    std::printf("plot: %s\n", svg.c_str());
  std::printf("checkpoint: %s\n", final_path.c_str());
  return 0;
}

std::unique_ptr<Policy> make_eval_policy(const std::string& kind, const std::string& checkpoint,
                                         const RunConfig& cfg, std::uint64_t policy_seed,
                                         std::unique_ptr<QrdqnAgent>& agent_storage) {
  if (kind == "rl") {
    agent_storage = load_agent(checkpoint, cfg);
    return std::make_unique<GreedyPolicy>(agent_storage.get());
  }
  if (kind == "pid") return std::make_unique<PidPolicy>(cfg.pid, cfg.env.throttle_cap);
  if (kind == "random") return std::make_unique<RandomPolicy>(policy_seed);
  return std::make_unique<IdlePolicy>();
}

int run_eval(const CommonOpts& opts, const std::string& policy_kind, const std::string& task_kind,
             const std::string& checkpoint) {
  RunConfig cfg = build_config(opts);
  prepare_out_dir(cfg);

  const std::uint64_t cell_seed = eval_cell_seed(cfg);
  BlimpEnv env(cfg.dynamics, cfg.env, cfg.wind_field(), cell_seed);
  std::unique_ptr<QrdqnAgent> agent;
  std::unique_ptr<Policy> policy =
      make_eval_policy(policy_kind, checkpoint, cfg, mix_seed(cell_seed, 1), agent);

  TrajectoryLog log;
  TaskReport report;
  if (task_kind == "nav-square") {
    report = run_navigation(env, *policy, track_from_config(cfg), cfg.task.timeout, &log);
  } else {
    const Vec3 target(0.0, 0.0, -cfg.task.altitude);
    report = run_hover(env, *policy, target, cfg.task.hover_duration, &log);
  }

  const std::string csv_path = cfg.out_dir + "/trajectory.csv";
  log.write_csv(csv_path);
  const std::string text = report_to_text(report);
  std::fputs(text.c_str(), stdout);
  write_text(cfg.out_dir + "/report.txt", text);
  std::printf("trajectory: %s\n", csv_path.c_str());
  // a timeout is a reported outcome, not a program failure
  return 0;
}

int run_sweep(const CommonOpts& opts, const std::string& param_name,
              std::vector<double> values, const std::string& policy_kind,
              const std::string& task_kind, const std::string& checkpoint) {
  RunConfig cfg = build_config(opts);
  prepare_out_dir(cfg);

  SweepParameter parameter = SweepParameter::wind_speed;
  if (param_name == "buoyancy") parameter = SweepParameter::buoyancy_factor;
  if (param_name == "ballast") parameter = SweepParameter::ballast_mass;
  if (values.empty()) {
    if (parameter == SweepParameter::wind_speed) values = {0.0, 2.0, 4.0};
    if (parameter == SweepParameter::buoyancy_factor) values = {1.0, 0.95, 0.9};
    if (parameter == SweepParameter::ballast_mass) values = {0.0, 0.1, 0.25};
  }

  TaskSpec task;
  if (task_kind == "hover") {
    task.kind = TaskSpec::Kind::hover;
    task.hover_target = Vec3(0.0, 0.0, -cfg.task.altitude);
    task.hover_duration_s = cfg.task.hover_duration;
  } else {
    task.kind = TaskSpec::Kind::navigation;
    task.track = track_from_config(cfg);
    task.timeout_s = cfg.task.timeout;
  }

  std::unique_ptr<QrdqnAgent> agent;
  if (policy_kind == "rl") agent = load_agent(checkpoint, cfg);
  PolicyFactory factory = [&cfg, &agent, &policy_kind](std::uint64_t seed)
      -> std::unique_ptr<Policy> {
    if (policy_kind == "rl") return std::make_unique<GreedyPolicy>(agent.get());
    if (policy_kind == "pid")
      return std::make_unique<PidPolicy>(cfg.pid, cfg.env.throttle_cap);
    if (policy_kind == "random") return std::make_unique<RandomPolicy>(seed);
    return std::make_unique<IdlePolicy>();
  };

  std::vector<TrajectoryLog> logs;
  SweepReport report = sweep(cfg.dynamics, cfg.env, cfg.wind_field(), parameter, values, task,
                             factory, cfg.seed, cfg.task.workers, &logs);

  const std::string text = report_to_text(report);
  std::fputs(text.c_str(), stdout);
  write_text(cfg.out_dir + "/sweep_report.txt", text);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const std::string path = cfg.out_dir + "/cell_" + std::to_string(i) + "_trajectory.csv";
    logs[i].write_csv(path);
    std::printf("trajectory: %s\n", path.c_str());
  }
  for (const SweepCell& cell : report.cells)
    if (cell.failed) return 1;
  return 0;
}

int run_plot(const CommonOpts& opts, const std::string& input, bool overlay_track) {
  RunConfig cfg = build_config(opts);
  fs::create_directories(cfg.out_dir);

  std::ifstream in(input, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + input + "'");
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  in.close();

  std::vector<std::string> written;
  if (header == kTrajectoryHeader) {
    TrajectoryLog log = read_trajectory_csv(input);
    TrackSpec track;
    if (overlay_track) track = track_from_config(cfg);
    written = plot_trajectory(log, overlay_track ? &track : nullptr, cfg.out_dir);
  } else if (header == kMetricsHeader) {
    written = plot_metrics(read_metrics_csv(input), cfg.out_dir);
  } else {
    throw std::runtime_error("'" + input + "' is neither a trajectory nor a metrics csv");
  }
  for (const std::string& path : written) std::printf("plot: %s\n", path.c_str());
  return 0;
}

// Fast standalone invariant checks; exits nonzero if any fails.
int run_verify(const CommonOpts& opts) {
  RunConfig cfg = build_config(opts);
  int failures = 0;
  auto check = [&failures](bool ok, const std::string& name, const std::string& detail) {
    if (ok)
      std::printf("ok   %s\n", name.c_str());
    else {
      std::printf("FAIL %s: %s\n", name.c_str(), detail.c_str());
      ++failures;
    }
  };

  {  // discrete action table: exact rows, symmetric pairs, frozen servo
    const double kMotor = 0.01, kSurface = 0.025;
    const ActuatorDelta expected[kNumActions] = {
        {0, 0, 0, 0, 0, 0, 0, 0},
        {0, 0, 0, 0, 0, 0, kMotor, kMotor},
        {0, 0, 0, 0, 0, 0, -kMotor, -kMotor},
        {0, kSurface, kSurface, 0, 0, 0, 0, 0},
        {0, -kSurface, -kSurface, 0, 0, 0, 0, 0},
        {kSurface, 0, 0, kSurface, kSurface, 0, 0, 0},
        {-kSurface, 0, 0, -kSurface, -kSurface, 0, 0, 0},
    };
    bool ok = true;
    std::string detail;
    for (int a = 0; a < kNumActions; ++a)
      if (decode_action(a) != expected[a]) {
        ok = false;
        detail = std::string("row ") + action_name(a) + " differs";
        break;
      }
    check(ok, "action-table", detail);
  }

  {  // analytic gradient vs central differences on a random batch
    NetworkShape shape = cfg.network_shape();
    Rng rng(20240u);
    QuantileNetwork online(shape), target(shape);
    online.init(rng);
    target.init(rng);
    std::vector<Transition> batch(8);
    for (Transition& t : batch) {
      for (int i = 0; i < 10; ++i) {
        t.obs[i] = rng.uniform(-1.0, 1.0);
        t.next_obs[i] = rng.uniform(-1.0, 1.0);
      }
      t.action = rng.uniform_int(kNumActions);
      t.reward = rng.uniform(-1.0, 1.0);
      t.done = rng.uniform01() < 0.2;
    }
    const Vector tau = quantile_midpoints(shape.num_quantiles);
    const Matrix targets = td_targets(batch, target, 0.99);
    auto batch_loss = [&](const QuantileNetwork& net) {
      double total = 0.0;
      for (std::size_t s = 0; s < batch.size(); ++s) {
        Matrix table = net.forward(batch[s].obs);
        total += quantile_huber_loss(table.row(batch[s].action).transpose(),
                                     targets.row(static_cast<int>(s)).transpose(), tau, 1.0)
                     .loss;
      }
      return total / static_cast<double>(batch.size());
    };
    Vector grad = Vector::Zero(shape.parameter_count());
    for (std::size_t s = 0; s < batch.size(); ++s) {
      QuantileNetwork::Cache cache;
      Matrix table = online.forward(batch[s].obs, cache);
      QuantileLoss ql =
          quantile_huber_loss(table.row(batch[s].action).transpose(),
                              targets.row(static_cast<int>(s)).transpose(), tau, 1.0);
      online.backward_action(cache, batch[s].action,
                             ql.grad / static_cast<double>(batch.size()), grad);
    }
    double worst = 0.0;
    const double h = 1e-5;
    QuantileNetwork probe = online;
    for (int k = 0; k < 120; ++k) {
      int idx = static_cast<int>(rng.raw() % static_cast<std::uint64_t>(grad.size()));
      const double saved = probe.params()[idx];
      probe.params()[idx] = saved + h;
      const double hi = batch_loss(probe);
      probe.params()[idx] = saved - h;
      const double lo = batch_loss(probe);
      probe.params()[idx] = saved;
      const double fd = (hi - lo) / (2.0 * h);
      const double rel =
          std::abs(grad[idx] - fd) / std::max({std::abs(grad[idx]), std::abs(fd), 1e-3});
      worst = std::max(worst, rel);
    }
    check(worst < 1e-4, "gradient-check",
          "max relative error " + std::to_string(worst));
  }

  {  // neutral trim is a fixed point of the integrator
    BlimpParams params;  // calibrated volume, no ballast
    BlimpState state = trim_state(params, Vec3(0.0, 0.0, -50.0), 0.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      BlimpState next = dynamics_step(state, ActuatorState{}, WindField{}, params, 0.1);
      worst = std::max(worst, (next.position - state.position).norm());
      state = next;
    }
    check(worst < 1e-12, "trim-fixed-point",
          "per-step drift " + std::to_string(worst));
  }

  {  // unpowered drift converges to the wind vector
    BlimpParams params;
    WindField wind;
    wind.velocity = Vec3(2.0, 0.0, 0.0);
    BlimpState state = trim_state(params, Vec3(0.0, 0.0, -50.0), 0.0);
    for (int i = 0; i < 6000; ++i)
      state = dynamics_step(state, ActuatorState{}, wind, params, 0.1);
    const double gap = (state.ground_velocity - wind.velocity).norm();
    check(gap <= 0.05 * wind.velocity.norm(), "wind-drift",
          "residual " + std::to_string(gap) + " m/s after 600 s");
  }

  {  // discrete rollouts stay inside the per-step actuator rate bounds
    BlimpEnv env(cfg.dynamics, cfg.env, cfg.wind_field(), 7u);
    Rng rng(8u);
    SmoothnessStats stats;
    env.reset();
    ActuatorState prev = env.actuators();
    for (int i = 0; i < 2000; ++i) {
      StepResult sr = env.step(rng.uniform_int(kNumActions));
      stats.absorb(prev, env.actuators());
      prev = env.actuators();
      if (sr.done) {
        env.reset();
        prev = env.actuators();
      }
    }
    const bool ok = stats.max_main_motor() <= 0.0105 + 1e-12 &&
                    stats.max_tail_or_fin() <= 0.02625 + 1e-12 &&
                    stats.max_delta[3] == 0.0;
    check(ok, "action-smoothness",
          "main " + std::to_string(stats.max_main_motor()) + ", tail/fin " +
              std::to_string(stats.max_tail_or_fin()));
  }

  if (failures == 0) {
    std::printf("verify: all checks passed\n");
    return 0;
  }
  std::printf("verify: %d check(s) failed\n", failures);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blimp navigation and hover control laboratory"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "train the discrete-action value policy");
  add_common(train_cmd, train_opts);

  CommonOpts eval_opts;
  std::string eval_policy = "pid", eval_task = "nav-square", eval_checkpoint;
  CLI::App* eval_cmd = app.add_subcommand("eval", "run one policy on one task");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--policy", eval_policy, "policy to run")
      ->check(CLI::IsMember({"rl", "pid", "random", "idle"}));
  eval_cmd->add_option("--task", eval_task, "task to run")
      ->check(CLI::IsMember({"nav-square", "hover"}));
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "trained agent (required for rl)");

  CommonOpts sweep_opts;
  std::string sweep_param, sweep_policy = "pid", sweep_task = "nav-square", sweep_checkpoint;
  std::vector<double> sweep_values;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "rerun one task across a parameter range");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--param", sweep_param, "swept parameter")
      ->required()
      ->check(CLI::IsMember({"wind", "buoyancy", "ballast"}));
  sweep_cmd->add_option("--values", sweep_values, "swept values (default: the standard set)");
  sweep_cmd->add_option("--policy", sweep_policy, "policy to run")
      ->check(CLI::IsMember({"rl", "pid", "random", "idle"}));
  sweep_cmd->add_option("--task", sweep_task, "task to run")
      ->check(CLI::IsMember({"nav-square", "hover"}));
  sweep_cmd->add_option("--checkpoint", sweep_checkpoint, "trained agent (required for rl)");

  CommonOpts plot_opts;
  std::string plot_input;
  bool plot_overlay = false;
  CLI::App* plot_cmd = app.add_subcommand("plot", "render a csv to svg plots");
  add_common(plot_cmd, plot_opts);
  plot_cmd->add_option("--input", plot_input, "trajectory or metrics csv")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_flag("--track", plot_overlay, "overlay the configured waypoint square");

  CommonOpts verify_opts;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the invariant checks");
  add_common(verify_cmd, verify_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  // cross-flag requirements are usage errors, same status as bad flags
  if (eval_cmd->parsed() && eval_policy == "rl" && eval_checkpoint.empty()) {
    std::fprintf(stderr, "error: eval --policy rl requires --checkpoint\n");
    return 2;
  }
  if (sweep_cmd->parsed() && sweep_policy == "rl" && sweep_checkpoint.empty()) {
    std::fprintf(stderr, "error: sweep --policy rl requires --checkpoint\n");
    return 2;
  }

  try {
    if (train_cmd->parsed()) return run_train(train_opts);
    if (eval_cmd->parsed()) return run_eval(eval_opts, eval_policy, eval_task, eval_checkpoint);
    if (sweep_cmd->parsed())
      return run_sweep(sweep_opts, sweep_param, sweep_values, sweep_policy, sweep_task,
                       sweep_checkpoint);
    if (plot_cmd->parsed()) return run_plot(plot_opts, plot_input, plot_overlay);
    if (verify_cmd->parsed()) return run_verify(verify_opts);
  } catch (const ConfigError& e) {
    // unknown keys and unparsable values are usage errors, like bad flags
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
