#include "blimp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

namespace blimp {

void TrackSpec::validate() const {
  if (waypoints.empty()) throw std::invalid_argument("TrackSpec: at least one waypoint");
  if (!(trigger_radius > 0.0)) throw std::invalid_argument("TrackSpec: trigger radius > 0");
  if (laps < 1) throw std::invalid_argument("TrackSpec: laps >= 1");
  for (const Vec3& w : waypoints)
    if (!w.allFinite()) throw std::invalid_argument("TrackSpec: waypoints must be finite");
}

TrackSpec make_square_track(double side, double altitude, bool counter_clockwise) {
  if (!(side > 0.0)) throw std::invalid_argument("square track: side must be positive");
  const double s = side / 2.0;
  const double d = -altitude;
  TrackSpec track;
  track.counter_clockwise = counter_clockwise;
  // counter-clockwise on an east-north plot; rows are NED (north, east, down)
  track.waypoints = {Vec3(s, s, d), Vec3(s, -s, d), Vec3(-s, -s, d), Vec3(-s, s, d)};
  if (!counter_clockwise) std::reverse(track.waypoints.begin() + 1, track.waypoints.end());
  return track;
}

double SmoothnessStats::max_tail_or_fin() const {
  double m = max_delta[2];
  for (int i = 4; i < 8; ++i) m = std::max(m, max_delta[i]);
  return m;
}

void SmoothnessStats::absorb(const ActuatorState& prev, const ActuatorState& cur) {
  const double deltas[8] = {cur.m0 - prev.m0, cur.m1 - prev.m1, cur.m2 - prev.m2,
                            cur.servo - prev.servo, cur.f0 - prev.f0, cur.f1 - prev.f1,
                            cur.f2 - prev.f2, cur.f3 - prev.f3};
  for (int i = 0; i < 8; ++i) max_delta[i] = std::max(max_delta[i], std::abs(deltas[i]));
}

void SmoothnessStats::merge(const SmoothnessStats& other) {
  for (int i = 0; i < 8; ++i) max_delta[i] = std::max(max_delta[i], other.max_delta[i]);
}

namespace {

// planar (north-east) distance from p to the segment a->b
double cross_track_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const double abx = b.x() - a.x(), aby = b.y() - a.y();
  const double apx = p.x() - a.x(), apy = p.y() - a.y();
  const double len2 = abx * abx + aby * aby;
  double t = len2 > 0.0 ? (apx * abx + apy * aby) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = apx - t * abx, dy = apy - t * aby;
  return std::hypot(dx, dy);
}

struct RunningMean {
  double sum = 0.0;
  long long n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
};

void fmt(std::ostringstream& out, const char* key, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << key << ": " << buf << '\n';
}

}  // namespace

TaskReport run_navigation(BlimpEnv& env, Policy& policy, const TrackSpec& track,
                          double timeout_s, TrajectoryLog* log) {
  track.validate();
  if (!(timeout_s > 0.0)) throw std::invalid_argument("run_navigation: timeout must be positive");

  TaskReport report;
  report.task = "navigation";
  report.policy = policy.name();

  env.reset(); // the drawn target is replaced by the first waypoint
  env.set_target(track.waypoints[0]);
  policy.begin(env);
  Observation obs = env.observe_current();
  if (log) log->add(env.reset_row());

  const int total_triggers = track.laps * static_cast<int>(track.waypoints.size());
  int waypoint = 0;
  int lap = 1;
  Vec3 leg_start = env.state().position;
  ActuatorState prev_act = env.actuators();
  RunningMean cross_track, altitude_error, reward_mean;
  const double dt = env.config().policy_dt;

  while (env.time() < timeout_s - 1e-9) {
    StepResult sr = policy.step(env, obs);
    obs = sr.obs;
    ++report.steps;
    if (log) log->add(env.snapshot_row(sr));

    const Vec3& wp = track.waypoints[static_cast<std::size_t>(waypoint)];
    const double xt = cross_track_distance(env.state().position, leg_start, wp);
    cross_track.add(xt);
    report.max_cross_track = std::max(report.max_cross_track, xt);
    const double alt_err = std::abs(env.state().position.z() - wp.z());
    altitude_error.add(alt_err);
    report.max_altitude_error = std::max(report.max_altitude_error, alt_err);

    const ActuatorState& cur = env.actuators();
    report.energy_proxy += (cur.m0 * cur.m0 + cur.m1 * cur.m1 + cur.m2 * cur.m2) * dt;
    report.smoothness.absorb(prev_act, cur);
    prev_act = cur;
    report.rewards.push_back(sr.reward);
    report.total_reward += sr.reward.total;
    reward_mean.add(sr.reward.total);

    if (sr.distance <= track.trigger_radius) {
      report.triggers.push_back({lap, waypoint, env.time(), sr.distance});
      leg_start = wp;
      if (static_cast<int>(report.triggers.size()) >= total_triggers) {
        report.completed = true;
        report.total_time = env.time();
        break;
      }
      waypoint = (waypoint + 1) % static_cast<int>(track.waypoints.size());
      if (waypoint == 0) ++lap;
      env.set_target(track.waypoints[static_cast<std::size_t>(waypoint)]);
      policy.retarget(env);
      obs = env.observe_current();
    }
  }

  if (!report.completed) report.total_time = env.time();
  report.mean_cross_track = cross_track.mean();
  report.mean_altitude_error = altitude_error.mean();
  report.mean_reward = reward_mean.mean();
  return report;
}

TaskReport run_hover(BlimpEnv& env, Policy& policy, const Vec3& target, double duration_s,
                     TrajectoryLog* log) {
  if (duration_s < 0.0) throw std::invalid_argument("run_hover: duration must be non-negative");
  TaskReport report;
  report.task = "hover";
  report.policy = policy.name();

  env.reset();
  env.set_target(target);
  policy.begin(env);
  Observation obs = env.observe_current();
  if (log) log->add(env.reset_row());

  ActuatorState prev_act = env.actuators();
  RunningMean radius, altitude_error, bias, reward_mean;
  const double dt = env.config().policy_dt;

  while (env.time() < duration_s - 1e-9) {
    StepResult sr = policy.step(env, obs);
    obs = sr.obs;
    ++report.steps;
    if (log) log->add(env.snapshot_row(sr));

    const Vec3& p = env.state().position;
    const double r = std::hypot(p.x() - target.x(), p.y() - target.y());
    radius.add(r);
    report.max_planar_radius = std::max(report.max_planar_radius, r);
    const double height_above = target.z() - p.z(); // NED: smaller down = higher
    bias.add(height_above);
    altitude_error.add(std::abs(height_above));
    report.max_altitude_error = std::max(report.max_altitude_error, std::abs(height_above));

    const ActuatorState& cur = env.actuators();
    report.energy_proxy += (cur.m0 * cur.m0 + cur.m1 * cur.m1 + cur.m2 * cur.m2) * dt;
    report.smoothness.absorb(prev_act, cur);
    prev_act = cur;
    report.rewards.push_back(sr.reward);
    report.total_reward += sr.reward.total;
    reward_mean.add(sr.reward.total);
  }

  report.completed = true; // the hover task has no failure condition
  report.total_time = env.time();
  report.mean_planar_radius = radius.mean();
  report.mean_altitude_error = altitude_error.mean();
  report.altitude_bias = bias.mean();
  report.mean_reward = reward_mean.mean();
  return report;
}

EvalSummary evaluate_policy(BlimpEnv& env, Policy& policy, int episodes) {
  if (episodes < 0) throw std::invalid_argument("evaluate_policy: episodes must be non-negative");
  EvalSummary summary;
  for (int e = 0; e < episodes; ++e) {
    Observation obs = env.reset();
    policy.begin(env);
    double ret = 0.0;
    while (true) {
      StepResult sr = policy.step(env, obs);
      obs = sr.obs;
      ret += sr.reward.total;
      if (sr.done) break;
    }
    summary.returns.push_back(ret);
  }
  if (!summary.returns.empty()) {
    double sum = 0.0;
    for (double r : summary.returns) sum += r;
    summary.mean_return = sum / static_cast<double>(summary.returns.size());
    double var = 0.0;
    for (double r : summary.returns) var += (r - summary.mean_return) * (r - summary.mean_return);
    summary.std_return = std::sqrt(var / static_cast<double>(summary.returns.size()));
  }
  return summary;
}

const char* sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::wind_speed: return "wind_speed";
    case SweepParameter::buoyancy_factor: return "buoyancy_factor";
    case SweepParameter::ballast_mass: return "ballast_mass";
  }
  return "?";
}

SweepReport sweep(const BlimpParams& base_params, const EnvConfig& base_cfg,
                  const WindField& base_wind, SweepParameter parameter,
                  const std::vector<double>& values, const TaskSpec& task,
                  const PolicyFactory& make_policy, std::uint64_t sweep_seed, int workers,
                  std::vector<TrajectoryLog>* logs) {
  for (double v : values)
    if (!std::isfinite(v))
      throw std::invalid_argument("sweep: values must be finite");
  SweepReport report;
  report.parameter = parameter;
  report.cells.resize(values.size());
  if (logs) logs->assign(values.size(), TrajectoryLog{});
  if (values.empty()) return report;

  auto run_cell = [&](std::size_t i) {
    SweepCell& cell = report.cells[i];
    cell.value = values[i];
    try {
      BlimpParams params = base_params;
      EnvConfig cfg = base_cfg;
      WindField wind = base_wind;
      switch (parameter) {
        case SweepParameter::wind_speed:
          wind.velocity = Vec3(values[i], 0.0, 0.0); // blowing toward north
          break;
        case SweepParameter::buoyancy_factor:
          params.buoyancy_factor = values[i];
          break;
        case SweepParameter::ballast_mass:
          params.ballast_mass = values[i];
          break;
      }
      const std::uint64_t cell_seed = mix_seed(sweep_seed, static_cast<std::uint64_t>(i));
      BlimpEnv env(params, cfg, wind, cell_seed);
      std::unique_ptr<Policy> policy = make_policy(mix_seed(cell_seed, 1));
      TrajectoryLog* log = logs ? &(*logs)[i] : nullptr;
      if (task.kind == TaskSpec::Kind::navigation)
        cell.report = run_navigation(env, *policy, task.track, task.timeout_s, log);
      else
        cell.report = run_hover(env, *policy, task.hover_target, task.hover_duration_s, log);
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  };

  if (workers <= 1 || values.size() == 1) {
    for (std::size_t i = 0; i < values.size(); ++i) run_cell(i);
    return report;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < values.size(); i = next.fetch_add(1)) run_cell(i);
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(workers), values.size());
  pool.reserve(n);
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return report;
}

SmoothnessStats smoothness_audit(const TrajectoryLog& log) {
  SmoothnessStats stats;
  bool have_prev = false;
  ActuatorState prev;
  for (const TrajectoryRow& row : log.rows) {
    if (row.time == 0.0) have_prev = false; // reset row: new episode segment
    if (have_prev) stats.absorb(prev, row.actuators);
    prev = row.actuators;
    have_prev = true;
  }
  return stats;
}

SmoothnessStats smoothness_audit_file(const std::string& csv_path) {
  return smoothness_audit(read_trajectory_csv(csv_path));
}

std::string report_to_text(const TaskReport& report) {
  std::ostringstream out;
  out << "task: " << report.task << '\n';
  out << "policy: " << report.policy << '\n';
  out << "completed: " << (report.completed ? "yes" : "no") << '\n';
  fmt(out, "total_time_s", report.total_time);
  out << "steps: " << report.steps << '\n';
  out << "triggers: " << report.triggers.size() << '\n';
  for (const TriggerEvent& t : report.triggers) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  lap %d waypoint %d time %.17g distance %.17g\n", t.lap,
                  t.waypoint, t.time, t.distance);
    out << buf;
  }
  fmt(out, "mean_cross_track_m", report.mean_cross_track);
  fmt(out, "max_cross_track_m", report.max_cross_track);
  fmt(out, "mean_altitude_error_m", report.mean_altitude_error);
  fmt(out, "max_altitude_error_m", report.max_altitude_error);
  fmt(out, "mean_planar_radius_m", report.mean_planar_radius);
  fmt(out, "max_planar_radius_m", report.max_planar_radius);
  fmt(out, "altitude_bias_m", report.altitude_bias);
  fmt(out, "energy_proxy", report.energy_proxy);
  fmt(out, "total_reward", report.total_reward);
  fmt(out, "mean_reward", report.mean_reward);
  fmt(out, "max_main_motor_step", report.smoothness.max_main_motor());
  fmt(out, "max_tail_or_fin_step", report.smoothness.max_tail_or_fin());
  return out.str();
}

std::string report_to_text(const SweepReport& report) {
  std::ostringstream out;
  out << "sweep: " << sweep_parameter_name(report.parameter) << '\n';
  out << "cells: " << report.cells.size() << "\n\n";
  for (const SweepCell& cell : report.cells) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", cell.value);
    out << "-- " << sweep_parameter_name(report.parameter) << " = " << buf << " --\n";
    if (cell.failed)
      out << "failed: " << cell.error << '\n';
    else
      out << report_to_text(cell.report);
    out << '\n';
  }
  return out.str();
}

}  // namespace blimp
