#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "blimp/agent.hpp"
#include "blimp/env.hpp"
#include "blimp/pid.hpp"

namespace blimp {

// A policy drives the env one decision at a time. Discrete policies go
// through env.step (table deltas, action noise); the PID goes through
// env.step_direct (absolute clamped commands).
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin(BlimpEnv& env) { (void)env; }          // episode start
  virtual StepResult step(BlimpEnv& env, const Observation& obs) = 0;
  virtual void retarget(BlimpEnv& env) { (void)env; }       // target moved
  virtual std::string name() const = 0;
};

class IdlePolicy : public Policy {
 public:
  StepResult step(BlimpEnv& env, const Observation&) override { return env.step(kIdle); }
  std::string name() const override { return "idle"; }
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  StepResult step(BlimpEnv& env, const Observation&) override {
    return env.step(rng_.uniform_int(kNumActions));
  }
  std::string name() const override { return "random"; }

 private:
  Rng rng_;
};

// Greedy rollout of a trained (or untrained) value network. The agent is
// borrowed and never mutated; one agent may serve many concurrent policies.
class GreedyPolicy : public Policy {
 public:
  explicit GreedyPolicy(const QrdqnAgent* agent) : agent_(agent) {}
  StepResult step(BlimpEnv& env, const Observation& obs) override {
    return env.step(agent_->greedy(obs));
  }
  std::string name() const override { return "rl"; }

 private:
  const QrdqnAgent* agent_;
};

class PidPolicy : public Policy {
 public:
  explicit PidPolicy(const PidGains& gains, double throttle_cap = kDefaultThrottleCap)
      : controller_(gains, throttle_cap) {}
  void begin(BlimpEnv& env) override {
    (void)env;
    controller_.reset();
  }
  StepResult step(BlimpEnv& env, const Observation&) override {
    // the baseline reads the simulator state directly; observation noise is
    // an RL-side training artifact
    ActuatorState cmd = controller_.command(env.state(), env.actuators(), env.target(),
                                            env.config(), env.config().policy_dt);
    return env.step_direct(cmd);
  }
  void retarget(BlimpEnv& env) override {
    (void)env;
    controller_.reset();
  }
  std::string name() const override { return "pid"; }

 private:
  PidController controller_;
};

// Closed waypoint loop. The default square matches the navigation task
// geometry: 100 m sides centered on the origin at 50 m altitude, visited
// counter-clockwise when plotted east-north.
struct TrackSpec {
  std::vector<Vec3> waypoints;  // world NED
  double trigger_radius = 15.0; // m
  int laps = 3;
  bool counter_clockwise = true;

  void validate() const;
};

TrackSpec make_square_track(double side = 100.0, double altitude = 50.0,
                            bool counter_clockwise = true);

struct TriggerEvent {
  int lap = 0;       // 1-based
  int waypoint = 0;  // index into TrackSpec::waypoints
  double time = 0.0; // s
  double distance = 0.0; // m, trigger distance
};

// Largest per-policy-step actuator change, per channel.
struct SmoothnessStats {
  std::array<double, 8> max_delta{}; // m0, m1, m2, servo, f0, f1, f2, f3

  double max_main_motor() const { return std::max(max_delta[0], max_delta[1]); }
  // tail motor and fins share the same table increment
  double max_tail_or_fin() const;
  void absorb(const ActuatorState& prev, const ActuatorState& cur);
  void merge(const SmoothnessStats& other);
};

struct TaskReport {
  std::string task;    // "navigation" | "hover"
  std::string policy;
  bool completed = false;
  double total_time = 0.0; // s: last trigger when completed, else elapsed
  long long steps = 0;
  std::vector<TriggerEvent> triggers;

  double mean_cross_track = 0.0, max_cross_track = 0.0;       // m
  double mean_altitude_error = 0.0, max_altitude_error = 0.0; // m
  double energy_proxy = 0.0; // integral of (m0^2 + m1^2 + m2^2) dt
  SmoothnessStats smoothness;
  double total_reward = 0.0, mean_reward = 0.0;
  std::vector<RewardBreakdown> rewards; // one per policy step

  // hover statistics
  double mean_planar_radius = 0.0, max_planar_radius = 0.0; // m
  double altitude_bias = 0.0; // mean signed height above the target, m
};

std::string report_to_text(const TaskReport& report);

// Runs the waypoint loop until laps * waypoints triggers or the timeout.
// The active waypoint is the env target; a trigger (post-step distance <=
// trigger radius) advances it. Episode-budget flags from the env are
// ignored: the task owns its clock.
TaskReport run_navigation(BlimpEnv& env, Policy& policy, const TrackSpec& track,
                          double timeout_s = 3000.0, TrajectoryLog* log = nullptr);

// Holds one fixed target for the duration. Zero duration yields an empty
// (but valid) report.
TaskReport run_hover(BlimpEnv& env, Policy& policy, const Vec3& target,
                     double duration_s = 600.0, TrajectoryLog* log = nullptr);

// Runs `episodes` plain env episodes (randomized targets, env-owned done
// flag) and reports the undiscounted return statistics.
struct EvalSummary {
  std::vector<double> returns;
  double mean_return = 0.0;
  double std_return = 0.0;
};
EvalSummary evaluate_policy(BlimpEnv& env, Policy& policy, int episodes);

enum class SweepParameter { wind_speed, buoyancy_factor, ballast_mass };

const char* sweep_parameter_name(SweepParameter p);

struct TaskSpec {
  enum class Kind { navigation, hover } kind = Kind::navigation;
  TrackSpec track = make_square_track();
  double timeout_s = 3000.0;
  Vec3 hover_target = Vec3(0.0, 0.0, -50.0);
  double hover_duration_s = 600.0;
};

struct SweepCell {
  double value = 0.0;
  bool failed = false;
  std::string error;
  TaskReport report;
};

struct SweepReport {
  SweepParameter parameter = SweepParameter::wind_speed;
  std::vector<SweepCell> cells;
};

std::string report_to_text(const SweepReport& report);

using PolicyFactory = std::function<std::unique_ptr<Policy>(std::uint64_t seed)>;

// One independent task run per value: cell i gets env seed
// mix_seed(sweep_seed, i) and policy seed mix_seed(mix_seed(sweep_seed, i), 1),
// so a single-value sweep reproduces a plain run bit for bit. Cell failures
// are captured; the sweep continues. workers > 1 runs cells concurrently.
SweepReport sweep(const BlimpParams& base_params, const EnvConfig& base_cfg,
                  const WindField& base_wind, SweepParameter parameter,
                  const std::vector<double>& values, const TaskSpec& task,
                  const PolicyFactory& make_policy, std::uint64_t sweep_seed, int workers = 1,
                  std::vector<TrajectoryLog>* logs = nullptr);

// Largest per-step actuator change over a logged trajectory. Rows with
// time == 0 start a new episode segment; deltas never span segments.
SmoothnessStats smoothness_audit(const TrajectoryLog& log);
SmoothnessStats smoothness_audit_file(const std::string& csv_path); // throws ParseError

}  // namespace blimp
