#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "blimp/dynamics.hpp"
#include "blimp/rng.hpp"

namespace blimp {

// Discrete action set. Deltas are tabulated in the order
// (m2, f0, f1, f2, f3, s, m0, m1); see decode_action.
enum Action : int {
  kIdle = 0,
  kThrustUp = 1,
  kThrustDown = 2,
  kNoseUp = 3,
  kNoseDown = 4,
  kNoseLeft = 5,
  kNoseRight = 6,
};
inline constexpr int kNumActions = 7;

const char* action_name(int a);

// Exact table row for action a. Throws std::out_of_range outside {0..6}.
ActuatorDelta decode_action(int a);

struct TargetSpec {
  Vec3 position = Vec3::Zero(); // m, world NED
};

// Body-frame cylindrical coordinates of the target, recomputed from poses.
//   planar_distance l_r >= 0
//   bearing psi_r in (-pi, pi], relative to the nose
//   altitude_offset z_r > 0 when the target is above the vehicle
struct TargetCylindrical {
  double planar_distance = 0.0;
  double bearing = 0.0;
  double altitude_offset = 0.0;
};

TargetCylindrical relative_target(const BlimpState& state, const Vec3& target_position);

struct EnvConfig {
  double sim_dt = 0.1;          // s
  double policy_dt = 0.5;       // s, integer multiple of sim_dt
  double episode_length = 200.0;// s
  double success_radius = 10.0; // m
  double target_half_extent = 100.0; // m, target sampling box half side
  double min_target_altitude = 10.0; // m, targets stay airborne
  double noise_std = 0.05;      // observation noise std, scaled units
  double action_noise = 0.05;   // multiplicative delta noise bound
  // scaling constants
  double l_max = 200.0; // m
  double z_max = 100.0; // m
  double v_max = 10.0;  // m/s
  double w_max = 3.0;   // m/s
  // reward coefficients
  double i0 = 0.1, i1 = 0.7, i2 = 0.2; // navigation: z, l, psi
  double j0 = 0.3, j1 = 0.7;           // hover: z, l
  double k0 = 1.0;                     // action term
  double throttle_cap = 0.5;
  Vec3 spawn_position = Vec3(0.0, 0.0, -50.0);
  double spawn_yaw = 0.0;

  int steps_per_policy() const;
  int episode_policy_steps() const;
  void validate() const;
};

// 10-component policy input, every channel in [-1, 1].
//   act:   (m0/cap, s, m2, f2, f0)
//   blimp: (l_r/l_max, psi_r/pi, z_r/z_max, |V|/v_max, w/w_max)
struct Observation {
  std::array<double, 5> act{};
  std::array<double, 5> blimp{};

  Eigen::Matrix<double, 10, 1> as_vector() const;
};

Observation observe_clean(const BlimpState& state, const ActuatorState& act,
                          const Vec3& target_position, const EnvConfig& cfg);
Observation add_observation_noise(const Observation& obs, double noise_std, Rng& rng);
Observation observe(const BlimpState& state, const ActuatorState& act,
                    const Vec3& target_position, const EnvConfig& cfg, double noise_std,
                    Rng& rng);

// Weighted total r = 1.0*success + 0.95*track + 0.05*act.
struct RewardBreakdown {
  double success = 0.0; // {0, 1}
  double track = 0.0;   // <= 0
  double act = 0.0;     // <= 0
  double total = 0.0;
  bool in_success_region = false;
};

inline constexpr double kRewardWeightSuccess = 1.0;
inline constexpr double kRewardWeightTrack = 0.95;
inline constexpr double kRewardWeightAct = 0.05;

// Reward on the clean (pre-noise) scaled channels; distance is the physical
// euclidean blimp-to-target distance used for the success/hover switch.
RewardBreakdown compute_reward(const Observation& obs_clean, const ActuatorState& act,
                               double distance, const EnvConfig& cfg);

struct StepResult {
  Observation obs;
  RewardBreakdown reward;
  bool done = false;
  double distance = 0.0; // m, post-step
  int action = -1;       // -1 for direct actuator commands
};

// One trajectory row per policy step (plus the reset row). Column order is
// fixed; see kTrajectoryHeader.
struct TrajectoryRow {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  double pitch = 0.0, yaw = 0.0;
  double speed = 0.0, climb_rate = 0.0;
  ActuatorState actuators;
  int action = -1;
  RewardBreakdown reward;
  double distance = 0.0;
};

extern const char* const kTrajectoryHeader;

struct TrajectoryLog {
  std::vector<TrajectoryRow> rows;

  void add(const TrajectoryRow& row) { rows.push_back(row); }
  void write_csv(const std::string& path) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line(line) {}
  int line;
};

TrajectoryLog read_trajectory_csv(const std::string& path); // throws ParseError

// The simulator wrapped as the infinite-horizon MDP: Table-decoded actions,
// 0.5 s policy steps over 0.1 s sim steps, randomized targets, noise
// injection, fixed 200 s episodes.
class BlimpEnv {
 public:
  BlimpEnv(const BlimpParams& params, const EnvConfig& cfg, const WindField& wind = {},
           std::uint64_t seed = 0);

  void seed(std::uint64_t seed);
  Observation reset();

  // Discrete path: decode, perturb the delta multiplicatively, apply once,
  // advance one policy step.
  StepResult step(int action);

  // Direct path (continuous baseline): clamp the command to actuator ranges,
  // advance one policy step. Not subject to table rate limits.
  StepResult step_direct(const ActuatorState& command);

  // Re-observe after a target change; draws fresh observation noise.
  Observation observe_current();

  const BlimpState& state() const { return state_; }
  const ActuatorState& actuators() const { return act_; }
  const Vec3& target() const { return target_.position; }
  void set_target(const Vec3& position) { target_.position = position; }
  const EnvConfig& config() const { return cfg_; }
  const BlimpParams& params() const { return params_; }
  const WindField& wind() const { return wind_; }
  int steps_taken() const { return steps_; }
  double time() const { return state_.time; }
  double distance_to_target() const;

  TrajectoryRow snapshot_row(const StepResult& result) const;
  TrajectoryRow reset_row() const;

 private:
  StepResult advance(int action_index);

  BlimpParams params_;
  EnvConfig cfg_;
  WindField wind_;
  BlimpState state_;
  ActuatorState act_;
  TargetSpec target_;
  Rng rng_;
  int steps_ = 0;
};

}  // namespace blimp
