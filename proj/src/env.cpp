#include "blimp/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace blimp {

namespace {

constexpr std::array<std::array<double, 8>, kNumActions> kActionTable = {{
    // (m2,    f0,     f1,     f2,     f3,    s,  m0,    m1)
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},          // IDLE
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.01, 0.01},        // THRUST+
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.01, -0.01},      // THRUST-
    {0.0, 0.025, 0.025, 0.0, 0.0, 0.0, 0.0, 0.0},      // NOSE_UP
    {0.0, -0.025, -0.025, 0.0, 0.0, 0.0, 0.0, 0.0},    // NOSE_DOWN
    {0.025, 0.0, 0.0, 0.025, 0.025, 0.0, 0.0, 0.0},    // NOSE_LEFT
    {-0.025, 0.0, 0.0, -0.025, -0.025, 0.0, 0.0, 0.0}, // NOSE_RIGHT
}};

constexpr const char* kActionNames[kNumActions] = {
    "IDLE", "THRUST+", "THRUST-", "NOSE_UP", "NOSE_DOWN", "NOSE_LEFT", "NOSE_RIGHT"};

double clip1(double v) { return std::min(std::max(v, -1.0), 1.0); }

}  // namespace

const char* action_name(int a) {
  if (a < 0 || a >= kNumActions) return "?";
  return kActionNames[a];
}

ActuatorDelta decode_action(int a) {
  if (a < 0 || a >= kNumActions)
    throw std::out_of_range("decode_action: action index " + std::to_string(a) +
                            " outside {0..6}");
  ActuatorDelta d{};
  std::copy(kActionTable[a].begin(), kActionTable[a].end(), d.begin());
  return d;
}

TargetCylindrical relative_target(const BlimpState& state, const Vec3& target_position) {
  const double dn = target_position.x() - state.position.x();
  const double de = target_position.y() - state.position.y();
  TargetCylindrical g;
  g.planar_distance = std::hypot(dn, de);
  g.bearing = wrap_angle(std::atan2(de, dn) - state.yaw);
  g.altitude_offset = state.position.z() - target_position.z();
  return g;
}

int EnvConfig::steps_per_policy() const {
  return static_cast<int>(std::lround(policy_dt / sim_dt));
}

int EnvConfig::episode_policy_steps() const {
  return static_cast<int>(std::lround(episode_length / policy_dt));
}

void EnvConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("invalid EnvConfig: " + what); };
  if (!(sim_dt > 0.0 && sim_dt <= 0.1)) bad("sim_dt must be in (0, 0.1]");
  if (!(policy_dt > 0.0)) bad("policy_dt must be positive");
  const double ratio = policy_dt / sim_dt;
  if (std::abs(ratio - std::lround(ratio)) > 1e-9) bad("policy_dt must be an integer multiple of sim_dt");
  if (!(episode_length > 0.0)) bad("episode_length must be positive");
  if (!(success_radius > 0.0)) bad("success_radius must be positive");
  if (!(target_half_extent >= 0.0)) bad("target_half_extent must be non-negative");
  if (!(noise_std >= 0.0)) bad("noise_std must be non-negative");
  if (!(action_noise >= 0.0 && action_noise < 1.0)) bad("action_noise must be in [0, 1)");
  if (!(l_max > 0.0 && z_max > 0.0 && v_max > 0.0 && w_max > 0.0)) bad("scale constants must be positive");
  if (!(throttle_cap > 0.0 && throttle_cap <= 1.0)) bad("throttle_cap must be in (0, 1]");
}

Eigen::Matrix<double, 10, 1> Observation::as_vector() const {
  Eigen::Matrix<double, 10, 1> v;
  for (int i = 0; i < 5; ++i) v(i) = act[i];
  for (int i = 0; i < 5; ++i) v(5 + i) = blimp[i];
  return v;
}

Observation observe_clean(const BlimpState& state, const ActuatorState& act,
                          const Vec3& target_position, const EnvConfig& cfg) {
  const TargetCylindrical g = relative_target(state, target_position);
  const double speed = state.ground_velocity.norm();
  const double climb_rate = -state.ground_velocity.z();

  Observation obs;
  obs.act[0] = clip1(act.m0 / cfg.throttle_cap);
  obs.act[1] = clip1(act.servo);
  obs.act[2] = clip1(act.m2);
  obs.act[3] = clip1(act.f2);
  obs.act[4] = clip1(act.f0);
  obs.blimp[0] = clip1(g.planar_distance / cfg.l_max);
  obs.blimp[1] = clip1(g.bearing / M_PI);
  obs.blimp[2] = clip1(g.altitude_offset / cfg.z_max);
  obs.blimp[3] = clip1(speed / cfg.v_max);
  obs.blimp[4] = clip1(climb_rate / cfg.w_max);
  return obs;
}

Observation add_observation_noise(const Observation& obs, double noise_std, Rng& rng) {
  Observation out = obs;
  for (double& v : out.act) v = clip1(v + rng.gaussian(0.0, noise_std));
  for (double& v : out.blimp) v = clip1(v + rng.gaussian(0.0, noise_std));
  return out;
}

Observation observe(const BlimpState& state, const ActuatorState& act,
                    const Vec3& target_position, const EnvConfig& cfg, double noise_std,
                    Rng& rng) {
  return add_observation_noise(observe_clean(state, act, target_position, cfg), noise_std, rng);
}

RewardBreakdown compute_reward(const Observation& obs_clean, const ActuatorState& act,
                               double distance, const EnvConfig& cfg) {
  const double abs_l = std::abs(obs_clean.blimp[0]);
  const double abs_psi = std::abs(obs_clean.blimp[1]);
  const double abs_z = std::abs(obs_clean.blimp[2]);

  RewardBreakdown r;
  r.in_success_region = distance <= cfg.success_radius;
  r.success = r.in_success_region ? 1.0 : 0.0;
  r.track = r.in_success_region ? -(cfg.j0 * abs_z + cfg.j1 * abs_l)
                                : -(cfg.i0 * abs_z + cfg.i1 * abs_l + cfg.i2 * abs_psi);
  const double m0s = act.m0 / cfg.throttle_cap;
  const double m1s = act.m1 / cfg.throttle_cap;
  r.act = -cfg.k0 * std::sqrt(m0s * m0s + m1s * m1s + act.m2 * act.m2);
  r.total = kRewardWeightSuccess * r.success + kRewardWeightTrack * r.track +
            kRewardWeightAct * r.act;
  return r;
}

BlimpEnv::BlimpEnv(const BlimpParams& params, const EnvConfig& cfg, const WindField& wind,
                   std::uint64_t seed)
    : params_(params), cfg_(cfg), wind_(wind), rng_(seed) {
  params_.validate();
  cfg_.validate();
  wind_.validate();
  state_ = trim_state(params_, cfg_.spawn_position, cfg_.spawn_yaw);
  target_.position = cfg_.spawn_position;
}

void BlimpEnv::seed(std::uint64_t seed) { rng_ = Rng(seed); }

Observation BlimpEnv::reset() {
  state_ = trim_state(params_, cfg_.spawn_position, cfg_.spawn_yaw);
  act_ = ActuatorState{};
  steps_ = 0;

  Vec3 t = cfg_.spawn_position;
  t.x() += rng_.uniform(-cfg_.target_half_extent, cfg_.target_half_extent);
  t.y() += rng_.uniform(-cfg_.target_half_extent, cfg_.target_half_extent);
  t.z() += rng_.uniform(-cfg_.target_half_extent, cfg_.target_half_extent);
  t.z() = std::min(t.z(), -cfg_.min_target_altitude);
  target_.position = t;

  return observe(state_, act_, target_.position, cfg_, cfg_.noise_std, rng_);
}

double BlimpEnv::distance_to_target() const {
  return (target_.position - state_.position).norm();
}

StepResult BlimpEnv::step(int action) {
  ActuatorDelta delta = decode_action(action);
  if (cfg_.action_noise > 0.0) {
    const double factor = 1.0 + rng_.uniform(-cfg_.action_noise, cfg_.action_noise);
    for (double& d : delta) d *= factor;
  }
  act_ = apply_actuator_delta(act_, delta, cfg_.throttle_cap);
  return advance(action);
}

StepResult BlimpEnv::step_direct(const ActuatorState& command) {
  act_ = clamp_actuators(command, cfg_.throttle_cap);
  return advance(-1);
}

StepResult BlimpEnv::advance(int action_index) {
  const int n = cfg_.steps_per_policy();
  try {
    for (int i = 0; i < n; ++i) state_ = dynamics_step(state_, act_, wind_, params_, cfg_.sim_dt);
  } catch (const SimulationDiverged& e) {
    throw SimulationDiverged(std::string(e.what()) + " at episode step " +
                                 std::to_string(steps_ + 1),
                             e.state);
  }
  ++steps_;
  // integer step count is authoritative; keep the clock an exact multiple
  state_.time = steps_ * cfg_.policy_dt;

  StepResult result;
  result.action = action_index;
  result.distance = distance_to_target();
  const Observation clean = observe_clean(state_, act_, target_.position, cfg_);
  result.reward = compute_reward(clean, act_, result.distance, cfg_);
  result.obs = add_observation_noise(clean, cfg_.noise_std, rng_);
  result.done = steps_ >= cfg_.episode_policy_steps();
  return result;
}

Observation BlimpEnv::observe_current() {
  return observe(state_, act_, target_.position, cfg_, cfg_.noise_std, rng_);
}

TrajectoryRow BlimpEnv::snapshot_row(const StepResult& result) const {
  TrajectoryRow row;
  row.time = state_.time;
  row.position = state_.position;
  row.pitch = state_.pitch;
  row.yaw = state_.yaw;
  row.speed = state_.ground_velocity.norm();
  row.climb_rate = -state_.ground_velocity.z();
  row.actuators = act_;
  row.action = result.action;
  row.reward = result.reward;
  row.distance = result.distance;
  return row;
}

TrajectoryRow BlimpEnv::reset_row() const {
  TrajectoryRow row;
  row.time = state_.time;
  row.position = state_.position;
  row.pitch = state_.pitch;
  row.yaw = state_.yaw;
  row.speed = state_.ground_velocity.norm();
  row.climb_rate = -state_.ground_velocity.z();
  row.actuators = act_;
  row.action = -1;
  const Observation clean = observe_clean(state_, act_, target_.position, cfg_);
  row.reward = compute_reward(clean, act_, distance_to_target(), cfg_);
  row.distance = distance_to_target();
  return row;
}

const char* const kTrajectoryHeader =
    "time,north,east,down,pitch,yaw,speed,climb_rate,"
    "m0,m1,m2,s,f0,f1,f2,f3,action,r_success,r_track,r_act,r_total,distance";

namespace {

void append_field(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
  line += ',';
}

}  // namespace

void TrajectoryLog::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open trajectory file for writing: " + path);
  out << kTrajectoryHeader << '\n';
  for (const TrajectoryRow& r : rows) {
    std::string line;
    line.reserve(420);
    append_field(line, r.time);
    append_field(line, r.position.x());
    append_field(line, r.position.y());
    append_field(line, r.position.z());
    append_field(line, r.pitch);
    append_field(line, r.yaw);
    append_field(line, r.speed);
    append_field(line, r.climb_rate);
    append_field(line, r.actuators.m0);
    append_field(line, r.actuators.m1);
    append_field(line, r.actuators.m2);
    append_field(line, r.actuators.servo);
    append_field(line, r.actuators.f0);
    append_field(line, r.actuators.f1);
    append_field(line, r.actuators.f2);
    append_field(line, r.actuators.f3);
    line += std::to_string(r.action);
    line += ',';
    append_field(line, r.reward.success);
    append_field(line, r.reward.track);
    append_field(line, r.reward.act);
    append_field(line, r.reward.total);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", r.distance);
    line += buf;
    out << line << '\n';
  }
}

TrajectoryLog read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1);
  ++lineno;
  if (line != kTrajectoryHeader) throw ParseError("unexpected trajectory header", 1);

  TrajectoryLog log;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 22> v{};
    std::size_t pos = 0;
    for (int i = 0; i < 22; ++i) {
      if (pos > line.size()) throw ParseError("too few fields", lineno);
      const std::size_t comma = line.find(',', pos);
      const std::string field =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      char* end = nullptr;
      v[i] = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0') throw ParseError("bad numeric field", lineno);
      if (comma == std::string::npos) {
        if (i != 21) throw ParseError("too few fields", lineno);
        pos = line.size() + 1;
      } else {
        pos = comma + 1;
      }
    }
    if (pos <= line.size()) throw ParseError("too many fields", lineno);

    TrajectoryRow r;
    r.time = v[0];
    r.position = Vec3(v[1], v[2], v[3]);
    r.pitch = v[4];
    r.yaw = v[5];
    r.speed = v[6];
    r.climb_rate = v[7];
    r.actuators.m0 = v[8];
    r.actuators.m1 = v[9];
    r.actuators.m2 = v[10];
    r.actuators.servo = v[11];
    r.actuators.f0 = v[12];
    r.actuators.f1 = v[13];
    r.actuators.f2 = v[14];
    r.actuators.f3 = v[15];
    r.action = static_cast<int>(v[16]);
    r.reward.success = v[17];
    r.reward.track = v[18];
    r.reward.act = v[19];
    r.reward.total = v[20];
    r.reward.in_success_region = r.reward.success > 0.5;
    r.distance = v[21];
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace blimp
