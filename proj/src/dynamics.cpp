#include "blimp/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace blimp {

namespace {

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

void require(bool ok, const char* field) {
  if (!ok) throw std::invalid_argument(std::string("invalid BlimpParams field: ") + field);
}

// Pitch is kept strictly inside (-pi/2, pi/2); the tuned model never gets
// near this, but a runaway parameter set must not produce a degenerate
// attitude matrix.
constexpr double kPitchLimit = 1.55;

}  // namespace

double neutral_hull_volume(double mass, double air_density) {
  double v = mass / air_density;
  double best = v;
  double best_err = std::abs(air_density * v - mass);
  double lo = v, hi = v;
  for (int i = 0; i < 4; ++i) {
    lo = std::nextafter(lo, 0.0);
    hi = std::nextafter(hi, 2.0 * v);
    for (double cand : {lo, hi}) {
      double err = std::abs(air_density * cand - mass);
      if (err < best_err) {
        best_err = err;
        best = cand;
      }
    }
  }
  return best;
}

BlimpParams::BlimpParams() { hull_volume = neutral_hull_volume(total_mass, air_density); }

void BlimpParams::validate() const {
  require(std::isfinite(total_mass) && total_mass > 0.0, "total_mass");
  require(std::isfinite(hull_volume) && hull_volume > 0.0, "hull_volume");
  require(std::isfinite(buoyancy_factor) && buoyancy_factor >= 0.5 && buoyancy_factor <= 1.5,
          "buoyancy_factor");
  require(std::isfinite(air_density) && air_density > 0.0, "air_density");
  require(std::isfinite(gravity) && gravity > 0.0, "gravity");
  require(std::isfinite(drag_area_axial) && drag_area_axial > 0.0, "drag_area_axial");
  require(std::isfinite(drag_area_vertical) && drag_area_vertical > 0.0, "drag_area_vertical");
  require(std::isfinite(drag_area_lateral) && drag_area_lateral > 0.0, "drag_area_lateral");
  require(std::isfinite(pitch_inertia) && pitch_inertia > 0.0, "pitch_inertia");
  require(std::isfinite(yaw_inertia) && yaw_inertia > 0.0, "yaw_inertia");
  require(std::isfinite(gondola_pendulum_arm) && gondola_pendulum_arm > 0.0,
          "gondola_pendulum_arm");
  require(std::isfinite(fin_moment_gain_pitch), "fin_moment_gain_pitch");
  require(std::isfinite(fin_moment_gain_yaw), "fin_moment_gain_yaw");
  require(std::isfinite(tail_motor_moment_gain), "tail_motor_moment_gain");
  require(std::isfinite(main_thrust_gain), "main_thrust_gain");
  require(std::isfinite(pitch_damping) && pitch_damping > 0.0, "pitch_damping");
  require(std::isfinite(yaw_damping) && yaw_damping > 0.0, "yaw_damping");
  require(std::isfinite(ballast_mass), "ballast_mass");
  require(std::isfinite(ballast_arm) && ballast_arm > 0.0, "ballast_arm");
  require(total_mass + ballast_mass > 0.0, "ballast_mass");
}

bool BlimpState::all_finite() const {
  return position.allFinite() && ground_velocity.allFinite() && std::isfinite(pitch) &&
         std::isfinite(yaw) && std::isfinite(pitch_rate) && std::isfinite(yaw_rate) &&
         std::isfinite(time);
}

ActuatorState apply_actuator_delta(const ActuatorState& act, const ActuatorDelta& delta,
                                   double throttle_cap) {
  ActuatorState out = act;
  out.m2 += delta[0];
  out.f0 += delta[1];
  out.f1 += delta[2];
  out.f2 += delta[3];
  out.f3 += delta[4];
  out.servo += delta[5];
  out.m0 += delta[6];
  out.m1 += delta[7];
  return clamp_actuators(out, throttle_cap);
}

ActuatorState clamp_actuators(const ActuatorState& act, double throttle_cap) {
  ActuatorState out;
  out.m0 = clip(act.m0, 0.0, throttle_cap);
  out.m2 = clip(act.m2, -1.0, 1.0);
  out.f0 = clip(act.f0, -1.0, 1.0);
  out.f2 = clip(act.f2, -1.0, 1.0);
  // symmetric pairs stay locked; servo is frozen
  out.m1 = out.m0;
  out.f1 = out.f0;
  out.f3 = out.f2;
  out.servo = 0.0;
  return out;
}

void WindField::validate() const {
  if (!velocity.allFinite() || velocity.norm() > 20.0)
    throw std::invalid_argument("invalid WindField: velocity must be finite with magnitude <= 20 m/s");
}

double net_vertical_force(const BlimpParams& p) {
  return p.gravity *
         (p.buoyancy_factor * (p.air_density * p.hull_volume) - p.total_mass - p.ballast_mass);
}

double trim_pitch(const BlimpParams& p) {
  // moment balance: total_mass*g*arm*sin(th) + ballast*g*ballast_arm*cos(th) = 0
  return std::atan(-(p.ballast_mass * p.ballast_arm) /
                   (p.total_mass * p.gondola_pendulum_arm));
}

BlimpState trim_state(const BlimpParams& params, const Vec3& position, double yaw) {
  params.validate();
  BlimpState s;
  s.position = position;
  s.ground_velocity = Vec3::Zero();
  s.pitch = trim_pitch(params);
  s.yaw = wrap_angle(yaw);
  s.pitch_rate = 0.0;
  s.yaw_rate = 0.0;
  s.time = 0.0;
  return s;
}

namespace {

void substep(BlimpState& s, const ActuatorState& act, const WindField& wind,
             const BlimpParams& p, double h) {
  const double ct = std::cos(s.pitch), st = std::sin(s.pitch);
  const double cy = std::cos(s.yaw), sy = std::sin(s.yaw);

  const Vec3 body_x(ct * cy, ct * sy, -st);
  const Vec3 body_y(-sy, cy, 0.0);
  const Vec3 body_z(st * cy, st * sy, ct);

  const Vec3 airspeed = s.ground_velocity - wind.velocity;
  const double u_a = airspeed.dot(body_x);
  const double v_a = airspeed.dot(body_y);
  const double w_a = airspeed.dot(body_z);
  const double dyn_pressure = 0.5 * p.air_density * airspeed.squaredNorm();

  Vec3 force = p.main_thrust_gain * (act.m0 + act.m1) * body_x;
  force += body_x * (-0.5 * p.air_density * p.drag_area_axial * std::abs(u_a) * u_a);
  force += body_y * (-0.5 * p.air_density * p.drag_area_lateral * std::abs(v_a) * v_a);
  force += body_z * (-0.5 * p.air_density * p.drag_area_vertical * std::abs(w_a) * w_a);
  force.z() += -net_vertical_force(p);

  const double mass = p.total_mass + p.ballast_mass;
  const Vec3 accel = force / mass;

  const double pitch_moment =
      p.fin_moment_gain_pitch * dyn_pressure * 0.5 * (act.f0 + act.f1) -
      p.total_mass * p.gravity * p.gondola_pendulum_arm * st -
      p.ballast_mass * p.gravity * p.ballast_arm * ct - p.pitch_damping * s.pitch_rate;
  const double yaw_moment = p.fin_moment_gain_yaw * dyn_pressure * 0.5 * (act.f2 + act.f3) +
                            p.tail_motor_moment_gain * act.m2 - p.yaw_damping * s.yaw_rate;

  // semi-implicit Euler: velocities first, then pose with the new velocities
  s.ground_velocity += accel * h;
  s.pitch_rate += (pitch_moment / p.pitch_inertia) * h;
  s.yaw_rate += (yaw_moment / p.yaw_inertia) * h;

  s.position += s.ground_velocity * h;
  s.pitch += s.pitch_rate * h;
  if (s.pitch > kPitchLimit) {
    s.pitch = kPitchLimit;
    s.pitch_rate = 0.0;
  } else if (s.pitch < -kPitchLimit) {
    s.pitch = -kPitchLimit;
    s.pitch_rate = 0.0;
  }
  s.yaw = wrap_angle(s.yaw + s.yaw_rate * h);

  // no lateral channel: remove the body-y velocity component each substep
  const double cy2 = std::cos(s.yaw), sy2 = std::sin(s.yaw);
  const Vec3 body_y2(-sy2, cy2, 0.0);
  s.ground_velocity -= s.ground_velocity.dot(body_y2) * body_y2;

  s.time += h;
}

}  // namespace

BlimpState dynamics_step(const BlimpState& state, const ActuatorState& act,
                         const WindField& wind, const BlimpParams& params, double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("dynamics_step: dt must be in (0, 0.1]");
  const int substeps = static_cast<int>(std::ceil(dt / 0.01 - 1e-12));
  const double h = dt / substeps;
  BlimpState s = state;
  for (int i = 0; i < substeps; ++i) substep(s, act, wind, params, h);
  if (!s.all_finite()) throw SimulationDiverged("dynamics_step: non-finite state", s);
  return s;
}

}  // namespace blimp
