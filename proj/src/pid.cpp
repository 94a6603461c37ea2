#include "blimp/pid.hpp"

#include <algorithm>
#include <cmath>

namespace blimp {

void PidGains::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw std::invalid_argument(std::string("invalid PidGains: ") + field);
  };
  for (double g : {yaw_kp, yaw_ki, yaw_kd, tail_share, altitude_kp, altitude_ki, altitude_kd,
                   pitch_kp, pitch_kd, speed_kp, speed_ki, speed_kd})
    require(std::isfinite(g), "gains must be finite");
  require(std::isfinite(yaw_integral_clamp) && yaw_integral_clamp > 0.0, "yaw_integral_clamp");
  require(std::isfinite(altitude_integral_clamp) && altitude_integral_clamp > 0.0,
          "altitude_integral_clamp");
  require(std::isfinite(speed_integral_clamp) && speed_integral_clamp > 0.0,
          "speed_integral_clamp");
  require(std::isfinite(pitch_reference_limit) && pitch_reference_limit > 0.0,
          "pitch_reference_limit");
  require(std::isfinite(reference_speed) && reference_speed >= 0.0, "reference_speed");
  require(std::isfinite(yaw_deadband_m) && yaw_deadband_m >= 0.0, "yaw_deadband_m");
  require(std::isfinite(speed_deadband_m) && speed_deadband_m >= 0.0, "speed_deadband_m");
}

PidController::PidController(const PidGains& gains, double throttle_cap)
    : gains_(gains), throttle_cap_(throttle_cap) {
  gains_.validate();
  if (!(throttle_cap > 0.0 && throttle_cap <= 1.0))
    throw std::invalid_argument("PidController: throttle_cap must be in (0, 1]");
}

void PidController::reset() {
  yaw_integral_ = 0.0;
  altitude_integral_ = 0.0;
  speed_integral_ = 0.0;
  previous_speed_ = 0.0;
  has_previous_speed_ = false;
}

ActuatorState PidController::command(const BlimpState& state, const ActuatorState& act,
                                     const Vec3& target, const EnvConfig& cfg, double dt) {
  (void)act;
  if (!(dt > 0.0)) throw std::invalid_argument("PidController: dt must be positive");

  const TargetCylindrical rel = relative_target(state, target);
  const double climb_rate = -state.ground_velocity.z();
  const double speed = state.ground_velocity.norm();

  // -- yaw: bearing error straight to the yaw effectors. Nearly on top of
  //    the target the bearing flips sign with every stray centimeter, so it
  //    is gated off inside the deadband instead of chased. ----------------
  const double bearing = rel.planar_distance < gains_.yaw_deadband_m ? 0.0 : rel.bearing;
  yaw_integral_ = std::clamp(yaw_integral_ + gains_.yaw_ki * bearing * dt,
                             -gains_.yaw_integral_clamp, gains_.yaw_integral_clamp);
  const double yaw_u =
      gains_.yaw_kp * bearing + yaw_integral_ - gains_.yaw_kd * state.yaw_rate;

  // -- altitude: height error -> pitch reference -> elevator fins --------
  altitude_integral_ =
      std::clamp(altitude_integral_ + gains_.altitude_ki * rel.altitude_offset * dt,
                 -gains_.altitude_integral_clamp, gains_.altitude_integral_clamp);
  const double pitch_ref =
      std::clamp(gains_.altitude_kp * rel.altitude_offset + altitude_integral_ -
                     gains_.altitude_kd * climb_rate,
                 -gains_.pitch_reference_limit, gains_.pitch_reference_limit);
  const double pitch_u =
      gains_.pitch_kp * (pitch_ref - state.pitch) - gains_.pitch_kd * state.pitch_rate;

  // -- speed: hold the reference while far, coast to rest near the target.
  //    Thrust only points out the nose, so it is withheld while the target
  //    sits behind (turn first, then burn); with the target nearly overhead
  //    the bearing carries no information and the gate stays open so the
  //    vehicle can build the airspeed its fins need. ----------------------
  const double distance = (target - state.position).norm();
  const double alignment = rel.planar_distance < gains_.yaw_deadband_m
                               ? 1.0
                               : std::max(0.0, std::cos(rel.bearing));
  double speed_ref = gains_.reference_speed * std::min(1.0, distance / cfg.success_radius);
  speed_ref *= alignment;
  if (distance < gains_.speed_deadband_m) speed_ref = 0.0;
  const double speed_error = speed_ref - speed;
  speed_integral_ = std::clamp(speed_integral_ + gains_.speed_ki * speed_error * dt,
                               -gains_.speed_integral_clamp, gains_.speed_integral_clamp);
  double accel = 0.0;
  if (has_previous_speed_) accel = (speed - previous_speed_) / dt;
  previous_speed_ = speed;
  has_previous_speed_ = true;
  const double speed_u = gains_.speed_kp * speed_error + speed_integral_ - gains_.speed_kd * accel;

  ActuatorState cmd;
  cmd.m0 = speed_u;
  cmd.m1 = speed_u;
  cmd.m2 = gains_.tail_share * yaw_u;
  cmd.f0 = pitch_u;
  cmd.f1 = pitch_u;
  cmd.f2 = yaw_u;
  cmd.f3 = yaw_u;
  return clamp_actuators(cmd, throttle_cap_);
}

}  // namespace blimp
