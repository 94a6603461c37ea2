#pragma once

#include "blimp/dynamics.hpp"
#include "blimp/env.hpp"

namespace blimp {

// Cascade gains. Three channels: bearing -> rudder fins + tail motor,
// altitude -> pitch reference -> elevator fins, ground speed -> main motors.
// Defaults are tuned once against the default plant and frozen; they complete
// the square track in still air with margin.
struct PidGains {
  // yaw channel (error: relative bearing, rad)
  double yaw_kp = 1.2;
  double yaw_ki = 0.02;
  double yaw_kd = 0.8;             // acts on measured yaw rate
  double yaw_integral_clamp = 0.3; // bound on the integral contribution
  double tail_share = 0.6;         // fraction of the yaw command sent to m2
  double yaw_deadband_m = 1.0;     // planar distance below which bearing is
                                   // noise, not signal: no yaw correction

  // altitude channel (error: relative height, m), outer loop of the cascade
  double altitude_kp = 0.05;
  double altitude_ki = 0.0015;
  double altitude_kd = 0.3;             // acts on measured climb rate
  double altitude_integral_clamp = 0.2; // rad, folded into the pitch reference
  double pitch_reference_limit = 0.35;  // rad

  // pitch inner loop (error: pitch reference - pitch, rad)
  double pitch_kp = 6.0;
  double pitch_kd = 2.0; // acts on measured pitch rate

  // speed channel (error: reference - ground speed, m/s)
  double speed_kp = 0.4;
  double speed_ki = 0.1;
  double speed_kd = 0.0;             // acts on measured acceleration
  double speed_integral_clamp = 0.3; // bound on the motor contribution
  double reference_speed = 2.0;      // m/s, tapers to zero inside the
                                     // success radius
  double speed_deadband_m = 2.0;     // distance below which the vehicle
                                     // coasts instead of chasing millimeters

  void validate() const; // finite gains, positive clamps and limits
};

// Positions are commanded absolutely (clamped to actuator ranges, not
// rate-limited): smoothness is a property of the discrete action table, not
// of this baseline. The controller carries integrator state between calls;
// one instance per simulation.
class PidController {
 public:
  explicit PidController(const PidGains& gains, double throttle_cap = kDefaultThrottleCap);

  // One command per policy step. `act` is the currently applied actuator set
  // (unused: commands are absolute, there is no bumpless-transfer state).
  ActuatorState command(const BlimpState& state, const ActuatorState& act, const Vec3& target,
                        const EnvConfig& cfg, double dt);

  // Clears integrators and derivative memory (start of episode or retarget).
  void reset();

  const PidGains& gains() const { return gains_; }

 private:
  PidGains gains_;
  double throttle_cap_;
  double yaw_integral_ = 0.0;
  double altitude_integral_ = 0.0;
  double speed_integral_ = 0.0;
  double previous_speed_ = 0.0;
  bool has_previous_speed_ = false;
};

}  // namespace blimp
