#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace blimp {

using Vec3 = Eigen::Vector3d;

// World frame is NED: x north, y east, z down. Attitude is pitch/yaw only;
// roll and lateral body velocity are assumed zero throughout.

struct BlimpParams {
  double total_mass = 12.0;     // kg
  double hull_volume = 0.0;     // m^3; default ctor calibrates for neutral lift
  double buoyancy_factor = 1.0; // 1.0 = neutrally buoyant
  double air_density = 1.225;   // kg/m^3
  double gravity = 9.81;        // m/s^2

  // Effective Cd*A products per body axis.
  double drag_area_axial = 2.2;    // m^2, along body x
  double drag_area_vertical = 12.0;// m^2, along body z
  double drag_area_lateral = 12.0; // m^2, along body y

  double pitch_inertia = 40.0; // kg m^2
  double yaw_inertia = 40.0;   // kg m^2

  double gondola_pendulum_arm = 0.35; // m, CG below center of buoyancy

  double fin_moment_gain_pitch = 6.0;    // N m per unit deflection per Pa
  double fin_moment_gain_yaw = 6.0;      // N m per unit deflection per Pa
  double tail_motor_moment_gain = 8.0;   // N m per unit command
  double main_thrust_gain = 20.0;        // N per unit command

  double pitch_damping = 25.0; // N m s
  double yaw_damping = 30.0;   // N m s

  double ballast_mass = 0.0; // kg, signed, fixed at the nose
  double ballast_arm = 3.0;  // m, nose lever arm

  BlimpParams();

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Hull volume giving zero net lift at buoyancy factor 1 for the given mass.
// Searched to the nearest representable volume so rho*V - m vanishes (or is
// within one ulp when no exact representation exists).
double neutral_hull_volume(double mass, double air_density);

struct BlimpState {
  Vec3 position = Vec3::Zero();        // m, NED
  Vec3 ground_velocity = Vec3::Zero(); // m/s, NED
  double pitch = 0.0;                  // rad, theta in (-pi/2, pi/2)
  double yaw = 0.0;                    // rad, psi in (-pi, pi]
  double pitch_rate = 0.0;             // rad/s
  double yaw_rate = 0.0;               // rad/s
  double time = 0.0;                   // s

  bool all_finite() const;
};

// Main motors m0,m1 in [0, throttle_cap]; tail motor m2 in [-1,1]; servo
// frozen at zero (thrust vectoring disabled); fins f0..f3 in [-1,1] ordered
// left, right, top, bottom. Symmetric pairs (m0,m1), (f0,f1), (f2,f3) are
// kept equal.
struct ActuatorState {
  double m0 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double servo = 0.0;
  double f0 = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
};

inline constexpr double kDefaultThrottleCap = 0.5;

// Delta layout follows the discrete-action table column order:
// (m2, f0, f1, f2, f3, s, m0, m1).
using ActuatorDelta = std::array<double, 8>;

// Component-wise sum then clip to each actuator's range; symmetric pairs and
// the frozen servo are re-enforced afterwards.
ActuatorState apply_actuator_delta(const ActuatorState& act, const ActuatorDelta& delta,
                                   double throttle_cap = kDefaultThrottleCap);

// Clamp a directly-commanded actuator set to the same ranges (PID path).
ActuatorState clamp_actuators(const ActuatorState& act, double throttle_cap = kDefaultThrottleCap);

struct WindField {
  Vec3 velocity = Vec3::Zero(); // m/s, constant, world frame

  void validate() const; // finite, magnitude <= 20 m/s
};

class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(const std::string& what, const BlimpState& state)
      : std::runtime_error(what), state(state) {}
  BlimpState state;
};

// Net aerostatic force, positive up:
//   buoyancy_factor * rho * g * hull_volume - total_mass * g - ballast_mass * g
double net_vertical_force(const BlimpParams& params);

// Static pitch equilibrium from the ballast/pendulum moment balance; zero
// when ballast_mass is zero.
double trim_pitch(const BlimpParams& params);

// State at rest at the given pose, pitched to the static equilibrium.
BlimpState trim_state(const BlimpParams& params, const Vec3& position, double yaw);

// Advances the reduced model by dt (semi-implicit Euler, internally
// subdivided into substeps of at most 0.01 s). dt must be in (0, 0.1].
// Throws SimulationDiverged if the result is non-finite.
BlimpState dynamics_step(const BlimpState& state, const ActuatorState& act,
                         const WindField& wind, const BlimpParams& params, double dt);

inline double wrap_angle(double a) {
  // wrap to (-pi, pi]
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

}  // namespace blimp
