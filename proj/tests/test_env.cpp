#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "blimp/env.hpp"

using namespace blimp;

namespace {

// Straight-line reward re-evaluation, independent of compute_reward's
// internals: raw geometry in, weighted total out.
double reward_oracle(double l_r, double psi_r, double z_r, double m0, double m1, double m2,
                     double distance, const EnvConfig& cfg) {
  auto clip1 = [](double v) { return std::min(std::max(v, -1.0), 1.0); };
  double l = std::abs(clip1(l_r / cfg.l_max));
  double psi = std::abs(clip1(psi_r / M_PI));
  double z = std::abs(clip1(z_r / cfg.z_max));
  double success, track;
  if (distance <= cfg.success_radius) {
    success = 1.0;
    track = -(cfg.j0 * z + cfg.j1 * l);
  } else {
    success = 0.0;
    track = -(cfg.i0 * z + cfg.i1 * l + cfg.i2 * psi);
  }
  double act = -cfg.k0 * std::sqrt(m0 / cfg.throttle_cap * (m0 / cfg.throttle_cap) +
                                   m1 / cfg.throttle_cap * (m1 / cfg.throttle_cap) + m2 * m2);
  return 1.0 * success + 0.95 * track + 0.05 * act;
}

BlimpEnv make_env(std::uint64_t seed = 0, EnvConfig cfg = EnvConfig{}) {
  return BlimpEnv(BlimpParams{}, cfg, WindField{}, seed);
}

}  // namespace

TEST_CASE("action table rows are exact") {
  const double e = 0.025;
  ActuatorDelta rows[7] = {
      {0, 0, 0, 0, 0, 0, 0, 0},      {0, 0, 0, 0, 0, 0, 0.01, 0.01},
      {0, 0, 0, 0, 0, 0, -0.01, -0.01}, {0, e, e, 0, 0, 0, 0, 0},
      {0, -e, -e, 0, 0, 0, 0, 0},    {e, 0, 0, e, e, 0, 0, 0},
      {-e, 0, 0, -e, -e, 0, 0, 0},
  };
  for (int a = 0; a < kNumActions; ++a) {
    ActuatorDelta d = decode_action(a);
    for (int i = 0; i < 8; ++i) CHECK(d[i] == rows[a][i]);
  }
  CHECK_THROWS_AS(decode_action(-1), std::out_of_range);
  CHECK_THROWS_AS(decode_action(7), std::out_of_range);
}

TEST_CASE("every non-idle action has exactly one negation in the table") {
  for (int a = 1; a < kNumActions; ++a) {
    ActuatorDelta da = decode_action(a);
    int partners = 0;
    for (int b = 1; b < kNumActions; ++b) {
      if (b == a) continue;
      ActuatorDelta db = decode_action(b);
      bool negated = true;
      for (int i = 0; i < 8; ++i) negated = negated && (db[i] == -da[i]);
      if (negated) ++partners;
    }
    CHECK(partners == 1);
  }
}

TEST_CASE("relative target geometry and sign conventions") {
  BlimpState s = trim_state(BlimpParams{}, Vec3(0.0, 0.0, -50.0), 0.0);

  SUBCASE("due north, level") {
    TargetCylindrical g = relative_target(s, Vec3(100.0, 0.0, -50.0));
    CHECK(g.planar_distance == doctest::Approx(100.0));
    CHECK(g.bearing == doctest::Approx(0.0));
    CHECK(g.altitude_offset == doctest::Approx(0.0));
  }
  SUBCASE("due east reads as positive bearing") {
    TargetCylindrical g = relative_target(s, Vec3(0.0, 50.0, -50.0));
    CHECK(g.bearing == doctest::Approx(M_PI / 2));
  }
  SUBCASE("target above reads as positive altitude offset") {
    TargetCylindrical g = relative_target(s, Vec3(0.0, 0.0, -80.0));
    CHECK(g.altitude_offset == doctest::Approx(30.0));
  }
  SUBCASE("bearing subtracts heading and wraps") {
    s.yaw = 3.0;
    TargetCylindrical g = relative_target(s, Vec3(-100.0, 0.1, -50.0));
    CHECK(g.bearing == doctest::Approx(wrap_angle(std::atan2(0.1, -100.0) - 3.0)));
  }
}

TEST_CASE("clean observation scales and clips") {
  EnvConfig cfg;
  BlimpState s = trim_state(BlimpParams{}, Vec3(0.0, 0.0, -50.0), 0.0);
  ActuatorState act;

  SUBCASE("coincident and at rest reads zero") {
    Observation o = observe_clean(s, act, Vec3(0.0, 0.0, -50.0), cfg);
    for (double v : o.blimp) CHECK(v == 0.0);
    for (double v : o.act) CHECK(v == 0.0);
  }
  SUBCASE("100 m north scales to half range") {
    Observation o = observe_clean(s, act, Vec3(100.0, 0.0, -50.0), cfg);
    CHECK(o.blimp[0] == doctest::Approx(0.5));
    CHECK(o.blimp[1] == doctest::Approx(0.0));
    CHECK(o.blimp[2] == doctest::Approx(0.0));
  }
  SUBCASE("distances beyond the scale constant clip") {
    Observation o = observe_clean(s, act, Vec3(500.0, 0.0, -50.0), cfg);
    CHECK(o.blimp[0] == 1.0);
  }
  SUBCASE("actuator channels scale by their ranges") {
    act.m0 = act.m1 = 0.25;
    act.m2 = -0.5;
    act.f0 = act.f1 = 0.3;
    act.f2 = act.f3 = -0.4;
    Observation o = observe_clean(s, act, Vec3::Zero(), cfg);
    CHECK(o.act[0] == doctest::Approx(0.5));  // m0 against the 0.5 cap
    CHECK(o.act[1] == 0.0);                   // frozen servo
    CHECK(o.act[2] == doctest::Approx(-0.5));
    CHECK(o.act[3] == doctest::Approx(-0.4)); // top/bottom fins
    CHECK(o.act[4] == doctest::Approx(0.3));  // left/right fins
  }
  SUBCASE("velocity channels: speed magnitude and climb rate") {
    s.ground_velocity = Vec3(3.0, 4.0, -1.5);  // |V| = 5.22, climbing 1.5 m/s
    Observation o = observe_clean(s, act, Vec3::Zero(), cfg);
    CHECK(o.blimp[3] == doctest::Approx(s.ground_velocity.norm() / 10.0));
    CHECK(o.blimp[4] == doctest::Approx(0.5));
  }
}

TEST_CASE("noisy observations stay in range") {
  EnvConfig cfg;
  Rng rng(3);
  BlimpState s = trim_state(BlimpParams{}, Vec3::Zero(), 0.0);
  s.ground_velocity = Vec3(9.9, 0.0, 0.0);
  ActuatorState act;
  act.m0 = act.m1 = 0.5;
  for (int i = 0; i < 20000; ++i) {
    Observation o = observe(s, act, Vec3(400.0, 0.0, -120.0), cfg, 0.05, rng);
    for (double v : o.act) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    for (double v : o.blimp) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("reward worked examples") {
  EnvConfig cfg;
  ActuatorState act;
  Observation o;

  SUBCASE("navigation tracking") {
    o.blimp = {0.5, 0.2, 0.1, 0.0, 0.0};  // (l, psi, z) scaled
    RewardBreakdown r = compute_reward(o, act, 50.0, cfg);
    CHECK(r.track == doctest::Approx(-0.40).epsilon(1e-12));
    CHECK(r.total == doctest::Approx(-0.38).epsilon(1e-12));
    CHECK(!r.in_success_region);
  }
  SUBCASE("at the target with idle motors") {
    RewardBreakdown r = compute_reward(o, act, 0.0, cfg);
    CHECK(r.success == 1.0);
    CHECK(r.track == 0.0);
    CHECK(r.act == 0.0);
    CHECK(r.total == 1.0);
  }
  SUBCASE("action magnitude penalty") {
    act.m0 = act.m1 = 0.25;  // scaled 0.5 against the cap
    act.m2 = 0.5;
    RewardBreakdown r = compute_reward(o, act, 50.0, cfg);
    CHECK(r.act == doctest::Approx(-0.8660254).epsilon(1e-6));
    CHECK(r.total == doctest::Approx(-0.0433013).epsilon(1e-5));
  }
  SUBCASE("boundary distance takes the hover branch") {
    o.blimp = {0.1, 0.8, 0.2, 0.0, 0.0};
    RewardBreakdown r = compute_reward(o, act, cfg.success_radius, cfg);
    CHECK(r.in_success_region);
    // hover branch ignores bearing
    CHECK(r.track == doctest::Approx(-(0.3 * 0.2 + 0.7 * 0.1)).epsilon(1e-12));
  }
}

TEST_CASE("randomized rewards match the straight-line oracle") {
  EnvConfig cfg;
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    BlimpState s = trim_state(BlimpParams{}, Vec3::Zero(), rng.uniform(-3.0, 3.0));
    s.position = Vec3(rng.uniform(-300.0, 300.0), rng.uniform(-300.0, 300.0),
                      rng.uniform(-150.0, -5.0));
    s.ground_velocity =
        Vec3(rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0), rng.uniform(-2.0, 2.0));
    Vec3 target(rng.uniform(-300.0, 300.0), rng.uniform(-300.0, 300.0),
                rng.uniform(-150.0, -5.0));
    ActuatorState act;
    act.m0 = act.m1 = rng.uniform(0.0, 0.5);
    act.m2 = rng.uniform(-1.0, 1.0);
    act.f0 = act.f1 = rng.uniform(-1.0, 1.0);
    act.f2 = act.f3 = rng.uniform(-1.0, 1.0);

    Observation clean = observe_clean(s, act, target, cfg);
    double distance = (target - s.position).norm();
    RewardBreakdown r = compute_reward(clean, act, distance, cfg);

    TargetCylindrical g = relative_target(s, target);
    double expected = reward_oracle(g.planar_distance, g.bearing, g.altitude_offset, act.m0,
                                    act.m1, act.m2, distance, cfg);
    CHECK(r.total == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.total >= -1.04);
    CHECK(r.total <= 1.0);
    CHECK(r.total == 1.0 * r.success + 0.95 * r.track + 0.05 * r.act);
  }
}

TEST_CASE("track reward vanishes only at zero error") {
  EnvConfig cfg;
  ActuatorState act;
  Observation o;
  o.blimp = {0.0, 0.3, 0.0, 0.0, 0.0};
  CHECK(compute_reward(o, act, 50.0, cfg).track < 0.0);  // bearing counts when navigating
  CHECK(compute_reward(o, act, 5.0, cfg).track == 0.0);  // but not when hovering
  o.blimp = {0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(compute_reward(o, act, 50.0, cfg).track == 0.0);
}

TEST_CASE("thrust action moves the throttle by exactly one table increment") {
  EnvConfig cfg;
  cfg.noise_std = 0.0;
  cfg.action_noise = 0.0;
  BlimpEnv env = make_env(1, cfg);
  env.reset();
  env.step(kThrustUp);
  CHECK(env.actuators().m0 == 0.01);
  CHECK(env.actuators().m1 == 0.01);
  env.step(kThrustUp);
  CHECK(env.actuators().m0 == 0.02);
  env.step(kThrustDown);
  CHECK(env.actuators().m0 == 0.01);
}

TEST_CASE("episodes end at 200 s, which is 400 policy steps") {
  BlimpEnv env = make_env(2);
  env.reset();
  for (int i = 1; i <= 400; ++i) {
    StepResult r = env.step(kIdle);
    CHECK(r.done == (i == 400));
  }
  CHECK(env.time() == 200.0);
}

TEST_CASE("episode clock is an exact multiple of the policy step") {
  BlimpEnv env = make_env(3);
  env.reset();
  for (int i = 1; i <= 37; ++i) env.step(kIdle);
  CHECK(env.time() == 37 * 0.5);
}

TEST_CASE("idling on top of the target pays the success reward forever") {
  EnvConfig cfg;
  cfg.target_half_extent = 0.0;  // target collapses onto the spawn
  BlimpEnv env = make_env(4, cfg);
  env.reset();
  CHECK(env.target() == cfg.spawn_position);
  for (int i = 0; i < 400; ++i) {
    StepResult r = env.step(kIdle);
    CHECK(r.reward.success == 1.0);
  }
}

TEST_CASE("seeded resets reproduce targets and observations") {
  BlimpEnv a = make_env(7), b = make_env(7);
  Observation oa = a.reset(), ob = b.reset();
  CHECK(a.target() == b.target());
  CHECK(oa.as_vector() == ob.as_vector());

  // and a full episode of identical actions stays identical
  for (int i = 0; i < 400; ++i) {
    StepResult ra = a.step(i % kNumActions), rb = b.step(i % kNumActions);
    CHECK(ra.obs.as_vector() == rb.obs.as_vector());
    CHECK(ra.reward.total == rb.reward.total);
    CHECK(ra.distance == rb.distance);
  }
}

TEST_CASE("target sampling respects the box and the altitude clamp") {
  EnvConfig cfg;
  BlimpEnv env = make_env(8, cfg);
  for (int i = 0; i < 10000; ++i) {
    env.reset();
    Vec3 t = env.target();
    CHECK(std::abs(t.x() - cfg.spawn_position.x()) <= cfg.target_half_extent);
    CHECK(std::abs(t.y() - cfg.spawn_position.y()) <= cfg.target_half_extent);
    CHECK(t.z() <= -cfg.min_target_altitude);
    CHECK(t.z() >= cfg.spawn_position.z() - cfg.target_half_extent);
  }
}

TEST_CASE("reset zeroes actuators and re-trims the vehicle") {
  BlimpEnv env = make_env(9);
  env.reset();
  for (int i = 0; i < 40; ++i) env.step(kThrustUp);
  CHECK(env.actuators().m0 > 0.0);
  env.reset();
  CHECK(env.actuators().m0 == 0.0);
  CHECK(env.state().ground_velocity.norm() == 0.0);
  CHECK(env.state().position == env.config().spawn_position);
  CHECK(env.steps_taken() == 0);
}

TEST_CASE("per-step actuator changes respect the table bounds under noise") {
  BlimpEnv env = make_env(10);
  env.reset();
  Rng action_rng(11);
  ActuatorState prev = env.actuators();
  for (int i = 0; i < 4000; ++i) {
    StepResult r = env.step(action_rng.uniform_int(kNumActions));
    const ActuatorState& cur = env.actuators();
    CHECK(std::abs(cur.m0 - prev.m0) <= 0.0105);
    CHECK(std::abs(cur.m1 - prev.m1) <= 0.0105);
    CHECK(std::abs(cur.m2 - prev.m2) <= 0.02625);
    CHECK(std::abs(cur.f0 - prev.f0) <= 0.02625);
    CHECK(std::abs(cur.f2 - prev.f2) <= 0.02625);
    prev = cur;
    if (r.done) {
      env.reset();
      prev = env.actuators();
    }
  }
}

TEST_CASE("direct actuator commands clamp to ranges") {
  BlimpEnv env = make_env(12);
  env.reset();
  ActuatorState cmd;
  cmd.m0 = cmd.m1 = 0.7;  // beyond the 0.5 cap
  cmd.m2 = -1.4;
  cmd.servo = 0.3;
  cmd.f0 = cmd.f1 = 0.2;
  StepResult r = env.step_direct(cmd);
  CHECK(env.actuators().m0 == 0.5);
  CHECK(env.actuators().m2 == -1.0);
  CHECK(env.actuators().servo == 0.0);
  CHECK(env.actuators().f0 == 0.2);
  CHECK(r.action == -1);
}

TEST_CASE("trajectory csv round-trips exactly") {
  BlimpEnv env = make_env(13);
  env.reset();
  TrajectoryLog log;
  log.add(env.reset_row());
  Rng action_rng(14);
  for (int i = 0; i < 50; ++i) {
    StepResult r = env.step(action_rng.uniform_int(kNumActions));
    log.add(env.snapshot_row(r));
  }
  const std::string path = "test_env_traj.csv";
  log.write_csv(path);
  TrajectoryLog back = read_trajectory_csv(path);
  REQUIRE(back.rows.size() == log.rows.size());
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    CHECK(back.rows[i].time == log.rows[i].time);
    CHECK(back.rows[i].position == log.rows[i].position);
    CHECK(back.rows[i].pitch == log.rows[i].pitch);
    CHECK(back.rows[i].yaw == log.rows[i].yaw);
    CHECK(back.rows[i].actuators.m0 == log.rows[i].actuators.m0);
    CHECK(back.rows[i].actuators.f2 == log.rows[i].actuators.f2);
    CHECK(back.rows[i].action == log.rows[i].action);
    CHECK(back.rows[i].reward.total == log.rows[i].reward.total);
    CHECK(back.rows[i].distance == log.rows[i].distance);
  }
  std::remove(path.c_str());
}

TEST_CASE("malformed trajectory files report the offending line") {
  const std::string path = "test_env_bad.csv";
  {
    std::ofstream f(path);
    f << kTrajectoryHeader << "\n1,2,3\n";
  }
  CHECK_THROWS_AS(read_trajectory_csv(path), ParseError);
  try {
    read_trajectory_csv(path);
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  {
    std::ofstream f(path);
    f << "not,a,header\n";
  }
  CHECK_THROWS_AS(read_trajectory_csv(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("config validation rejects inconsistent step hierarchies") {
  EnvConfig cfg;
  cfg.policy_dt = 0.45;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EnvConfig{};
  cfg.sim_dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EnvConfig{};
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.steps_per_policy() == 5);
  CHECK(cfg.episode_policy_steps() == 400);
}
