#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "blimp/harness.hpp"

using namespace blimp;
using doctest::Approx;

TEST_CASE("the default square is closed, level, and counter-clockwise east-north") {
  TrackSpec track = make_square_track();
  REQUIRE(track.waypoints.size() == 4);
  for (const Vec3& w : track.waypoints) CHECK(w.z() == -50.0);
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3& a = track.waypoints[i];
    const Vec3& b = track.waypoints[(i + 1) % 4];
    CHECK((b - a).norm() == Approx(100.0));
  }
  // left turns throughout when plotted east-north: cross products all one sign
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3& a = track.waypoints[i];
    const Vec3& b = track.waypoints[(i + 1) % 4];
    const Vec3& c = track.waypoints[(i + 2) % 4];
    // east-north plot means x = east = NED y, y = north = NED x
    const double cross = (b.y() - a.y()) * (c.x() - b.x()) - (b.x() - a.x()) * (c.y() - b.y());
    CHECK(cross > 0.0);
  }

  TrackSpec cw = make_square_track(100.0, 50.0, false);
  CHECK(cw.waypoints[0] == track.waypoints[0]);
  CHECK(cw.waypoints[1] == track.waypoints[3]);

  CHECK_THROWS_AS(make_square_track(0.0), std::invalid_argument);
  TrackSpec bad;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.waypoints = {Vec3::Zero()};
  bad.trigger_radius = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("an idle vehicle never reaches the first corner") {
  EnvConfig cfg;
  BlimpEnv env(BlimpParams{}, cfg, WindField{}, 5);
  IdlePolicy idle;
  TaskReport report = run_navigation(env, idle, make_square_track(), 30.0);
  CHECK_FALSE(report.completed);
  CHECK(report.triggers.empty());
  CHECK(report.steps == 60);
  CHECK(report.total_time == 30.0);
  CHECK(report.task == "navigation");
  CHECK(report.policy == "idle");
  CHECK(report.energy_proxy == 0.0);
  CHECK(report.rewards.size() == 60);
}

TEST_CASE("the stock controller completes three laps with clean triggers") {
  EnvConfig cfg;
  BlimpEnv env(BlimpParams{}, cfg, WindField{}, 11);
  PidPolicy pid(PidGains{});
  TrajectoryLog log;
  TaskReport report = run_navigation(env, pid, make_square_track(), 3000.0, &log);
  CHECK(report.completed);
  REQUIRE(report.triggers.size() == 12);
  for (const TriggerEvent& t : report.triggers) CHECK(t.distance <= 15.0);
  for (std::size_t i = 1; i < report.triggers.size(); ++i)
    CHECK(report.triggers[i].time > report.triggers[i - 1].time);
  // waypoints cycle 0,1,2,3 across three laps
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(report.triggers[i].waypoint == static_cast<int>(i % 4));
    CHECK(report.triggers[i].lap == static_cast<int>(i / 4) + 1);
  }
  CHECK(report.total_time == report.triggers.back().time);
  CHECK(report.total_time < 3000.0);
  CHECK(report.energy_proxy > 0.0);
  CHECK(report.max_altitude_error < 25.0);
  CHECK(log.rows.size() == static_cast<std::size_t>(report.steps) + 1);
}

TEST_CASE("the energy proxy is recomputable from the trajectory rows") {
  EnvConfig cfg;
  BlimpEnv env(BlimpParams{}, cfg, WindField{}, 13);
  PidPolicy pid(PidGains{});
  TrajectoryLog log;
  TaskReport report = run_navigation(env, pid, make_square_track(), 120.0, &log);
  double recomputed = 0.0;
  for (const TrajectoryRow& row : log.rows) {
    if (row.time == 0.0) continue; // reset row precedes the first step
    const ActuatorState& a = row.actuators;
    recomputed += (a.m0 * a.m0 + a.m1 * a.m1 + a.m2 * a.m2) * cfg.policy_dt;
  }
  CHECK(report.energy_proxy == Approx(recomputed).epsilon(1e-9));
}

TEST_CASE("hovering at the target keeps a bounded planar radius") {
  EnvConfig cfg;
  BlimpEnv env(BlimpParams{}, cfg, WindField{}, 17);
  PidPolicy pid(PidGains{});
  Vec3 target(0.0, 0.0, -50.0); // the spawn point
  TaskReport report = run_hover(env, pid, target, 600.0);
  CHECK(report.completed);
  CHECK(report.task == "hover");
  CHECK(report.steps == 1200);
  CHECK(report.mean_planar_radius < 50.0);
  CHECK(report.max_altitude_error < 20.0);
  CHECK(std::abs(report.altitude_bias) < 20.0);
  // at the exact equilibrium nothing needs to actuate
  CHECK(report.energy_proxy < 1.0);
}

TEST_CASE("a zero-duration hover yields an empty report without error") {
  EnvConfig cfg;
  BlimpEnv env(BlimpParams{}, cfg, WindField{}, 19);
  IdlePolicy idle;
  TaskReport report = run_hover(env, idle, Vec3(0, 0, -50), 0.0);
  CHECK(report.completed);
  CHECK(report.steps == 0);
  CHECK(report.rewards.empty());
  CHECK(report.mean_planar_radius == 0.0);
  CHECK(report.energy_proxy == 0.0);
}

TEST_CASE("policy evaluation reports one return per episode, reproducibly") {
  EnvConfig cfg;
  cfg.episode_length = 10.0; // 20 policy steps
  BlimpEnv env(BlimpParams{}, cfg, WindField{}, 23);
  RandomPolicy policy(24);
  EvalSummary s1 = evaluate_policy(env, policy, 3);
  REQUIRE(s1.returns.size() == 3);
  for (double r : s1.returns) {
    CHECK(r <= 20.0);
    CHECK(r >= -1.04 * 20.0);
  }

  BlimpEnv env2(BlimpParams{}, cfg, WindField{}, 23);
  RandomPolicy policy2(24);
  EvalSummary s2 = evaluate_policy(env2, policy2, 3);
  for (int i = 0; i < 3; ++i) CHECK(s1.returns[i] == s2.returns[i]);
  CHECK(s1.mean_return == s2.mean_return);
}

TEST_CASE("a one-value sweep is bit-identical to the plain run it stands for") {
  const std::uint64_t sweep_seed = 31;
  TaskSpec task;
  task.timeout_s = 90.0;
  auto factory = [](std::uint64_t seed) -> std::unique_ptr<Policy> {
    (void)seed;
    return std::make_unique<PidPolicy>(PidGains{});
  };
  std::vector<TrajectoryLog> logs;
  SweepReport sr = sweep(BlimpParams{}, EnvConfig{}, WindField{}, SweepParameter::buoyancy_factor,
                         {0.97}, task, factory, sweep_seed, 1, &logs);
  REQUIRE(sr.cells.size() == 1);
  REQUIRE_FALSE(sr.cells[0].failed);

  BlimpParams params;
  params.buoyancy_factor = 0.97;
  BlimpEnv env(params, EnvConfig{}, WindField{}, mix_seed(sweep_seed, 0));
  PidPolicy pid(PidGains{});
  TrajectoryLog plain_log;
  TaskReport plain = run_navigation(env, pid, task.track, task.timeout_s, &plain_log);

  CHECK(report_to_text(sr.cells[0].report) == report_to_text(plain));
  REQUIRE(logs[0].rows.size() == plain_log.rows.size());
  for (std::size_t i = 0; i < plain_log.rows.size(); ++i) {
    CHECK(logs[0].rows[i].time == plain_log.rows[i].time);
    CHECK(logs[0].rows[i].position == plain_log.rows[i].position);
    CHECK(logs[0].rows[i].reward.total == plain_log.rows[i].reward.total);
  }
}

TEST_CASE("sweep cells fail independently and the sweep continues") {
  TaskSpec task;
  task.timeout_s = 20.0;
  auto factory = [](std::uint64_t) -> std::unique_ptr<Policy> {
    return std::make_unique<PidPolicy>(PidGains{});
  };
  SweepReport sr = sweep(BlimpParams{}, EnvConfig{}, WindField{}, SweepParameter::buoyancy_factor,
                         {1.0, -5.0}, task, factory, 33, 1, nullptr);
  REQUIRE(sr.cells.size() == 2);
  CHECK_FALSE(sr.cells[0].failed);
  CHECK(sr.cells[1].failed);
  CHECK_FALSE(sr.cells[1].error.empty());

  CHECK_THROWS_AS(sweep(BlimpParams{}, EnvConfig{}, WindField{}, SweepParameter::wind_speed,
                        {std::numeric_limits<double>::quiet_NaN()}, task, factory, 33, 1, nullptr),
                  std::invalid_argument);

  SweepReport empty = sweep(BlimpParams{}, EnvConfig{}, WindField{}, SweepParameter::wind_speed,
                            {}, task, factory, 33, 1, nullptr);
  CHECK(empty.cells.empty());
}

TEST_CASE("concurrent sweep workers reproduce the serial result") {
  TaskSpec task;
  task.timeout_s = 60.0;
  auto factory = [](std::uint64_t) -> std::unique_ptr<Policy> {
    return std::make_unique<PidPolicy>(PidGains{});
  };
  const std::vector<double> winds = {0.0, 1.0, 2.0, 3.0};
  SweepReport serial = sweep(BlimpParams{}, EnvConfig{}, WindField{}, SweepParameter::wind_speed,
                             winds, task, factory, 35, 1, nullptr);
  SweepReport parallel = sweep(BlimpParams{}, EnvConfig{}, WindField{}, SweepParameter::wind_speed,
                               winds, task, factory, 35, 4, nullptr);
  CHECK(report_to_text(serial) == report_to_text(parallel));
}

TEST_CASE("the smoothness audit tracks per-channel deltas within episode segments") {
  TrajectoryLog log;
  auto row = [](double time, double m0, double f2) {
    TrajectoryRow r;
    r.time = time;
    r.actuators.m0 = m0;
    r.actuators.f2 = f2;
    return r;
  };
  // first episode: m0 steps by 0.01 then 0.02; f2 steps by 0.05
  log.add(row(0.0, 0.00, 0.00));
  log.add(row(0.5, 0.01, 0.05));
  log.add(row(1.0, 0.03, 0.02));
  // reset: the jump back to zero must not count
  log.add(row(0.0, 0.00, 0.00));
  log.add(row(0.5, 0.005, 0.01));
  SmoothnessStats stats = smoothness_audit(log);
  CHECK(stats.max_delta[0] == Approx(0.02));
  CHECK(stats.max_delta[6] == Approx(0.05));
  CHECK(stats.max_main_motor() == Approx(0.02));
  CHECK(stats.max_tail_or_fin() == Approx(0.05));

  SmoothnessStats empty = smoothness_audit(TrajectoryLog{});
  for (double d : empty.max_delta) CHECK(d == 0.0);
}

TEST_CASE("discrete rollouts stay within the table step bounds, noise included") {
  EnvConfig cfg;
  cfg.episode_length = 60.0;
  BlimpEnv env(BlimpParams{}, cfg, WindField{}, 41);
  RandomPolicy policy(42);
  TrajectoryLog log;
  for (int episode = 0; episode < 3; ++episode) {
    Observation obs = env.reset();
    log.add(env.reset_row());
    while (true) {
      StepResult sr = policy.step(env, obs);
      obs = sr.obs;
      log.add(env.snapshot_row(sr));
      if (sr.done) break;
    }
  }
  SmoothnessStats stats = smoothness_audit(log);
  CHECK(stats.max_main_motor() <= 0.0105);
  CHECK(stats.max_tail_or_fin() <= 0.02625);
  CHECK(stats.max_delta[3] == 0.0); // servo frozen
}

TEST_CASE("report text carries the headline fields") {
  TaskReport r;
  r.task = "navigation";
  r.policy = "pid";
  r.completed = true;
  r.total_time = 812.5;
  r.triggers.push_back({1, 0, 55.5, 12.25});
  std::string text = report_to_text(r);
  CHECK(text.find("task: navigation") != std::string::npos);
  CHECK(text.find("completed: yes") != std::string::npos);
  CHECK(text.find("total_time_s: 812.5") != std::string::npos);
  CHECK(text.find("lap 1 waypoint 0") != std::string::npos);
}
