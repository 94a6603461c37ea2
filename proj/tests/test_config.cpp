#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "blimp/config.hpp"

using namespace blimp;

namespace {

std::filesystem::path scratch_dir() {
  auto p = std::filesystem::path("config_test_artifacts");
  std::filesystem::create_directories(p);
  return p;
}

// injectable environment for the override layer
EnvLookup fake_env(const std::map<std::string, std::string>& vars) {
  static std::map<std::string, std::string> storage;
  storage = vars;
  return [](const char* name) -> const char* {
    auto it = storage.find(name);
    return it == storage.end() ? nullptr : it->second.c_str();
  };
}

EnvLookup empty_env() { return fake_env({}); }

}  // namespace

TEST_CASE("defaults finalize to a neutrally buoyant plant with the mirrored seed") {
  RunConfig cfg;
  CHECK(cfg.dynamics.hull_volume == 0.0);  // auto, resolved below
  cfg.seed = 99;
  cfg.finalize();
  CHECK(cfg.dynamics.hull_volume ==
        neutral_hull_volume(cfg.dynamics.total_mass, cfg.dynamics.air_density));
  CHECK(cfg.agent.seed == 99);
  CHECK(cfg.network_shape().hidden_dim == 64);
  CHECK(cfg.network_shape().num_quantiles == 12);
  CHECK(cfg.wind_field().velocity == Vec3::Zero());
}

TEST_CASE("an explicit hull volume survives finalize") {
  RunConfig cfg;
  apply_override(cfg, "dynamics.hull_volume=11.5");
  cfg.finalize();
  CHECK(cfg.dynamics.hull_volume == 11.5);
}

TEST_CASE("config text reaches every section") {
  RunConfig cfg;
  apply_config_text(cfg,
                    "seed = 21\n"
                    "out_dir = somewhere\n"
                    "\n"
                    "[dynamics]\n"
                    "total_mass = 14.5\n"
                    "# a comment\n"
                    "[env]\n"
                    "success_radius = 7  \n"
                    "wind_north = 1.25\n"
                    "[agent]\n"
                    "batch_size = 32\n"
                    "buffer_capacity = 5000\n"
                    "hidden_dim = 48\n"
                    "[pid]\n"
                    "yaw_kp = 2.5\n"
                    "[task]\n"
                    "laps = 2\n"
                    "counter_clockwise = false\n");
  CHECK(cfg.seed == 21);
  CHECK(cfg.out_dir == "somewhere");
  CHECK(cfg.dynamics.total_mass == 14.5);
  CHECK(cfg.env.success_radius == 7.0);
  CHECK(cfg.wind.x() == 1.25);
  CHECK(cfg.agent.batch_size == 32);
  CHECK(cfg.agent.buffer_capacity == 5000);
  CHECK(cfg.hidden_dim == 48);
  CHECK(cfg.pid.yaw_kp == 2.5);
  CHECK(cfg.task.laps == 2);
  CHECK(cfg.task.counter_clockwise == false);
}

TEST_CASE("unknown keys are rejected with their full path and line") {
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(
      apply_config_text(cfg, "[env]\nsucces_radius = 7\n"),
      "unknown key 'env.succes_radius' (config line 2)", ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "[engine]\n"),
                       "unknown section '[engine]' (config line 1)", ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "[env]\nnonsense line\n"),
                       "expected 'key = value', got 'nonsense line' (config line 2)",
                       ConfigError);
  // a key valid in one section is still unknown at the top level
  CHECK_THROWS_AS(apply_config_text(cfg, "success_radius = 7\n"), ConfigError);
}

TEST_CASE("unparsable values name the key and the offending text") {
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(apply_override(cfg, "env.success_radius=abc"),
                       "env.success_radius: cannot parse 'abc' as a number", ConfigError);
  CHECK_THROWS_WITH_AS(apply_override(cfg, "task.laps=2.5"),
                       "task.laps: cannot parse '2.5' as an integer", ConfigError);
  CHECK_THROWS_WITH_AS(apply_override(cfg, "seed=-4"),
                       "seed: cannot parse '-4' as an unsigned integer", ConfigError);
  CHECK_THROWS_WITH_AS(apply_override(cfg, "task.counter_clockwise=maybe"),
                       "task.counter_clockwise: cannot parse 'maybe' as a boolean (true/false)",
                       ConfigError);
  CHECK_THROWS_WITH_AS(apply_override(cfg, "env.success_radius"),
                       "override must be key=value, got 'env.success_radius'", ConfigError);
  CHECK_THROWS_WITH_AS(apply_override(cfg, "env.radius=7"), "unknown key 'env.radius'",
                       ConfigError);
}

TEST_CASE("later layers override earlier ones") {
  auto file = scratch_dir() / "layered.ini";
  {
    std::ofstream out(file);
    out << "[env]\nsuccess_radius = 7\nnoise_std = 0.01\n";
  }

  SUBCASE("file beats defaults") {
    RunConfig cfg = load_run_config(file.string(), {}, empty_env());
    CHECK(cfg.env.success_radius == 7.0);
    CHECK(cfg.env.noise_std == 0.01);
  }
  SUBCASE("environment beats the file") {
    RunConfig cfg = load_run_config(file.string(), {},
                                    fake_env({{"BLIMP_ENV_SUCCESS_RADIUS", "8"}}));
    CHECK(cfg.env.success_radius == 8.0);
    CHECK(cfg.env.noise_std == 0.01);  // untouched keys keep the file value
  }
  SUBCASE("flags beat the environment") {
    RunConfig cfg = load_run_config(file.string(), {"env.success_radius=9"},
                                    fake_env({{"BLIMP_ENV_SUCCESS_RADIUS", "8"}}));
    CHECK(cfg.env.success_radius == 9.0);
  }
  SUBCASE("top-level keys use the short prefix") {
    RunConfig cfg = load_run_config("", {}, fake_env({{"BLIMP_SEED", "123"}}));
    CHECK(cfg.seed == 123);
  }
}

TEST_CASE("environment names derive from the key path") {
  bool saw_env_key = false, saw_seed = false;
  for (const ConfigEntry& e : config_schema()) {
    if (e.path() == "env.success_radius") {
      CHECK(e.env_name() == "BLIMP_ENV_SUCCESS_RADIUS");
      saw_env_key = true;
    }
    if (e.path() == "seed") {
      CHECK(e.env_name() == "BLIMP_SEED");
      saw_seed = true;
    }
  }
  CHECK(saw_env_key);
  CHECK(saw_seed);
}

TEST_CASE("rendered snapshots round-trip bit for bit") {
  RunConfig cfg = load_run_config("", {"seed=77", "dynamics.ballast_mass=0.1",
                                       "env.wind_east=-1.5", "agent.learning_rate=0.00025",
                                       "task.workers=4"},
                                  empty_env());
  std::string first = render_config(cfg);

  RunConfig reloaded;
  apply_config_text(reloaded, first, "snapshot");
  reloaded.finalize();
  CHECK(render_config(reloaded) == first);
  CHECK(reloaded.seed == 77);
  CHECK(reloaded.dynamics.ballast_mass == 0.1);
  CHECK(reloaded.wind.y() == -1.5);
  CHECK(reloaded.agent.learning_rate == 0.00025);
  CHECK(training_config_hash(reloaded) == training_config_hash(cfg));

  auto path = scratch_dir() / "snapshot.ini";
  write_config_file(cfg, path.string());
  RunConfig from_file = load_run_config(path.string(), {}, empty_env());
  CHECK(render_config(from_file) == first);
}

TEST_CASE("the training hash tracks training inputs and nothing else") {
  RunConfig base = load_run_config("", {}, empty_env());
  const std::uint64_t h = training_config_hash(base);

  RunConfig same = load_run_config("", {"out_dir=elsewhere", "pid.yaw_kp=3",
                                        "task.laps=5", "task.workers=8"},
                                   empty_env());
  CHECK(training_config_hash(same) == h);

  CHECK(training_config_hash(load_run_config("", {"seed=1"}, empty_env())) != h);
  CHECK(training_config_hash(load_run_config("", {"dynamics.total_mass=13"}, empty_env())) != h);
  CHECK(training_config_hash(load_run_config("", {"env.noise_std=0.02"}, empty_env())) != h);
  CHECK(training_config_hash(load_run_config("", {"agent.gamma=0.95"}, empty_env())) != h);
  CHECK(training_config_hash(load_run_config("", {"agent.num_quantiles=8"}, empty_env())) != h);
}

TEST_CASE("finalize validates every section") {
  CHECK_THROWS_AS(load_run_config("", {"dynamics.total_mass=-1"}, empty_env()),
                  std::invalid_argument);
  CHECK_THROWS_AS(load_run_config("", {"env.sim_dt=0"}, empty_env()), std::invalid_argument);
  CHECK_THROWS_AS(load_run_config("", {"agent.gamma=1"}, empty_env()), std::invalid_argument);
  CHECK_THROWS_AS(load_run_config("", {"pid.yaw_kp=nan"}, empty_env()), std::invalid_argument);
  CHECK_THROWS_WITH_AS(load_run_config("", {"task.laps=0"}, empty_env()),
                       "invalid TaskConfig: laps", std::invalid_argument);
  CHECK_THROWS_WITH_AS(load_run_config("", {"task.workers=0"}, empty_env()),
                       "invalid TaskConfig: workers", std::invalid_argument);
  CHECK_THROWS_WITH_AS(load_run_config("", {"task.trigger_radius=-2"}, empty_env()),
                       "invalid TaskConfig: trigger_radius", std::invalid_argument);
  CHECK_THROWS_AS(load_run_config("", {"env.wind_north=30"}, empty_env()),
                  std::invalid_argument);  // wind magnitude cap
}

TEST_CASE("a missing config file is reported by name") {
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(apply_config_file(cfg, "no_such_file.ini"),
                       "cannot open config file 'no_such_file.ini'", ConfigError);
}
