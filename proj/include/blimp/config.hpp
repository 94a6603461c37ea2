#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blimp/agent.hpp"
#include "blimp/dynamics.hpp"
#include "blimp/env.hpp"
#include "blimp/network.hpp"
#include "blimp/pid.hpp"

namespace blimp {

// Malformed config input: unknown section or key, unparsable value, bad
// override syntax. Carries the offending key path (and line, for files).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Geometry and budgets for the evaluation tasks. The square defaults mirror
// the navigation course: 100 m sides at 50 m altitude, 15 m triggers, 3 laps.
struct TaskConfig {
  double side_length = 100.0;    // m
  double altitude = 50.0;        // m above ground (positive up)
  double trigger_radius = 15.0;  // m
  int laps = 3;
  bool counter_clockwise = true;
  double hover_duration = 600.0; // s
  double timeout = 3000.0;       // s, navigation budget
  int eval_episodes = 20;
  int workers = 1;               // sweep/eval concurrency cap

  void validate() const;  // throws std::invalid_argument naming the field
};

// Everything a run needs, grouped the way the config file is: a global seed
// and output directory, then one section per subsystem. Defaults are the
// in-code defaults of each subsystem struct; hull_volume additionally
// supports 0 = "calibrate for neutral lift at the configured mass/density",
// resolved in finalize().
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  BlimpParams dynamics;   // [dynamics]
  EnvConfig env;          // [env] (also wind_* and spawn_* keys)
  Vec3 wind = Vec3::Zero();
  TrainSchedule agent;    // [agent] (also hidden_dim / num_quantiles)
  int hidden_dim = 64;
  int num_quantiles = 12;
  PidGains pid;           // [pid]
  TaskConfig task;        // [task]

  RunConfig();  // leaves dynamics.hull_volume = 0 (auto)

  NetworkShape network_shape() const;
  WindField wind_field() const;

  // Resolves hull_volume = 0 to the neutral volume, mirrors the global seed
  // into the train schedule, then validates every section. Call once after
  // all layers are applied.
  void finalize();
};

// One settable key: its section ("" = top level), name, and string-typed
// accessors. The same table drives file parsing, env-var overrides, --set
// flags, snapshot rendering, and the config hash.
struct ConfigEntry {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;  // throws ConfigError

  std::string path() const { return section.empty() ? key : section + "." + key; }
  std::string env_name() const;  // BLIMP_<SECTION>_<KEY>
};

const std::vector<ConfigEntry>& config_schema();

// Layers, lowest to highest precedence. Each throws ConfigError on unknown
// keys or unparsable values; none of them validates semantics (finalize does).
void apply_config_text(RunConfig& cfg, const std::string& text,
                       const std::string& origin = "config");
void apply_config_file(RunConfig& cfg, const std::string& path);

using EnvLookup = std::function<const char*(const char*)>;
// Scans BLIMP_* names derived from the schema; lookup defaults to ::getenv.
void apply_env_overrides(RunConfig& cfg, const EnvLookup& lookup = {});

// "key=value" or "section.key=value", the --set flag payload.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Full precedence chain: defaults < file (may be "") < env vars < overrides,
// then finalize(). The one-stop entry point the CLI uses.
RunConfig load_run_config(const std::string& file_path,
                          const std::vector<std::string>& overrides = {},
                          const EnvLookup& lookup = {});

// The resolved snapshot: every key, schema order, numbers at full precision.
// render -> apply -> render is byte-stable.
std::string render_config(const RunConfig& cfg);
void write_config_file(const RunConfig& cfg, const std::string& path);

inline constexpr const char* kResolvedConfigName = "resolved_config.ini";

// FNV-1a over the canonical seed/[dynamics]/[env]/[agent] lines — the
// sections that shape training. Stored in checkpoints so a mismatched reload
// is detectable; [pid], [task], and out_dir are deliberately excluded.
std::uint64_t training_config_hash(const RunConfig& cfg);

}  // namespace blimp
