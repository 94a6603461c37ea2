#include "blimp/config.hpp"

#include <cctype>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace blimp {

namespace {

std::string fmt_f64(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_f64(const std::string& path, const std::string& text) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(path + ": cannot parse '" + text + "' as a number");
  }
}

long long parse_i64(const std::string& path, const std::string& text) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(path + ": cannot parse '" + text + "' as an integer");
  }
}

std::uint64_t parse_u64(const std::string& path, const std::string& text) {
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] == '-') throw std::invalid_argument("");
    std::uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(path + ": cannot parse '" + text + "' as an unsigned integer");
  }
}

bool parse_bool(const std::string& path, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(path + ": cannot parse '" + text + "' as a boolean (true/false)");
}

using F64Ref = double& (*)(RunConfig&);
using IntRef = int& (*)(RunConfig&);
using I64Ref = long long& (*)(RunConfig&);
using SizeRef = std::size_t& (*)(RunConfig&);
using BoolRef = bool& (*)(RunConfig&);

ConfigEntry f64_entry(const char* sec, const char* key, F64Ref ref) {
  ConfigEntry e{sec, key, nullptr, nullptr};
  std::string path = e.path();
  e.get = [ref](const RunConfig& c) { return fmt_f64(ref(const_cast<RunConfig&>(c))); };
  e.set = [ref, path](RunConfig& c, const std::string& v) { ref(c) = parse_f64(path, v); };
  return e;
}

ConfigEntry int_entry(const char* sec, const char* key, IntRef ref) {
  ConfigEntry e{sec, key, nullptr, nullptr};
  std::string path = e.path();
  e.get = [ref](const RunConfig& c) {
    return std::to_string(ref(const_cast<RunConfig&>(c)));
  };
  e.set = [ref, path](RunConfig& c, const std::string& v) {
    long long parsed = parse_i64(path, v);
    if (parsed < INT_MIN || parsed > INT_MAX)
      throw ConfigError(path + ": value " + v + " out of range");
    ref(c) = static_cast<int>(parsed);
  };
  return e;
}

ConfigEntry i64_entry(const char* sec, const char* key, I64Ref ref) {
  ConfigEntry e{sec, key, nullptr, nullptr};
  std::string path = e.path();
  e.get = [ref](const RunConfig& c) {
    return std::to_string(ref(const_cast<RunConfig&>(c)));
  };
  e.set = [ref, path](RunConfig& c, const std::string& v) { ref(c) = parse_i64(path, v); };
  return e;
}

ConfigEntry size_entry(const char* sec, const char* key, SizeRef ref) {
  ConfigEntry e{sec, key, nullptr, nullptr};
  std::string path = e.path();
  e.get = [ref](const RunConfig& c) {
    return std::to_string(ref(const_cast<RunConfig&>(c)));
  };
  e.set = [ref, path](RunConfig& c, const std::string& v) {
    ref(c) = static_cast<std::size_t>(parse_u64(path, v));
  };
  return e;
}

ConfigEntry bool_entry(const char* sec, const char* key, BoolRef ref) {
  ConfigEntry e{sec, key, nullptr, nullptr};
  std::string path = e.path();
  e.get = [ref](const RunConfig& c) {
    return ref(const_cast<RunConfig&>(c)) ? "true" : "false";
  };
  e.set = [ref, path](RunConfig& c, const std::string& v) { ref(c) = parse_bool(path, v); };
  return e;
}

std::vector<ConfigEntry> build_schema() {
  std::vector<ConfigEntry> s;

// One line per key; the lambda names the storage location.
#define F64(sec, key, expr) \
  s.push_back(f64_entry(sec, key, [](RunConfig& c) -> double& { return expr; }))
#define INT(sec, key, expr) \
  s.push_back(int_entry(sec, key, [](RunConfig& c) -> int& { return expr; }))
#define I64(sec, key, expr) \
  s.push_back(i64_entry(sec, key, [](RunConfig& c) -> long long& { return expr; }))
#define SIZE(sec, key, expr) \
  s.push_back(size_entry(sec, key, [](RunConfig& c) -> std::size_t& { return expr; }))
#define BOOL(sec, key, expr) \
  s.push_back(bool_entry(sec, key, [](RunConfig& c) -> bool& { return expr; }))

  {  // top level
    ConfigEntry e{"", "seed", nullptr, nullptr};
    e.get = [](const RunConfig& c) { return std::to_string(c.seed); };
    e.set = [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); };
    s.push_back(e);
    ConfigEntry o{"", "out_dir", nullptr, nullptr};
    o.get = [](const RunConfig& c) { return c.out_dir; };
    o.set = [](RunConfig& c, const std::string& v) { c.out_dir = v; };
    s.push_back(o);
  }

  F64("dynamics", "total_mass", c.dynamics.total_mass);
  F64("dynamics", "hull_volume", c.dynamics.hull_volume);
  F64("dynamics", "buoyancy_factor", c.dynamics.buoyancy_factor);
  F64("dynamics", "air_density", c.dynamics.air_density);
  F64("dynamics", "gravity", c.dynamics.gravity);
  F64("dynamics", "drag_area_axial", c.dynamics.drag_area_axial);
  F64("dynamics", "drag_area_vertical", c.dynamics.drag_area_vertical);
  F64("dynamics", "drag_area_lateral", c.dynamics.drag_area_lateral);
  F64("dynamics", "pitch_inertia", c.dynamics.pitch_inertia);
  F64("dynamics", "yaw_inertia", c.dynamics.yaw_inertia);
  F64("dynamics", "gondola_pendulum_arm", c.dynamics.gondola_pendulum_arm);
  F64("dynamics", "fin_moment_gain_pitch", c.dynamics.fin_moment_gain_pitch);
  F64("dynamics", "fin_moment_gain_yaw", c.dynamics.fin_moment_gain_yaw);
  F64("dynamics", "tail_motor_moment_gain", c.dynamics.tail_motor_moment_gain);
  F64("dynamics", "main_thrust_gain", c.dynamics.main_thrust_gain);
  F64("dynamics", "pitch_damping", c.dynamics.pitch_damping);
  F64("dynamics", "yaw_damping", c.dynamics.yaw_damping);
  F64("dynamics", "ballast_mass", c.dynamics.ballast_mass);
  F64("dynamics", "ballast_arm", c.dynamics.ballast_arm);

  F64("env", "sim_dt", c.env.sim_dt);
  F64("env", "policy_dt", c.env.policy_dt);
  F64("env", "episode_length", c.env.episode_length);
  F64("env", "success_radius", c.env.success_radius);
  F64("env", "target_half_extent", c.env.target_half_extent);
  F64("env", "min_target_altitude", c.env.min_target_altitude);
  F64("env", "noise_std", c.env.noise_std);
  F64("env", "action_noise", c.env.action_noise);
  F64("env", "l_max", c.env.l_max);
  F64("env", "z_max", c.env.z_max);
  F64("env", "v_max", c.env.v_max);
  F64("env", "w_max", c.env.w_max);
  F64("env", "i0", c.env.i0);
  F64("env", "i1", c.env.i1);
  F64("env", "i2", c.env.i2);
  F64("env", "j0", c.env.j0);
  F64("env", "j1", c.env.j1);
  F64("env", "k0", c.env.k0);
  F64("env", "throttle_cap", c.env.throttle_cap);
  F64("env", "spawn_north", c.env.spawn_position.x());
  F64("env", "spawn_east", c.env.spawn_position.y());
  F64("env", "spawn_down", c.env.spawn_position.z());
  F64("env", "spawn_yaw", c.env.spawn_yaw);
  F64("env", "wind_north", c.wind.x());
  F64("env", "wind_east", c.wind.y());
  F64("env", "wind_down", c.wind.z());

  I64("agent", "total_steps", c.agent.total_steps);
  I64("agent", "warmup_steps", c.agent.warmup_steps);
  INT("agent", "batch_size", c.agent.batch_size);
  F64("agent", "learning_rate", c.agent.learning_rate);
  F64("agent", "gamma", c.agent.gamma);
  I64("agent", "target_sync_interval", c.agent.target_sync_interval);
  F64("agent", "epsilon_start", c.agent.epsilon_start);
  F64("agent", "epsilon_end", c.agent.epsilon_end);
  I64("agent", "epsilon_decay_steps", c.agent.epsilon_decay_steps);
  I64("agent", "eval_interval", c.agent.eval_interval);
  SIZE("agent", "buffer_capacity", c.agent.buffer_capacity);
  F64("agent", "huber_kappa", c.agent.huber_kappa);
  INT("agent", "hidden_dim", c.hidden_dim);
  INT("agent", "num_quantiles", c.num_quantiles);

  F64("pid", "yaw_kp", c.pid.yaw_kp);
  F64("pid", "yaw_ki", c.pid.yaw_ki);
  F64("pid", "yaw_kd", c.pid.yaw_kd);
  F64("pid", "yaw_integral_clamp", c.pid.yaw_integral_clamp);
  F64("pid", "tail_share", c.pid.tail_share);
  F64("pid", "yaw_deadband_m", c.pid.yaw_deadband_m);
  F64("pid", "altitude_kp", c.pid.altitude_kp);
  F64("pid", "altitude_ki", c.pid.altitude_ki);
  F64("pid", "altitude_kd", c.pid.altitude_kd);
  F64("pid", "altitude_integral_clamp", c.pid.altitude_integral_clamp);
  F64("pid", "pitch_reference_limit", c.pid.pitch_reference_limit);
  F64("pid", "pitch_kp", c.pid.pitch_kp);
  F64("pid", "pitch_kd", c.pid.pitch_kd);
  F64("pid", "speed_kp", c.pid.speed_kp);
  F64("pid", "speed_ki", c.pid.speed_ki);
  F64("pid", "speed_kd", c.pid.speed_kd);
  F64("pid", "speed_integral_clamp", c.pid.speed_integral_clamp);
  F64("pid", "reference_speed", c.pid.reference_speed);
  F64("pid", "speed_deadband_m", c.pid.speed_deadband_m);

  F64("task", "side_length", c.task.side_length);
  F64("task", "altitude", c.task.altitude);
  F64("task", "trigger_radius", c.task.trigger_radius);
  INT("task", "laps", c.task.laps);
  BOOL("task", "counter_clockwise", c.task.counter_clockwise);
  F64("task", "hover_duration", c.task.hover_duration);
  F64("task", "timeout", c.task.timeout);
  INT("task", "eval_episodes", c.task.eval_episodes);
  INT("task", "workers", c.task.workers);

#undef F64
#undef INT
#undef I64
#undef SIZE
#undef BOOL
  return s;
}

const std::map<std::string, const ConfigEntry*>& schema_index() {
  static const std::map<std::string, const ConfigEntry*> index = [] {
    std::map<std::string, const ConfigEntry*> m;
    for (const ConfigEntry& e : config_schema()) m[e.path()] = &e;
    return m;
  }();
  return index;
}

const ConfigEntry* find_entry(const std::string& path) {
  auto it = schema_index().find(path);
  return it == schema_index().end() ? nullptr : it->second;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool known_section(const std::string& name) {
  for (const ConfigEntry& e : config_schema())
    if (e.section == name) return true;
  return false;
}

}  // namespace

void TaskConfig::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw std::invalid_argument(std::string("invalid TaskConfig: ") + field);
  };
  require(std::isfinite(side_length) && side_length > 0.0, "side_length");
  require(std::isfinite(altitude) && altitude > 0.0, "altitude");
  require(std::isfinite(trigger_radius) && trigger_radius > 0.0, "trigger_radius");
  require(laps >= 1, "laps");
  require(std::isfinite(hover_duration) && hover_duration >= 0.0, "hover_duration");
  require(std::isfinite(timeout) && timeout > 0.0, "timeout");
  require(eval_episodes >= 1, "eval_episodes");
  require(workers >= 1, "workers");
}

RunConfig::RunConfig() {
  dynamics.hull_volume = 0.0;  // resolved against mass/density in finalize()
}

NetworkShape RunConfig::network_shape() const {
  NetworkShape shape;
  shape.hidden_dim = hidden_dim;
  shape.num_quantiles = num_quantiles;
  return shape;
}

WindField RunConfig::wind_field() const {
  WindField field;
  field.velocity = wind;
  return field;
}

void RunConfig::finalize() {
  if (dynamics.hull_volume == 0.0)
    dynamics.hull_volume = neutral_hull_volume(dynamics.total_mass, dynamics.air_density);
  agent.seed = seed;
  dynamics.validate();
  env.validate();
  agent.validate();
  network_shape().validate();
  pid.validate();
  task.validate();
  wind_field().validate();
}

std::string ConfigEntry::env_name() const {
  std::string name = "BLIMP_";
  auto append_upper = [&name](const std::string& part) {
    for (char ch : part) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  };
  if (!section.empty()) {
    append_upper(section);
    name += '_';
  }
  append_upper(key);
  return name;
}

const std::vector<ConfigEntry>& config_schema() {
  static const std::vector<ConfigEntry> schema = build_schema();
  return schema;
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    auto where = [&] { return " (" + origin + " line " + std::to_string(line_no) + ")"; };
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("malformed section header '" + t + "'" + where());
      section = trim(t.substr(1, t.size() - 2));
      if (!known_section(section) || section.empty())
        throw ConfigError("unknown section '[" + section + "]'" + where());
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value', got '" + t + "'" + where());
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key" + where());
    std::string path = section.empty() ? key : section + "." + key;
    const ConfigEntry* entry = find_entry(path);
    if (!entry) throw ConfigError("unknown key '" + path + "'" + where());
    entry->set(cfg, value);
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path);
}

void apply_env_overrides(RunConfig& cfg, const EnvLookup& lookup) {
  EnvLookup get = lookup ? lookup : [](const char* name) { return std::getenv(name); };
  for (const ConfigEntry& e : config_schema()) {
    const char* value = get(e.env_name().c_str());
    if (value) e.set(cfg, value);
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be key=value, got '" + assignment + "'");
  std::string path = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  const ConfigEntry* entry = find_entry(path);
  if (!entry) throw ConfigError("unknown key '" + path + "'");
  entry->set(cfg, value);
}

RunConfig load_run_config(const std::string& file_path, const std::vector<std::string>& overrides,
                          const EnvLookup& lookup) {
  RunConfig cfg;
  if (!file_path.empty()) apply_config_file(cfg, file_path);
  apply_env_overrides(cfg, lookup);
  for (const std::string& assignment : overrides) apply_override(cfg, assignment);
  cfg.finalize();
  return cfg;
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# resolved run configuration (defaults < file < environment < flags)\n";
  std::string section;
  for (const ConfigEntry& e : config_schema()) {
    if (e.section != section) {
      section = e.section;
      out << "\n[" << section << "]\n";
    }
    out << e.key << " = " << e.get(cfg) << "\n";
  }
  return out.str();
}

void write_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config file '" + path + "'");
  out << render_config(cfg);
}

std::uint64_t training_config_hash(const RunConfig& cfg) {
  std::uint64_t hash = 14695981039346656037ull;
  auto absorb = [&hash](const std::string& text) {
    for (unsigned char ch : text) {
      hash ^= ch;
      hash *= 1099511628211ull;
    }
  };
  for (const ConfigEntry& e : config_schema()) {
    bool training_relevant = e.path() == "seed" || e.section == "dynamics" ||
                             e.section == "env" || e.section == "agent";
    if (!training_relevant) continue;
    absorb(e.path());
    absorb("=");
    absorb(e.get(cfg));
    absorb("\n");
  }
  return hash;
}

}  // namespace blimp
