#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blimp/env.hpp"
#include "blimp/network.hpp"

namespace blimp {

struct Transition {
  Eigen::Matrix<double, 10, 1> obs = Eigen::Matrix<double, 10, 1>::Zero();
  int action = 0;
  double reward = 0.0;
  Eigen::Matrix<double, 10, 1> next_obs = Eigen::Matrix<double, 10, 1>::Zero();
  bool done = false;
};

// Fixed-capacity ring with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(const Transition& t);
  std::size_t size() const { return full_ ? data_.size() : next_; }
  std::size_t capacity() const { return data_.size(); }

  // Throws std::logic_error when fewer than batch transitions are stored.
  std::vector<Transition> sample(std::size_t batch, Rng& rng) const;

 private:
  std::vector<Transition> data_;
  std::size_t next_ = 0;
  bool full_ = false;
};

struct TrainSchedule {
  long long total_steps = 200000;        // env steps
  long long warmup_steps = 5000;         // acting before the first update
  int batch_size = 64;
  double learning_rate = 1e-4;
  double gamma = 0.99;
  long long target_sync_interval = 1000; // updates between target refreshes
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  long long epsilon_decay_steps = 100000;// env steps; default half the run
  long long eval_interval = 0;           // env steps between checkpoints; 0 = off
  std::size_t buffer_capacity = 100000;
  double huber_kappa = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  double epsilon_at(long long env_step) const;  // linear, then flat
};

// Mean over all N x N (prediction, target) pairs of
//   |tau_i - 1{target_j < pred_i}| * Huber_kappa(target_j - pred_i) / kappa
struct QuantileLoss {
  double loss = 0.0;
  Vector grad;  // d loss / d pred
};
QuantileLoss quantile_huber_loss(const Eigen::Ref<const Vector>& pred,
                                 const Eigen::Ref<const Vector>& targets,
                                 const Eigen::Ref<const Vector>& tau, double kappa);

// Argmax of per-action quantile means; ties break toward the lowest index.
int greedy_action(const Matrix& table);

// Per-sample target quantiles (rows = batch order): all reward when done,
// else reward + gamma * target-net quantiles of the greedy-mean next action.
Matrix td_targets(const std::vector<Transition>& batch, const QuantileNetwork& target_net,
                  double gamma);

struct AdamState {
  Vector m, v;
  long long t = 0;
};
void adam_step(Vector& params, const Vector& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct UpdateStats {
  double loss = 0.0;
  bool skipped = false;  // non-finite gradient; parameters untouched
  bool synced = false;   // target refreshed on this update
};

class QrdqnAgent {
 public:
  QrdqnAgent(const NetworkShape& shape, const TrainSchedule& schedule);

  int greedy(const Observation& obs) const;
  int act(const Observation& obs, double epsilon);  // epsilon-greedy, internal rng
  Matrix quantiles(const Observation& obs) const { return online_.forward(obs.as_vector()); }

  UpdateStats update(const std::vector<Transition>& batch);
  void sync_target();

  QuantileNetwork& online() { return online_; }
  const QuantileNetwork& online() const { return online_; }
  const QuantileNetwork& target() const { return target_; }
  const TrainSchedule& schedule() const { return schedule_; }
  const Vector& tau() const { return tau_; }
  Rng& rng() { return rng_; }
  long long update_count() const { return update_count_; }
  long long env_steps() const { return env_steps_; }
  void set_env_steps(long long n) { env_steps_ = n; }

  // Versioned binary container: format tag, config hash, counters, both
  // parameter sets, optimizer state, rng state. load -> save round-trips
  // byte-identically.
  void save(const std::string& path, std::uint64_t config_hash) const;
  static QrdqnAgent load(const std::string& path, std::uint64_t expected_config_hash,
                         bool* config_mismatch = nullptr);

 private:
  TrainSchedule schedule_;
  NetworkShape shape_;
  QuantileNetwork online_, target_;
  AdamState adam_;
  Vector tau_;
  Vector grad_;  // scratch, reused across updates
  Rng rng_;
  long long update_count_ = 0;
  long long env_steps_ = 0;
};

struct EpisodeMetric {
  long long episode = 0;
  long long env_step = 0;
  double episode_return = 0.0;
  double mean_loss = 0.0;
  double epsilon = 0.0;
};

struct TrainResult {
  std::vector<EpisodeMetric> metrics;
  long long env_steps = 0;
  long long updates = 0;
  long long skipped_updates = 0;
};

// Interleaves epsilon-greedy acting, replay insertion, and updates after
// warmup; one metrics row per completed episode. checkpoint_dir may be empty.
TrainResult train(BlimpEnv& env, QrdqnAgent& agent, const std::string& checkpoint_dir = "",
                  std::uint64_t config_hash = 0);

extern const char* const kMetricsHeader;
void write_metrics_csv(const std::string& path, const std::vector<EpisodeMetric>& metrics);
std::vector<EpisodeMetric> read_metrics_csv(const std::string& path);  // throws ParseError

}  // namespace blimp
