#include "blimp/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace blimp {

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  data_.reserve(capacity);
  data_.resize(capacity);
  full_ = false;
  next_ = 0;
}

void ReplayBuffer::add(const Transition& t) {
  data_[next_] = t;
  next_ = (next_ + 1) % data_.size();
  if (next_ == 0) full_ = true;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (batch > size())
    throw std::logic_error("ReplayBuffer: sample of " + std::to_string(batch) +
                           " from " + std::to_string(size()) + " stored transitions");
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i)
    out.push_back(data_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(size())))]);
  return out;
}

void TrainSchedule::validate() const {
  auto bad = [](const std::string& what) {
    throw std::invalid_argument("invalid TrainSchedule: " + what);
  };
  if (total_steps < 0) bad("total_steps must be non-negative");
  if (warmup_steps < 0) bad("warmup_steps must be non-negative");
  if (batch_size < 1) bad("batch_size must be positive");
  if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) bad("gamma must be in [0, 1)");
  if (target_sync_interval < 1) bad("target_sync_interval must be positive");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) bad("epsilon_start must be in [0, 1]");
  if (!(epsilon_end >= 0.0 && epsilon_end <= 1.0)) bad("epsilon_end must be in [0, 1]");
  if (epsilon_end > epsilon_start) bad("epsilon schedule must be non-increasing");
  if (epsilon_decay_steps < 1) bad("epsilon_decay_steps must be positive");
  if (buffer_capacity == 0) bad("buffer_capacity must be positive");
  if (!(huber_kappa > 0.0)) bad("huber_kappa must be positive");
  if (eval_interval < 0) bad("eval_interval must be non-negative");
}

double TrainSchedule::epsilon_at(long long env_step) const {
  if (env_step >= epsilon_decay_steps) return epsilon_end;
  double f = static_cast<double>(env_step) / static_cast<double>(epsilon_decay_steps);
  return epsilon_start + f * (epsilon_end - epsilon_start);
}

QuantileLoss quantile_huber_loss(const Eigen::Ref<const Vector>& pred,
                                 const Eigen::Ref<const Vector>& targets,
                                 const Eigen::Ref<const Vector>& tau, double kappa) {
  const int n = static_cast<int>(pred.size());
  if (targets.size() != n || tau.size() != n)
    throw std::invalid_argument("quantile_huber_loss: size mismatch");
  if (!(kappa > 0.0)) throw std::invalid_argument("quantile_huber_loss: kappa must be positive");

  QuantileLoss out;
  out.grad = Vector::Zero(n);
  const double scale = 1.0 / (static_cast<double>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = targets(j) - pred(i);
      const double weight = std::abs(tau(i) - (u < 0.0 ? 1.0 : 0.0));
      const double au = std::abs(u);
      const double huber = au <= kappa ? 0.5 * u * u : kappa * (au - 0.5 * kappa);
      out.loss += scale * weight * huber / kappa;
      // d huber / du = clamp(u, -kappa, kappa); u depends on pred with slope -1
      out.grad(i) -= scale * weight * std::clamp(u, -kappa, kappa) / kappa;
    }
  }
  return out;
}

int greedy_action(const Matrix& table) {
  int best = 0;
  double best_mean = table.row(0).mean();
  for (int a = 1; a < table.rows(); ++a) {
    double m = table.row(a).mean();
    if (m > best_mean) {
      best_mean = m;
      best = a;
    }
  }
  return best;
}

Matrix td_targets(const std::vector<Transition>& batch, const QuantileNetwork& target_net,
                  double gamma) {
  const int n = target_net.shape().num_quantiles;
  Matrix out(static_cast<int>(batch.size()), n);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Transition& t = batch[s];
    if (t.done) {
      out.row(static_cast<int>(s)).setConstant(t.reward);
    } else {
      Matrix next = target_net.forward(t.next_obs);
      out.row(static_cast<int>(s)) =
          (gamma * next.row(greedy_action(next))).array() + t.reward;
    }
  }
  return out;
}

void adam_step(Vector& params, const Vector& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (state.m.size() != params.size()) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
    state.t = 0;
  }
  ++state.t;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v.array() + (1.0 - beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  params.array() -=
      lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + eps);
}

QrdqnAgent::QrdqnAgent(const NetworkShape& shape, const TrainSchedule& schedule)
    : schedule_(schedule),
      shape_(shape),
      online_(shape),
      target_(shape),
      tau_(quantile_midpoints(shape.num_quantiles)),
      rng_(schedule.seed) {
  schedule_.validate();
  if (shape.input_dim != 10)
    throw std::invalid_argument("QrdqnAgent: the policy input is the 10-channel observation");
  Rng init_rng(mix_seed(schedule.seed, 0x6e657477));  // dedicated init stream
  online_.init(init_rng);
  target_.params() = online_.params();
  grad_ = Vector::Zero(online_.params().size());
  adam_.m = Vector::Zero(online_.params().size());
  adam_.v = Vector::Zero(online_.params().size());
}

int QrdqnAgent::greedy(const Observation& obs) const {
  return greedy_action(online_.forward(obs.as_vector()));
}

int QrdqnAgent::act(const Observation& obs, double epsilon) {
  if (rng_.uniform01() < epsilon) return rng_.uniform_int(shape_.num_actions);
  return greedy(obs);
}

UpdateStats QrdqnAgent::update(const std::vector<Transition>& batch) {
  if (batch.empty()) throw std::invalid_argument("update: empty batch");
  UpdateStats stats;
  Matrix targets = td_targets(batch, target_, schedule_.gamma);
  grad_.setZero();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  QuantileNetwork::Cache cache;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Transition& t = batch[s];
    Matrix table = online_.forward(t.obs, cache);
    QuantileLoss l = quantile_huber_loss(table.row(t.action).transpose(),
                                         targets.row(static_cast<int>(s)).transpose(),
                                         tau_, schedule_.huber_kappa);
    stats.loss += inv_batch * l.loss;
    online_.backward_action(cache, t.action, inv_batch * l.grad, grad_);
  }
  if (!grad_.allFinite() || !std::isfinite(stats.loss)) {
    stats.skipped = true;
    return stats;
  }
  adam_step(online_.params(), grad_, adam_, schedule_.learning_rate);
  ++update_count_;
  if (update_count_ % schedule_.target_sync_interval == 0) {
    sync_target();
    stats.synced = true;
  }
  return stats;
}

void QrdqnAgent::sync_target() { target_.params() = online_.params(); }

namespace {

constexpr char kCheckpointMagic[9] = "BLIMPQR1";
constexpr std::uint32_t kCheckpointVersion = 1;

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  write_bytes(out, &v, sizeof v);
}

void write_vector(std::ofstream& out, const Vector& v) {
  std::uint64_t n = static_cast<std::uint64_t>(v.size());
  write_pod(out, n);
  write_bytes(out, v.data(), sizeof(double) * v.size());
}

void read_bytes(std::ifstream& in, void* p, std::size_t n, const char* field) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") + field);
}

template <typename T>
T read_pod(std::ifstream& in, const char* field) {
  T v;
  read_bytes(in, &v, sizeof v, field);
  return v;
}

Vector read_vector(std::ifstream& in, const char* field, std::uint64_t expected) {
  std::uint64_t n = read_pod<std::uint64_t>(in, field);
  if (n != expected)
    throw std::runtime_error(std::string("checkpoint: unexpected length for ") + field);
  Vector v(static_cast<Eigen::Index>(n));
  read_bytes(in, v.data(), sizeof(double) * n, field);
  return v;
}

}  // namespace

void QrdqnAgent::save(const std::string& path, std::uint64_t config_hash) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  write_bytes(out, kCheckpointMagic, 8);
  write_pod(out, kCheckpointVersion);
  write_pod(out, config_hash);
  std::int32_t dims[4] = {shape_.input_dim, shape_.hidden_dim, shape_.num_actions,
                          shape_.num_quantiles};
  write_bytes(out, dims, sizeof dims);
  write_pod(out, static_cast<std::int64_t>(env_steps_));
  write_pod(out, static_cast<std::int64_t>(update_count_));
  write_vector(out, online_.params());
  write_vector(out, target_.params());
  write_vector(out, adam_.m);
  write_vector(out, adam_.v);
  write_pod(out, static_cast<std::int64_t>(adam_.t));
  const std::string rng_state = rng_.serialize();
  std::uint64_t rn = rng_state.size();
  write_pod(out, rn);
  write_bytes(out, rng_state.data(), rng_state.size());
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

QrdqnAgent QrdqnAgent::load(const std::string& path, std::uint64_t expected_config_hash,
                            bool* config_mismatch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[8];
  read_bytes(in, magic, 8, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: not a checkpoint file (bad magic)");
  std::uint32_t version = read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  std::uint64_t hash = read_pod<std::uint64_t>(in, "config_hash");
  if (config_mismatch) *config_mismatch = (hash != expected_config_hash);

  std::int32_t dims[4];
  read_bytes(in, dims, sizeof dims, "shape");
  NetworkShape shape{dims[0], dims[1], dims[2], dims[3]};
  shape.validate();

  TrainSchedule schedule;  // hyperparameters live in config, not the checkpoint
  QrdqnAgent agent(shape, schedule);
  agent.env_steps_ = read_pod<std::int64_t>(in, "env_steps");
  agent.update_count_ = read_pod<std::int64_t>(in, "update_count");
  const std::uint64_t count = static_cast<std::uint64_t>(agent.online_.params().size());
  agent.online_.params() = read_vector(in, "online_params", count);
  agent.target_.params() = read_vector(in, "target_params", count);
  agent.adam_.m = read_vector(in, "adam_m", count);
  agent.adam_.v = read_vector(in, "adam_v", count);
  agent.adam_.t = read_pod<std::int64_t>(in, "adam_t");
  std::uint64_t rn = read_pod<std::uint64_t>(in, "rng_state_length");
  if (rn > (1u << 20)) throw std::runtime_error("checkpoint: unreasonable rng state length");
  std::string rng_state(rn, '\0');
  read_bytes(in, rng_state.data(), rn, "rng_state");
  agent.rng_ = Rng::deserialize(rng_state);
  return agent;
}

TrainResult train(BlimpEnv& env, QrdqnAgent& agent, const std::string& checkpoint_dir,
                  std::uint64_t config_hash) {
  const TrainSchedule& sched = agent.schedule();
  ReplayBuffer buffer(sched.buffer_capacity);
  TrainResult result;

  Observation obs = env.reset();
  double episode_return = 0.0;
  double episode_loss_sum = 0.0;
  long long episode_loss_count = 0;
  long long episode = 0;

  for (long long step = 1; step <= sched.total_steps; ++step) {
    const double epsilon = sched.epsilon_at(step - 1);
    const int action = agent.act(obs, epsilon);
    StepResult sr = env.step(action);

    Transition t;
    t.obs = obs.as_vector();
    t.action = action;
    t.reward = sr.reward.total;
    t.next_obs = sr.obs.as_vector();
    t.done = sr.done;
    buffer.add(t);

    obs = sr.obs;
    episode_return += sr.reward.total;
    agent.set_env_steps(step);

    if (step > sched.warmup_steps &&
        buffer.size() >= static_cast<std::size_t>(sched.batch_size)) {
      UpdateStats stats = agent.update(buffer.sample(sched.batch_size, agent.rng()));
      ++result.updates;
      if (stats.skipped) {
        ++result.skipped_updates;
      } else {
        episode_loss_sum += stats.loss;
        ++episode_loss_count;
      }
    }

    if (sr.done) {
      ++episode;
      EpisodeMetric m;
      m.episode = episode;
      m.env_step = step;
      m.episode_return = episode_return;
      m.mean_loss = episode_loss_count > 0 ? episode_loss_sum / episode_loss_count : 0.0;
      m.epsilon = epsilon;
      result.metrics.push_back(m);
      episode_return = 0.0;
      episode_loss_sum = 0.0;
      episode_loss_count = 0;
      obs = env.reset();
    }

    if (sched.eval_interval > 0 && !checkpoint_dir.empty() &&
        step % sched.eval_interval == 0) {
      std::filesystem::create_directories(checkpoint_dir);
      agent.save(checkpoint_dir + "/checkpoint_" + std::to_string(step) + ".bin",
                 config_hash);
    }
  }
  result.env_steps = sched.total_steps;
  return result;
}

const char* const kMetricsHeader = "episode,env_step,return,mean_loss,epsilon";

void write_metrics_csv(const std::string& path, const std::vector<EpisodeMetric>& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open metrics file for writing: " + path);
  out << kMetricsHeader << '\n';
  char buf[96];
  for (const EpisodeMetric& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g\n", m.episode, m.env_step,
                  m.episode_return, m.mean_loss, m.epsilon);
    out << buf;
  }
}

std::vector<EpisodeMetric> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1);
  if (line != kMetricsHeader) throw ParseError("unexpected metrics header", 1);
  std::vector<EpisodeMetric> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    EpisodeMetric m;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lg,%lg,%lg", &m.episode, &m.env_step,
                    &m.episode_return, &m.mean_loss, &m.epsilon) != 5)
      throw ParseError("bad metrics row", lineno);
    out.push_back(m);
  }
  return out;
}

}  // namespace blimp
