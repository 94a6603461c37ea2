#include "blimp/network.hpp"

#include <cmath>
#include <string>

namespace blimp {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;
using MutVecMap = Eigen::Map<Vector>;

void check_finite(const Vector& v, int layer) {
  if (!v.allFinite())
    throw std::runtime_error("forward: non-finite activations at layer " +
                             std::to_string(layer));
}

// y = gain .* zhat + offset, zhat = (z - mean) / sqrt(var + eps)
void layer_norm(const Vector& z, const double* gain, const double* offset, Vector& zhat,
                Vector& y, double& inv) {
  const int n = static_cast<int>(z.size());
  const double mu = z.mean();
  zhat = z.array() - mu;
  const double var = zhat.squaredNorm() / n;
  inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
  zhat *= inv;
  y = ConstVecMap(gain, n).cwiseProduct(zhat) + ConstVecMap(offset, n);
}

// dz = inv * (dzhat - mean(dzhat) - zhat * mean(dzhat .* zhat))
Vector layer_norm_backward(const Vector& dy, const Vector& zhat, double inv,
                           const double* gain) {
  const int n = static_cast<int>(dy.size());
  Vector dzhat = ConstVecMap(gain, n).cwiseProduct(dy);
  const double m1 = dzhat.mean();
  const double m2 = dzhat.cwiseProduct(zhat).mean();
  return inv * (dzhat.array() - m1 - zhat.array() * m2).matrix();
}

}  // namespace

int NetworkShape::parameter_count() const {
  const int h = hidden_dim, i = input_dim, o = output_dim();
  return h * i + 3 * h + h * h + 3 * h + o * h + o;
}

void NetworkShape::validate() const {
  if (input_dim <= 0 || hidden_dim <= 0 || num_actions <= 0)
    throw std::invalid_argument("NetworkShape: dimensions must be positive");
  if (num_quantiles < 2 || num_quantiles > 12)
    throw std::invalid_argument("NetworkShape: num_quantiles must be in [2, 12]");
}

QuantileNetwork::QuantileNetwork(const NetworkShape& shape) : shape_(shape) {
  shape_.validate();
  const int h = shape_.hidden_dim, i = shape_.input_dim, o = shape_.output_dim();
  int sizes[10] = {h * i, h, h, h, h * h, h, h, h, o * h, o};
  int acc = 0;
  for (int k = 0; k < 10; ++k) {
    off_[k] = acc;
    acc += sizes[k];
  }
  params_ = Vector::Zero(acc);
}

void QuantileNetwork::init(Rng& rng) {
  const int h = shape_.hidden_dim, i = shape_.input_dim, o = shape_.output_dim();
  auto fill = [&](int seg, int count, double bound) {
    double* p = params_.data() + off_[seg];
    for (int k = 0; k < count; ++k) p[k] = rng.uniform(-bound, bound);
  };
  const double b1 = 1.0 / std::sqrt(static_cast<double>(i));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(h));
  fill(0, h * i, b1);
  fill(1, h, b1);
  fill(4, h * h, b2);
  fill(5, h, b2);
  fill(8, o * h, b2);
  fill(9, o, b2);
  params_.segment(off_[2], h).setOnes();
  params_.segment(off_[3], h).setZero();
  params_.segment(off_[6], h).setOnes();
  params_.segment(off_[7], h).setZero();
}

Matrix QuantileNetwork::forward(const Eigen::Ref<const Vector>& obs) const {
  Cache cache;
  return forward(obs, cache);
}

Matrix QuantileNetwork::forward(const Eigen::Ref<const Vector>& obs, Cache& cache) const {
  const int h = shape_.hidden_dim, i = shape_.input_dim, o = shape_.output_dim();
  if (obs.size() != i) throw std::invalid_argument("forward: observation size mismatch");
  const double* p = params_.data();

  cache.input = obs;
  Vector z1 = ConstMap(p + off_[0], h, i) * obs + ConstVecMap(p + off_[1], h);
  layer_norm(z1, p + off_[2], p + off_[3], cache.zhat1, cache.y1, cache.inv1);
  cache.a1 = cache.y1.cwiseMax(0.0);
  check_finite(cache.a1, 1);

  Vector z2 = ConstMap(p + off_[4], h, h) * cache.a1 + ConstVecMap(p + off_[5], h);
  layer_norm(z2, p + off_[6], p + off_[7], cache.zhat2, cache.y2, cache.inv2);
  cache.a2 = cache.y2.cwiseMax(0.0);
  check_finite(cache.a2, 2);

  Vector out = ConstMap(p + off_[8], o, h) * cache.a2 + ConstVecMap(p + off_[9], o);
  check_finite(out, 3);

  // row = action, column = quantile; head output is action-major
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(
             out.data(), shape_.num_actions, shape_.num_quantiles)
      .eval();
}

void QuantileNetwork::backward(const Cache& cache, const Matrix& dtable,
                               Vector& grad) const {
  const int h = shape_.hidden_dim, i = shape_.input_dim, o = shape_.output_dim();
  const double* p = params_.data();
  double* g = grad.data();
  if (grad.size() != params_.size())
    throw std::invalid_argument("backward: gradient size mismatch");

  Vector dout(o);
  for (int a = 0; a < shape_.num_actions; ++a)
    for (int q = 0; q < shape_.num_quantiles; ++q)
      dout(a * shape_.num_quantiles + q) = dtable(a, q);

  MutVecMap(g + off_[9], o) += dout;
  MutMap(g + off_[8], o, h).noalias() += dout * cache.a2.transpose();
  Vector da2 = ConstMap(p + off_[8], o, h).transpose() * dout;

  Vector dy2 = (cache.y2.array() > 0.0).select(da2, 0.0);
  MutVecMap(g + off_[7], h) += dy2;
  MutVecMap(g + off_[6], h) += dy2.cwiseProduct(cache.zhat2);
  Vector dz2 = layer_norm_backward(dy2, cache.zhat2, cache.inv2, p + off_[6]);

  MutVecMap(g + off_[5], h) += dz2;
  MutMap(g + off_[4], h, h).noalias() += dz2 * cache.a1.transpose();
  Vector da1 = ConstMap(p + off_[4], h, h).transpose() * dz2;

  Vector dy1 = (cache.y1.array() > 0.0).select(da1, 0.0);
  MutVecMap(g + off_[3], h) += dy1;
  MutVecMap(g + off_[2], h) += dy1.cwiseProduct(cache.zhat1);
  Vector dz1 = layer_norm_backward(dy1, cache.zhat1, cache.inv1, p + off_[2]);

  MutVecMap(g + off_[1], h) += dz1;
  MutMap(g + off_[0], h, i).noalias() += dz1 * cache.input.transpose();
}

void QuantileNetwork::backward_action(const Cache& cache, int action,
                                      const Eigen::Ref<const Vector>& dquantiles,
                                      Vector& grad) const {
  const int h = shape_.hidden_dim, i = shape_.input_dim, n = shape_.num_quantiles;
  const double* p = params_.data();
  double* g = grad.data();
  if (action < 0 || action >= shape_.num_actions)
    throw std::out_of_range("backward_action: bad action index");
  if (grad.size() != params_.size())
    throw std::invalid_argument("backward_action: gradient size mismatch");

  // only the taken action's head rows carry gradient
  const int row0 = action * n;
  MutVecMap(g + off_[9] + row0, n) += dquantiles;
  const int o = shape_.output_dim();
  MutMap gW3(g + off_[8], o, h);
  ConstMap W3(p + off_[8], o, h);
  gW3.middleRows(row0, n).noalias() += dquantiles * cache.a2.transpose();
  Vector da2 = W3.middleRows(row0, n).transpose() * dquantiles;

  Vector dy2 = (cache.y2.array() > 0.0).select(da2, 0.0);
  MutVecMap(g + off_[7], h) += dy2;
  MutVecMap(g + off_[6], h) += dy2.cwiseProduct(cache.zhat2);
  Vector dz2 = layer_norm_backward(dy2, cache.zhat2, cache.inv2, p + off_[6]);

  MutVecMap(g + off_[5], h) += dz2;
  MutMap(g + off_[4], h, h).noalias() += dz2 * cache.a1.transpose();
  Vector da1 = ConstMap(p + off_[4], h, h).transpose() * dz2;

  Vector dy1 = (cache.y1.array() > 0.0).select(da1, 0.0);
  MutVecMap(g + off_[3], h) += dy1;
  MutVecMap(g + off_[2], h) += dy1.cwiseProduct(cache.zhat1);
  Vector dz1 = layer_norm_backward(dy1, cache.zhat1, cache.inv1, p + off_[2]);

  MutVecMap(g + off_[1], h) += dz1;
  MutMap(g + off_[0], h, i).noalias() += dz1 * cache.input.transpose();
}

Vector quantile_midpoints(int n) {
  if (n < 1) throw std::invalid_argument("quantile_midpoints: n must be positive");
  Vector tau(n);
  for (int i = 0; i < n; ++i) tau(i) = (2.0 * i + 1.0) / (2.0 * n);
  return tau;
}

}  // namespace blimp
