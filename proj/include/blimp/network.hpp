#pragma once

#include <Eigen/Core>

#include <stdexcept>

#include "blimp/rng.hpp"

namespace blimp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// input -> linear -> layer norm -> relu -> linear -> layer norm -> relu ->
// linear head reshaped to (actions x quantiles)
struct NetworkShape {
  int input_dim = 10;
  int hidden_dim = 64;
  int num_actions = 7;
  int num_quantiles = 12;

  int output_dim() const { return num_actions * num_quantiles; }
  int parameter_count() const;
  void validate() const;
  bool operator==(const NetworkShape&) const = default;
};

inline constexpr double kLayerNormEpsilon = 1e-5;

// All weights live in one flat vector (layout below), so the optimizer and
// the checkpoint format treat the network as a single parameter array.
//   W1 (H x I), b1, ln1 gain, ln1 offset,
//   W2 (H x H), b2, ln2 gain, ln2 offset,
//   W3 (O x H), b3
class QuantileNetwork {
 public:
  explicit QuantileNetwork(const NetworkShape& shape = {});

  // Fan-in scaled uniform init for linear layers; norm gains 1, offsets 0.
  void init(Rng& rng);

  struct Cache {
    Vector input;
    Vector zhat1, y1, a1;  // normalized pre-gain, pre-relu, activation
    Vector zhat2, y2, a2;
    double inv1 = 0.0, inv2 = 0.0;  // 1/std of each norm layer
  };

  // Returns the (actions x quantiles) table. Throws std::runtime_error naming
  // the layer if activations go non-finite.
  Matrix forward(const Eigen::Ref<const Vector>& obs) const;
  Matrix forward(const Eigen::Ref<const Vector>& obs, Cache& cache) const;

  // Accumulates d(loss)/d(params) into grad, given d(loss)/d(table).
  void backward(const Cache& cache, const Matrix& dtable, Vector& grad) const;
  // Same, for a gradient supported on a single action row (the common case).
  void backward_action(const Cache& cache, int action,
                       const Eigen::Ref<const Vector>& dquantiles, Vector& grad) const;

  const NetworkShape& shape() const { return shape_; }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

 private:
  NetworkShape shape_;
  Vector params_;
  int off_[10];  // segment offsets into params_

  friend class NetworkParamView;
};

// tau_i = (2i+1)/(2n) for i = 0..n-1: the quantile midpoints the head's
// columns estimate.
Vector quantile_midpoints(int n);

}  // namespace blimp
