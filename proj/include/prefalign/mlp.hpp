#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "prefalign/error.hpp"
#include "prefalign/rng.hpp"
#include "prefalign/tensor.hpp"

namespace prefalign {

enum class Activation : std::uint8_t { Tanh = 0, Identity = 1 };

/// y = W x + b
template <typename Scalar>
struct DenseLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix weight;  // out x in
  Vector bias;    // out

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// Feed-forward network: hidden layers use `activation`, the output layer is
/// linear. The same type doubles as the gradient container.
template <typename Scalar>
struct MlpParams {
  std::vector<DenseLayer<Scalar>> layers;
  Activation activation = Activation::Tanh;

  Eigen::Index input_dim() const { return layers.front().in_dim(); }
  Eigen::Index output_dim() const { return layers.back().out_dim(); }

  std::vector<Eigen::Index> hidden_dims() const {
    std::vector<Eigen::Index> dims;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) dims.push_back(layers[i].out_dim());
    return dims;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  /// Same architecture, all parameters zero.
  MlpParams zeros_like() const {
    MlpParams z;
    z.activation = activation;
    for (const auto& l : layers)
      z.layers.push_back({DenseLayer<Scalar>::Matrix::Zero(l.out_dim(), l.in_dim()),
                          DenseLayer<Scalar>::Vector::Zero(l.out_dim())});
    return z;
  }

  MlpParams& operator+=(const MlpParams& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += other.layers[i].weight;
      layers[i].bias += other.layers[i].bias;
    }
    return *this;
  }

  MlpParams& operator*=(Scalar s) {
    for (auto& l : layers) {
      l.weight *= s;
      l.bias *= s;
    }
    return *this;
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (a.activation != b.activation || a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const auto& la = a.layers[i];
      const auto& lb = b.layers[i];
      if (la.weight.rows() != lb.weight.rows() || la.weight.cols() != lb.weight.cols()) return false;
      if (la.weight != lb.weight || la.bias != lb.bias) return false;
    }
    return true;
  }
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
template <typename Scalar = double>
MlpParams<Scalar> init_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden_dims,
                           Eigen::Index output_dim, std::uint64_t seed, Activation activation = Activation::Tanh) {
  require(input_dim > 0 && output_dim > 0, "invalid-config", "mlp dimensions must be positive");
  std::vector<Eigen::Index> dims{input_dim};
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);

  Rng rng(seed);
  MlpParams<Scalar> params;
  params.activation = activation;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    require(dims[i + 1] > 0, "invalid-config", "hidden layer width must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[i] + dims[i + 1]));
    using Layer = DenseLayer<Scalar>;
    Layer layer{typename Layer::Matrix(dims[i + 1], dims[i]), Layer::Vector::Zero(dims[i + 1])};
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        layer.weight(r, c) = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

/// Activations kept from a batched forward pass; columns are samples.
template <typename Scalar>
struct MlpTrace {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Matrix> activations;  // activations[0] = input, back() = output

  const Matrix& output() const { return activations.back(); }
};

template <typename Scalar, typename Derived>
MlpTrace<Scalar> mlp_forward_batch(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& inputs) {
  using Matrix = typename MlpTrace<Scalar>::Matrix;
  require(inputs.rows() == params.input_dim(), "shape-mismatch",
          "mlp input has " + std::to_string(inputs.rows()) + " rows, expected input_dim " +
              std::to_string(params.input_dim()));
  MlpTrace<Scalar> trace;
  trace.activations.reserve(params.layers.size() + 1);
  // A lone column goes through the matrix-matrix kernel as well (padded to two
  // columns) so each sample's result is independent of how it was batched.
  const bool single = inputs.cols() == 1;
  if (single) {
    Matrix padded(inputs.rows(), 2);
    padded.col(0) = inputs.col(0);
    padded.col(1) = inputs.col(0);
    trace.activations.push_back(std::move(padded));
  } else {
    trace.activations.emplace_back(inputs);
  }
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    Matrix z = layer.weight * trace.activations.back();
    z.colwise() += layer.bias;
    const bool hidden = i + 1 < params.layers.size();
    if (hidden && params.activation == Activation::Tanh) z = z.array().tanh().matrix();
    trace.activations.push_back(std::move(z));
  }
  if (single)
    for (auto& a : trace.activations) a.conservativeResize(Eigen::NoChange, 1);
  return trace;
}

template <typename Scalar>
struct MlpGradients {
  MlpParams<Scalar> params;                                       // summed over the batch
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> inputs;  // per column
};

/// Backpropagates `upstream` (d loss / d output, one column per sample).
/// Parameter gradients are summed over columns.
template <typename Scalar, typename Derived>
MlpGradients<Scalar> mlp_backward_batch(const MlpParams<Scalar>& params, const MlpTrace<Scalar>& trace,
                                        const Eigen::MatrixBase<Derived>& upstream, bool want_input_grad = true) {
  using Matrix = typename MlpTrace<Scalar>::Matrix;
  require(upstream.rows() == params.output_dim() && upstream.cols() == trace.output().cols(), "shape-mismatch",
          "upstream gradient is " + std::to_string(upstream.rows()) + "x" + std::to_string(upstream.cols()) +
              ", expected " + std::to_string(params.output_dim()) + "x" + std::to_string(trace.output().cols()));
  MlpGradients<Scalar> grads;
  grads.params.activation = params.activation;
  grads.params.layers.resize(params.layers.size());

  Matrix delta = upstream;
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    const Matrix& below = trace.activations[k];
    auto& g = grads.params.layers[k];
    g.weight.noalias() = delta * below.transpose();
    g.bias = delta.rowwise().sum();
    if (k == 0 && !want_input_grad) break;
    Matrix back = params.layers[k].weight.transpose() * delta;
    if (k > 0 && params.activation == Activation::Tanh) back.array() *= (1 - below.array().square());
    delta = std::move(back);
  }
  if (want_input_grad) grads.inputs = std::move(delta);
  return grads;
}

/// Single-sample forward pass.
template <typename Scalar>
BasicTensor<Scalar> mlp_forward(const MlpParams<Scalar>& params, const BasicTensor<Scalar>& input) {
  require(input.size() == params.input_dim(), "shape-mismatch",
          "mlp input length " + std::to_string(input.size()) + " != input_dim " + std::to_string(params.input_dim()));
  auto trace = mlp_forward_batch(params, input.data);
  return BasicTensor<Scalar>::vector(trace.output().col(0));
}

template <typename Scalar>
struct MlpBackward {
  MlpParams<Scalar> param_grads;
  BasicTensor<Scalar> input_grad;
};

/// Single-sample backward pass for d loss / d output = upstream_grad.
template <typename Scalar>
MlpBackward<Scalar> mlp_backward(const MlpParams<Scalar>& params, const BasicTensor<Scalar>& input,
                                 const BasicTensor<Scalar>& upstream_grad) {
  require(input.size() == params.input_dim(), "shape-mismatch",
          "mlp input length " + std::to_string(input.size()) + " != input_dim " + std::to_string(params.input_dim()));
  require(upstream_grad.size() == params.output_dim(), "shape-mismatch",
          "upstream gradient length " + std::to_string(upstream_grad.size()) + " != output_dim " +
              std::to_string(params.output_dim()));
  auto trace = mlp_forward_batch(params, input.data);
  auto grads = mlp_backward_batch(params, trace, upstream_grad.data);
  return {std::move(grads.params), BasicTensor<Scalar>(grads.inputs.col(0), input.shape)};
}

}  // namespace prefalign
