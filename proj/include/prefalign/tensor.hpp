#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "prefalign/error.hpp"

namespace prefalign {

/// Flat dense array with a logical shape. Storage is a column vector so it
/// composes directly with Eigen expressions.
template <typename Scalar>
struct BasicTensor {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector data;
  std::vector<Eigen::Index> shape;

  BasicTensor() = default;
  BasicTensor(Vector values, std::vector<Eigen::Index> dims) : data(std::move(values)), shape(std::move(dims)) {
    require(static_cast<Eigen::Index>(numel(shape)) == data.size(), "shape-mismatch",
            "tensor data length " + std::to_string(data.size()) + " does not match shape product " +
                std::to_string(numel(shape)));
  }

  static BasicTensor zeros(std::vector<Eigen::Index> dims) {
    const auto n = numel(dims);
    return BasicTensor(Vector::Zero(n), std::move(dims));
  }

  static BasicTensor vector(Vector values) {
    const Eigen::Index n = values.size();
    return BasicTensor(std::move(values), {n});
  }

  Eigen::Index size() const { return data.size(); }
  bool all_finite() const { return data.allFinite(); }

  static Eigen::Index numel(const std::vector<Eigen::Index>& dims) {
    return std::accumulate(dims.begin(), dims.end(), Eigen::Index{1}, std::multiplies<>());
  }
};

using Tensor = BasicTensor<double>;

}  // namespace prefalign
