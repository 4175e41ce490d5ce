#pragma once

#include <cmath>
#include <cstdint>

#include "prefalign/error.hpp"
#include "prefalign/mlp.hpp"

namespace prefalign {

template <typename Scalar>
struct AdamState {
  MlpParams<Scalar> first_moment;
  MlpParams<Scalar> second_moment;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stab = 1e-8;

  static AdamState for_params(const MlpParams<Scalar>& params, double lr) {
    AdamState s;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    s.lr = lr;
    return s;
  }
};

/// One bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, MlpParams<Scalar>& params, const MlpParams<Scalar>& grads) {
  require(grads.layers.size() == params.layers.size() && state.first_moment.layers.size() == params.layers.size(),
          "shape-mismatch", "optimizer state, parameters and gradients have different layer counts");
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    require(g.weight.rows() == params.layers[i].weight.rows() && g.weight.cols() == params.layers[i].weight.cols() &&
                g.bias.size() == params.layers[i].bias.size(),
            "shape-mismatch", "gradient shape differs from parameter shape in layer " + std::to_string(i));
    require(g.weight.allFinite() && g.bias.allFinite(), "non-finite",
            "non-finite gradient in layer " + std::to_string(i) + " at optimizer step " + std::to_string(state.step));
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const Scalar b1 = static_cast<Scalar>(state.beta1);
  const Scalar b2 = static_cast<Scalar>(state.beta2);
  const Scalar step_size = static_cast<Scalar>(state.lr / c1);
  const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
  const Scalar eps = static_cast<Scalar>(state.eps_stab);

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1 - b1) * g;
    v.array() = b2 * v.array() + (1 - b2) * g.array().square();
    p.array() -= step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& m = state.first_moment.layers[i];
    auto& v = state.second_moment.layers[i];
    update(params.layers[i].weight, m.weight, v.weight, grads.layers[i].weight);
    update(params.layers[i].bias, m.bias, v.bias, grads.layers[i].bias);
  }
}

}  // namespace prefalign
