#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "prefalign/mlp.hpp"
#include "prefalign/rng.hpp"
#include "prefalign/toyworld.hpp"

namespace testutil {

using prefalign::MlpParams;

// k-th scalar of the network, weights (column-major) before bias, layer by layer.
inline double& param_at(MlpParams<double>& p, Eigen::Index k) {
  for (auto& l : p.layers) {
    if (k < l.weight.size()) return l.weight.data()[k];
    k -= l.weight.size();
    if (k < l.bias.size()) return l.bias[k];
    k -= l.bias.size();
  }
  throw std::out_of_range("parameter index");
}

inline double param_at(const MlpParams<double>& p, Eigen::Index k) {
  return param_at(const_cast<MlpParams<double>&>(p), k);
}

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// Largest relative error between analytic gradients and central differences
// (step h) over `count` randomly chosen parameters.
inline double fd_check(MlpParams<double> params, const MlpParams<double>& analytic,
                       const std::function<double(const MlpParams<double>&)>& loss, int count, std::uint64_t seed,
                       double h = 1e-5) {
  prefalign::Rng rng(seed);
  const Eigen::Index n = params.parameter_count();
  double worst = 0.0;
  for (int i = 0; i < count; ++i) {
    const Eigen::Index k = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    const double saved = param_at(params, k);
    param_at(params, k) = saved + h;
    const double up = loss(params);
    param_at(params, k) = saved - h;
    const double down = loss(params);
    param_at(params, k) = saved;
    worst = std::max(worst, rel_error(param_at(analytic, k), (up - down) / (2 * h)));
  }
  return worst;
}

inline prefalign::Image random_image(int w, int h, std::uint64_t seed) {
  prefalign::Rng rng(seed);
  prefalign::Image img(w, h);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = rng.uniform();
  return img;
}

inline prefalign::Mask checkerboard(int w, int h) {
  prefalign::Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(x, y) = (x + y) % 2;
  return m;
}

}  // namespace testutil
