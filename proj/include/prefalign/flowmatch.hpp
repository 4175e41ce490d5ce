#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "prefalign/diffusion.hpp"
#include "prefalign/model.hpp"

namespace prefalign {

/// x_t = (1 - t) x0 + t eps; t = 1 is pure noise.
Tensor fm_interpolate(const Tensor& x0, const Tensor& eps, double t);

/// Inputs/targets for velocity regression (target eps - x0); t in [0, 1].
TrainingBatch fm_training_batch(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& cond, const Eigen::VectorXd& t,
                                const Eigen::MatrixXd& eps);

/// ||v_theta(x_t, cond, t) - (eps - x0)||^2 / dim and its parameter gradient.
LossResult fm_loss(const MlpParams<double>& params, const InpaintTask& task, const Tensor& x0, double t,
                   const Tensor& eps);

/// Euler integration from t = 1 (seeded Gaussian) to t = 0 with step 1/steps:
/// x <- x - v(x, t) / steps. Blended onto the task source.
std::vector<Image> fm_sample_batch(const Denoiser& model, std::span<const SampleRequest> requests, int steps);
Image fm_sample(const Denoiser& model, const InpaintTask& task, int steps, std::uint64_t seed);

/// Velocity field over model-space states: columns of x at shared time t.
using VelocityField = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x, double t)>;

/// The bare Euler integrator behind fm_sample (no mapping, no blending).
Eigen::MatrixXd euler_integrate(const VelocityField& velocity, Eigen::MatrixXd x, int steps);

}  // namespace prefalign
