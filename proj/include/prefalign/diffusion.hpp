#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prefalign/model.hpp"
#include "prefalign/tensor.hpp"

namespace prefalign {

/// One sampling job: the task to inpaint and the seed fixing all its noise.
struct SampleRequest {
  const InpaintTask* task = nullptr;
  std::uint64_t seed = 0;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, for 0 <= t <= T (t = 0 gives x0).
Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

/// Inputs/targets for the eps-prediction objective; t holds integer steps in [1, T].
TrainingBatch ddpm_training_batch(const NoiseSchedule& sched, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& cond,
                                  const Eigen::VectorXd& t, const Eigen::MatrixXd& eps);

/// ||eps - eps_theta(x_t, cond, t)||^2 / dim and its parameter gradient.
LossResult ddpm_loss(const MlpParams<double>& params, const InpaintTask& task, const Tensor& x0, int t,
                     const Tensor& eps, const NoiseSchedule& sched);

/// Ancestral sampling from x_T ~ N(0, I) with sigma_t^2 = beta_t and the
/// predicted x0 clamped to [-1, 1]; the result is blended onto the source.
std::vector<Image> ddpm_sample_batch(const Denoiser& model, std::span<const SampleRequest> requests);
Image ddpm_sample(const Denoiser& model, const InpaintTask& task, std::uint64_t seed);

namespace detail {
/// Samples per GEMM chunk in the samplers.
inline constexpr std::size_t kSampleChunk = 64;
Eigen::MatrixXd stack_conditions(std::span<const SampleRequest> requests, int num_classes);
std::vector<Image> finish_samples(std::span<const SampleRequest> requests, const Eigen::MatrixXd& x, int width,
                                  int height);
}  // namespace detail

}  // namespace prefalign
