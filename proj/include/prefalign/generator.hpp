#pragma once

#include <span>
#include <vector>

#include "prefalign/diffusion.hpp"
#include "prefalign/flowmatch.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

/// Samples with the model's own algorithm. flow_steps <= 0 uses the model default.
std::vector<Image> sample_images(const Denoiser& model, std::span<const SampleRequest> requests, int flow_steps = 0);

/// One training time draw: integer t in [1, T] for DDPM, t ~ U[0, 1) for FM.
double draw_time(const Denoiser& model, Rng& rng);

/// Inputs/targets of the model's denoising objective.
TrainingBatch training_batch(const Denoiser& model, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& cond,
                             const Eigen::VectorXd& t, const Eigen::MatrixXd& eps);

}  // namespace prefalign
