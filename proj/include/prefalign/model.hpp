#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "prefalign/mlp.hpp"
#include "prefalign/toyworld.hpp"

namespace prefalign {

enum class GeneratorTag : std::uint8_t { DDPM = 1, FM = 2 };

std::string to_string(GeneratorTag tag);
GeneratorTag parse_generator_tag(const std::string& text);

/// Per-step betas and cumulative alpha_bar. Timesteps are 1-based;
/// alpha_bar(0) == 1.
struct NoiseSchedule {
  Eigen::VectorXd betas;       // betas[t-1] = beta_t
  Eigen::VectorXd alpha_bars;  // alpha_bars[t-1] = prod_{s<=t} (1 - beta_s)

  static NoiseSchedule linear(int steps, double beta_start, double beta_end);

  int steps() const { return static_cast<int>(betas.size()); }
  double beta(int t) const { return betas[t - 1]; }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars[t - 1]; }
};

/// Everything needed to rebuild a denoiser's architecture.
struct DenoiserSpec {
  GeneratorTag tag = GeneratorTag::DDPM;
  WorldDims dims;
  std::vector<Eigen::Index> hidden{1024};
  int timesteps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int flow_steps = 25;
  std::uint64_t init_seed = 17;

  friend bool operator==(const DenoiserSpec&, const DenoiserSpec&) = default;
};

/// Conditional network predicting eps (DDPM) or velocity (FM).
struct Denoiser {
  DenoiserSpec spec;
  NoiseSchedule schedule;
  MlpParams<double> net;
};

Denoiser make_denoiser(const DenoiserSpec& spec);

/// Input layout: [x_t | masked view (model space) | mask | one-hot(label) | time features].
Eigen::Index denoiser_input_dim(const WorldDims& dims);
/// The static part [masked view | mask | one-hot] of the input.
Eigen::VectorXd task_condition(const InpaintTask& task, int num_classes);
/// (tau, sin 2 pi tau, cos 2 pi tau, sin 4 pi tau); tau = t/T for DDPM, t for FM.
Eigen::Vector4d time_features(double tau);
/// Class count implied by a network's input width.
int classes_from_input_dim(const MlpParams<double>& net, const WorldDims& geometry);

/// Network inputs and regression targets, one column per sample.
struct TrainingBatch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
};

/// Stacks [x_t; cond; time features(tau)] column-wise.
Eigen::MatrixXd assemble_inputs(const Eigen::MatrixXd& xt, const Eigen::MatrixXd& cond,
                                const Eigen::VectorXd& taus);

struct BatchLoss {
  Eigen::VectorXd losses;   // L_i = ||out_i - target_i||^2 / dim
  MlpParams<double> grads;  // d(sum_i w_i L_i) / d params
};

BatchLoss weighted_mse(const MlpParams<double>& net, const TrainingBatch& batch, const Eigen::VectorXd& weights,
                       bool want_grads = true);

/// Forward half of weighted_mse, for callers whose weights depend on the losses.
struct DenoisingPass {
  MlpTrace<double> trace;
  Eigen::MatrixXd residual;  // output - target
  Eigen::VectorXd losses;
};

DenoisingPass denoising_forward(const MlpParams<double>& net, const TrainingBatch& batch);
MlpParams<double> denoising_backward(const MlpParams<double>& net, const DenoisingPass& pass,
                                     const Eigen::VectorXd& weights);

struct LossResult {
  double loss = 0.0;
  MlpParams<double> grads;
};

}  // namespace prefalign
