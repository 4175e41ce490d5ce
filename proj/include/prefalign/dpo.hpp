#pragma once

#include <cstdint>
#include <vector>

#include "prefalign/checkpoint.hpp"
#include "prefalign/csv.hpp"
#include "prefalign/prefdata.hpp"
#include "prefalign/tensor.hpp"

namespace prefalign {

struct DpoConfig {
  double beta = 2000.0;
  double lr = 1e-6;  // larger steps overfit the toy FM generator; the large-model preset uses 1e-7
  int steps = 2000;
  int batch = 8;     // pairs per step
  std::uint64_t seed = 0;
};

struct SftConfig {
  int steps = 2000;
  double lr = 1e-3;
  int batch = 32;
  std::uint64_t seed = 0;
};

struct TracePoint {
  std::int64_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TracePoint> trace;
  std::vector<Checkpoint> snapshots;  // one per requested snapshot step, in order
};

/// -log sigmoid(-beta * ((L_theta^w - L_ref^w) - (L_theta^l - L_ref^l))) for
/// one pair, with the model's own denoising loss as L. The time draw is shared
/// by all four inner losses; eps_w and eps_l are the per-image noises.
/// Gradients are w.r.t. the policy only.
LossResult dpo_pair_loss(const Denoiser& policy, const Denoiser& reference, const PreferencePair& pair,
                         const InpaintTask& task, double t, const Tensor& eps_w, const Tensor& eps_l, double beta);

/// Batched form: columns of x_w/x_l/eps_w/eps_l are pairs sharing cond[:, i]
/// and time t[i]. Returns the mean loss over pairs and its gradient.
LossResult dpo_batch_loss(const Denoiser& policy, const Denoiser& reference, const Eigen::MatrixXd& x_w,
                          const Eigen::MatrixXd& x_l, const Eigen::MatrixXd& cond, const Eigen::VectorXd& t,
                          const Eigen::MatrixXd& eps_w, const Eigen::MatrixXd& eps_l, double beta);

/// DPO fine-tuning against a frozen copy of `pretrained`. Snapshots are taken
/// after the listed step counts (0 = before any update).
TrainResult train_dpo(const Checkpoint& pretrained, const PreferenceDataset& dataset, const DpoConfig& config,
                      const std::vector<int>& snapshot_steps = {});

/// Supervised pretraining on the denoising objective of spec.tag.
TrainResult pretrain_sft(const std::vector<InpaintTask>& tasks, const DenoiserSpec& spec, const SftConfig& config);

/// step,loss rows.
CsvTable trace_csv(const std::vector<TracePoint>& trace);

/// Numerically stable log(1 + exp(x)).
double softplus(double x);
/// Numerically stable 1 / (1 + exp(-x)).
double sigmoid(double x);

}  // namespace prefalign
