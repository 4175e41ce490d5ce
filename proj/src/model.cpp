#include "prefalign/model.hpp"

#include <cmath>

#include "prefalign/error.hpp"

namespace prefalign {

std::string to_string(GeneratorTag tag) { return tag == GeneratorTag::DDPM ? "ddpm" : "fm"; }

GeneratorTag parse_generator_tag(const std::string& text) {
  if (text == "ddpm" || text == "DDPM") return GeneratorTag::DDPM;
  if (text == "fm" || text == "FM") return GeneratorTag::FM;
  fail("invalid-config", "unknown generator '" + text + "' (expected ddpm or fm)");
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  require(steps >= 1, "invalid-config", "schedule needs at least one step");
  require(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end, "invalid-config",
          "betas must satisfy 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.betas.resize(steps);
  for (int t = 0; t < steps; ++t)
    s.betas[t] = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / (steps - 1);
  s.alpha_bars.resize(steps);
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    prod *= 1.0 - s.betas[t];
    s.alpha_bars[t] = prod;
  }
  return s;
}

Denoiser make_denoiser(const DenoiserSpec& spec) {
  Denoiser d;
  d.spec = spec;
  d.schedule = NoiseSchedule::linear(spec.timesteps, spec.beta_start, spec.beta_end);
  require(spec.flow_steps >= 1, "invalid-config", "flow_steps must be >= 1");
  d.net = init_mlp<double>(denoiser_input_dim(spec.dims), spec.hidden, spec.dims.image_size(), spec.init_seed);
  return d;
}

Eigen::Index denoiser_input_dim(const WorldDims& dims) {
  return 2 * dims.image_size() + dims.pixels() + dims.num_classes + 4;
}

Eigen::VectorXd task_condition(const InpaintTask& task, int num_classes) {
  const Image view = masked_view(task);
  const Eigen::Index n = view.data.size();
  const Eigen::Index p = task.mask.data.size();
  Eigen::VectorXd cond = Eigen::VectorXd::Zero(n + p + num_classes);
  cond.head(n) = view.data.array() * 2.0 - 1.0;
  cond.segment(n, p) = task.mask.data;
  require(task.label < static_cast<std::uint32_t>(num_classes), "invalid-task",
          "task " + std::to_string(task.task_id) + " label out of range");
  cond[n + p + task.label] = 1.0;
  return cond;
}

Eigen::Vector4d time_features(double tau) {
  return {tau, std::sin(2.0 * M_PI * tau), std::cos(2.0 * M_PI * tau), std::sin(4.0 * M_PI * tau)};
}

int classes_from_input_dim(const MlpParams<double>& net, const WorldDims& geometry) {
  const Eigen::Index k = net.input_dim() - 2 * geometry.image_size() - geometry.pixels() - 4;
  require(k >= 2, "shape-mismatch", "network input width does not fit the image geometry");
  return static_cast<int>(k);
}

Eigen::MatrixXd assemble_inputs(const Eigen::MatrixXd& xt, const Eigen::MatrixXd& cond,
                                const Eigen::VectorXd& taus) {
  require(xt.cols() == cond.cols() && xt.cols() == taus.size(), "shape-mismatch",
          "x_t, condition and time batches differ in size");
  Eigen::MatrixXd in(xt.rows() + cond.rows() + 4, xt.cols());
  in.topRows(xt.rows()) = xt;
  in.middleRows(xt.rows(), cond.rows()) = cond;
  for (Eigen::Index j = 0; j < xt.cols(); ++j) in.col(j).tail<4>() = time_features(taus[j]);
  return in;
}

DenoisingPass denoising_forward(const MlpParams<double>& net, const TrainingBatch& batch) {
  require(batch.targets.rows() == net.output_dim() && batch.targets.cols() == batch.inputs.cols(), "shape-mismatch",
          "training batch does not match the network");
  DenoisingPass pass;
  pass.trace = mlp_forward_batch(net, batch.inputs);
  pass.residual = pass.trace.output() - batch.targets;
  pass.losses = pass.residual.colwise().squaredNorm().transpose() / static_cast<double>(pass.residual.rows());
  if (!pass.losses.allFinite()) fail("non-finite", "denoising loss is not finite");
  return pass;
}

MlpParams<double> denoising_backward(const MlpParams<double>& net, const DenoisingPass& pass,
                                     const Eigen::VectorXd& weights) {
  require(weights.size() == pass.residual.cols(), "shape-mismatch", "one loss weight per sample is required");
  const double scale = 2.0 / static_cast<double>(pass.residual.rows());
  const Eigen::MatrixXd upstream = pass.residual * (weights * scale).asDiagonal();
  return std::move(mlp_backward_batch(net, pass.trace, upstream, false).params);
}

BatchLoss weighted_mse(const MlpParams<double>& net, const TrainingBatch& batch, const Eigen::VectorXd& weights,
                       bool want_grads) {
  require(weights.size() == batch.inputs.cols(), "shape-mismatch", "one loss weight per sample is required");
  DenoisingPass pass = denoising_forward(net, batch);
  BatchLoss out;
  if (want_grads) out.grads = denoising_backward(net, pass, weights);
  out.losses = std::move(pass.losses);
  return out;
}

}  // namespace prefalign
