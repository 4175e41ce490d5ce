#include "prefalign/flowmatch.hpp"

#include <string>

#include "prefalign/error.hpp"
#include "prefalign/parallel.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

Tensor fm_interpolate(const Tensor& x0, const Tensor& eps, double t) {
  require(t >= 0.0 && t <= 1.0, "invalid-timestep", "flow time " + std::to_string(t) + " outside [0,1]");
  require(x0.size() == eps.size(), "shape-mismatch", "x0 and eps differ in length");
  return Tensor((1.0 - t) * x0.data + t * eps.data, x0.shape);
}

TrainingBatch fm_training_batch(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& cond, const Eigen::VectorXd& t,
                                const Eigen::MatrixXd& eps) {
  require(x0.rows() == eps.rows() && x0.cols() == eps.cols() && t.size() == x0.cols(), "shape-mismatch",
          "x0, eps and time batches differ in size");
  require((t.array() >= 0.0).all() && (t.array() <= 1.0).all(), "invalid-timestep", "flow time outside [0,1]");
  Eigen::MatrixXd xt(x0.rows(), x0.cols());
  for (Eigen::Index j = 0; j < x0.cols(); ++j) xt.col(j) = (1.0 - t[j]) * x0.col(j) + t[j] * eps.col(j);
  return {assemble_inputs(xt, cond, t), eps - x0};
}

LossResult fm_loss(const MlpParams<double>& params, const InpaintTask& task, const Tensor& x0, double t,
                   const Tensor& eps) {
  const WorldDims geometry{task.source.width, task.source.height, 2};
  const int k = classes_from_input_dim(params, geometry);
  const auto batch = fm_training_batch(x0.data, task_condition(task, k), Eigen::VectorXd::Constant(1, t), eps.data);
  auto loss = weighted_mse(params, batch, Eigen::VectorXd::Ones(1));
  return {loss.losses[0], std::move(loss.grads)};
}

Eigen::MatrixXd euler_integrate(const VelocityField& velocity, Eigen::MatrixXd x, int steps) {
  require(steps >= 1, "invalid-config", "Euler integration needs at least one step");
  const double dt = 1.0 / steps;
  for (int s = steps; s >= 1; --s) {
    x -= dt * velocity(x, static_cast<double>(s) / steps);
    if (!x.allFinite())
      fail("non-finite", "flow sampler state became non-finite at step " + std::to_string(steps - s + 1));
  }
  return x;
}

namespace {

std::vector<Image> fm_sample_chunk(const Denoiser& model, std::span<const SampleRequest> requests, int steps) {
  const auto& dims = model.spec.dims;
  const Eigen::Index n = static_cast<Eigen::Index>(requests.size());
  const Eigen::MatrixXd cond = detail::stack_conditions(requests, dims.num_classes);
  Eigen::MatrixXd x(dims.image_size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Rng rng(requests[static_cast<std::size_t>(j)].seed);
    auto col = x.col(j);
    rng.fill_normal(col);
  }
  const VelocityField field = [&](const Eigen::MatrixXd& state, double t) {
    return mlp_forward_batch(model.net, assemble_inputs(state, cond, Eigen::VectorXd::Constant(n, t))).output();
  };
  x = euler_integrate(field, std::move(x), steps);
  return detail::finish_samples(requests, x, dims.width, dims.height);
}

}  // namespace

std::vector<Image> fm_sample_batch(const Denoiser& model, std::span<const SampleRequest> requests, int steps) {
  require(steps >= 1, "invalid-config", "flow sampler needs at least one step");
  const std::size_t chunks = (requests.size() + detail::kSampleChunk - 1) / detail::kSampleChunk;
  std::vector<std::vector<Image>> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * detail::kSampleChunk;
    const std::size_t len = std::min(detail::kSampleChunk, requests.size() - begin);
    parts[c] = fm_sample_chunk(model, requests.subspan(begin, len), steps);
  });
  std::vector<Image> out;
  out.reserve(requests.size());
  for (auto& p : parts)
    for (auto& img : p) out.push_back(std::move(img));
  return out;
}

Image fm_sample(const Denoiser& model, const InpaintTask& task, int steps, std::uint64_t seed) {
  const SampleRequest req{&task, seed};
  return fm_sample_batch(model, std::span<const SampleRequest>(&req, 1), steps).front();
}

}  // namespace prefalign
