#include "prefalign/diffusion.hpp"

#include <cmath>
#include <string>

#include "prefalign/error.hpp"
#include "prefalign/parallel.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
  require(t >= 0 && t <= sched.steps(), "invalid-timestep",
          "timestep " + std::to_string(t) + " outside [0," + std::to_string(sched.steps()) + "]");
  require(x0.size() == eps.size(), "shape-mismatch", "x0 and eps differ in length");
  const double a = sched.alpha_bar(t);
  return Tensor(std::sqrt(a) * x0.data + std::sqrt(1.0 - a) * eps.data, x0.shape);
}

TrainingBatch ddpm_training_batch(const NoiseSchedule& sched, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& cond,
                                  const Eigen::VectorXd& t, const Eigen::MatrixXd& eps) {
  require(x0.rows() == eps.rows() && x0.cols() == eps.cols() && t.size() == x0.cols(), "shape-mismatch",
          "x0, eps and timestep batches differ in size");
  Eigen::MatrixXd xt(x0.rows(), x0.cols());
  Eigen::VectorXd taus(t.size());
  for (Eigen::Index j = 0; j < x0.cols(); ++j) {
    const int step = static_cast<int>(t[j]);
    require(step >= 1 && step <= sched.steps(), "invalid-timestep",
            "timestep " + std::to_string(step) + " outside [1," + std::to_string(sched.steps()) + "]");
    const double a = sched.alpha_bar(step);
    xt.col(j) = std::sqrt(a) * x0.col(j) + std::sqrt(1.0 - a) * eps.col(j);
    taus[j] = static_cast<double>(step) / sched.steps();
  }
  return {assemble_inputs(xt, cond, taus), eps};
}

LossResult ddpm_loss(const MlpParams<double>& params, const InpaintTask& task, const Tensor& x0, int t,
                     const Tensor& eps, const NoiseSchedule& sched) {
  const WorldDims geometry{task.source.width, task.source.height, 2};
  const int k = classes_from_input_dim(params, geometry);
  const auto batch = ddpm_training_batch(sched, x0.data, task_condition(task, k), Eigen::VectorXd::Constant(1, t),
                                         eps.data);
  auto loss = weighted_mse(params, batch, Eigen::VectorXd::Ones(1));
  return {loss.losses[0], std::move(loss.grads)};
}

namespace detail {

Eigen::MatrixXd stack_conditions(std::span<const SampleRequest> requests, int num_classes) {
  Eigen::MatrixXd cond;
  for (std::size_t j = 0; j < requests.size(); ++j) {
    Eigen::VectorXd c = task_condition(*requests[j].task, num_classes);
    if (j == 0) cond.resize(c.size(), static_cast<Eigen::Index>(requests.size()));
    cond.col(static_cast<Eigen::Index>(j)) = c;
  }
  return cond;
}

std::vector<Image> finish_samples(std::span<const SampleRequest> requests, const Eigen::MatrixXd& x, int width,
                                  int height) {
  std::vector<Image> out;
  out.reserve(requests.size());
  for (std::size_t j = 0; j < requests.size(); ++j) {
    const Image generated =
        from_model_space(Tensor::vector(x.col(static_cast<Eigen::Index>(j))), width, height);
    out.push_back(blend(generated, requests[j].task->source, requests[j].task->mask));
  }
  return out;
}

}  // namespace detail

namespace {

std::vector<Image> ddpm_sample_chunk(const Denoiser& model, std::span<const SampleRequest> requests) {
  const auto& dims = model.spec.dims;
  const auto& sched = model.schedule;
  const Eigen::Index n = static_cast<Eigen::Index>(requests.size());
  const Eigen::Index d = dims.image_size();
  const Eigen::MatrixXd cond = detail::stack_conditions(requests, dims.num_classes);

  std::vector<Rng> rngs;
  rngs.reserve(requests.size());
  Eigen::MatrixXd x(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    rngs.emplace_back(requests[static_cast<std::size_t>(j)].seed);
    auto col = x.col(j);
    rngs.back().fill_normal(col);
  }

  for (int t = sched.steps(); t >= 1; --t) {
    const double abar = sched.alpha_bar(t);
    const double abar_prev = sched.alpha_bar(t - 1);
    const double beta = sched.beta(t);
    const double coef_x0 = std::sqrt(abar_prev) * beta / (1.0 - abar);
    const double coef_xt = std::sqrt(1.0 - beta) * (1.0 - abar_prev) / (1.0 - abar);
    const double sigma = std::sqrt(beta);

    const Eigen::VectorXd taus = Eigen::VectorXd::Constant(n, static_cast<double>(t) / sched.steps());
    const auto trace = mlp_forward_batch(model.net, assemble_inputs(x, cond, taus));
    const Eigen::MatrixXd x0_hat =
        ((x - std::sqrt(1.0 - abar) * trace.output()) / std::sqrt(abar)).cwiseMax(-1.0).cwiseMin(1.0);
    x = coef_x0 * x0_hat + coef_xt * x;
    if (t > 1)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < d; ++i) x(i, j) += sigma * rngs[static_cast<std::size_t>(j)].normal();
    if (!x.allFinite()) fail("non-finite", "ddpm sampler state became non-finite at step " + std::to_string(t));
  }
  return detail::finish_samples(requests, x, dims.width, dims.height);
}

}  // namespace

std::vector<Image> ddpm_sample_batch(const Denoiser& model, std::span<const SampleRequest> requests) {
  const std::size_t chunks = (requests.size() + detail::kSampleChunk - 1) / detail::kSampleChunk;
  std::vector<std::vector<Image>> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * detail::kSampleChunk;
    const std::size_t len = std::min(detail::kSampleChunk, requests.size() - begin);
    parts[c] = ddpm_sample_chunk(model, requests.subspan(begin, len));
  });
  std::vector<Image> out;
  out.reserve(requests.size());
  for (auto& p : parts)
    for (auto& img : p) out.push_back(std::move(img));
  return out;
}

Image ddpm_sample(const Denoiser& model, const InpaintTask& task, std::uint64_t seed) {
  const SampleRequest req{&task, seed};
  return ddpm_sample_batch(model, std::span<const SampleRequest>(&req, 1)).front();
}

}  // namespace prefalign
