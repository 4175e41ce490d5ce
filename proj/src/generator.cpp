#include "prefalign/generator.hpp"

namespace prefalign {

std::vector<Image> sample_images(const Denoiser& model, std::span<const SampleRequest> requests, int flow_steps) {
  if (model.spec.tag == GeneratorTag::DDPM) return ddpm_sample_batch(model, requests);
  return fm_sample_batch(model, requests, flow_steps > 0 ? flow_steps : model.spec.flow_steps);
}

double draw_time(const Denoiser& model, Rng& rng) {
  if (model.spec.tag == GeneratorTag::DDPM)
    return 1.0 + static_cast<double>(rng.below(static_cast<std::uint64_t>(model.schedule.steps())));
  return rng.uniform();
}

TrainingBatch training_batch(const Denoiser& model, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& cond,
                             const Eigen::VectorXd& t, const Eigen::MatrixXd& eps) {
  if (model.spec.tag == GeneratorTag::DDPM) return ddpm_training_batch(model.schedule, x0, cond, t, eps);
  return fm_training_batch(x0, cond, t, eps);
}

}  // namespace prefalign
