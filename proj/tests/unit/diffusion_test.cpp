#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "prefalign/diffusion.hpp"
#include "prefalign/error.hpp"
#include "test_util.hpp"

using namespace prefalign;

namespace {

Denoiser tiny_ddpm(int timesteps = 5, std::uint64_t seed = 17) {
  DenoiserSpec spec;
  spec.tag = GeneratorTag::DDPM;
  spec.dims = {4, 4, 2};
  spec.hidden = {64};  // wide enough for batch-size independent GEMM results
  spec.timesteps = timesteps;
  spec.beta_start = 0.01;
  spec.beta_end = 0.2;
  spec.init_seed = seed;
  return make_denoiser(spec);
}

Tensor normal_tensor(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::vector(rng.normal_vector(n));
}

}  // namespace

TEST_CASE("schedule invariants") {
  for (int steps : {1, 2, 50, 200}) {
    const auto s = NoiseSchedule::linear(steps, 1e-4, 0.02);
    CHECK(s.alpha_bar(0) == 1.0);
    for (int t = 1; t <= steps; ++t) {
      CHECK(s.beta(t) > 0.0);
      CHECK(s.beta(t) < 1.0);
      if (t > 1) CHECK(s.beta(t) > s.beta(t - 1));
      CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
      CHECK(s.alpha_bar(t) > 0.0);
    }
  }
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.02), Error);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.1, 0.02), Error);
}

TEST_CASE("default schedule matches a direct cumulative product") {
  const auto s = NoiseSchedule::linear(50, 1e-4, 0.02);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-15));
  double prod = 1.0;
  for (int t = 1; t <= 50; ++t) {
    prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 49.0);
    CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-13));
  }

  const Tensor x0 = normal_tensor(12, 1), eps = normal_tensor(12, 2);
  const Tensor x1 = forward_diffuse(x0, 1, eps, s);
  for (Eigen::Index i = 0; i < 12; ++i)
    CHECK(x1.data[i] == doctest::Approx(std::sqrt(0.9999) * x0.data[i] + std::sqrt(1e-4) * eps.data[i]));
}

TEST_CASE("forward_diffuse endpoints and range checks") {
  const Tensor x0 = normal_tensor(10, 3), eps = normal_tensor(10, 4);
  const auto s = NoiseSchedule::linear(50, 1e-4, 0.02);
  CHECK(forward_diffuse(x0, 0, eps, s).data == x0.data);

  // alpha_bar close to 0 at the end of an aggressive schedule
  const auto harsh = NoiseSchedule::linear(400, 0.05, 0.5);
  CHECK((forward_diffuse(x0, 400, eps, harsh).data - eps.data).cwiseAbs().maxCoeff() < 1e-9);

  CHECK_THROWS_AS(forward_diffuse(x0, 51, eps, s), Error);
  CHECK_THROWS_AS(forward_diffuse(x0, -1, eps, s), Error);
}

TEST_CASE("ddpm loss is zero for a perfect predictor and mean(eps^2) for zero") {
  Denoiser m = tiny_ddpm();
  const auto task = make_dataset(1, m.spec.dims, 1, 0.05).front();
  const Tensor x0 = to_model_space(task.source);

  Rng rng(5);
  double total = 0.0;
  const int draws = 1000;
  MlpParams<double> zero = m.net.zeros_like();
  for (int i = 0; i < draws; ++i) {
    const Tensor eps = Tensor(rng.normal_vector(x0.size()), x0.shape);
    const int t = 1 + static_cast<int>(rng.below(5));
    const auto r = ddpm_loss(zero, task, x0, t, eps, m.schedule);
    CHECK(r.loss == doctest::Approx(eps.data.squaredNorm() / eps.size()).epsilon(1e-12));
    total += r.loss;
  }
  CHECK(std::abs(total / draws - 1.0) < 0.1);

  const Tensor eps = normal_tensor(x0.size(), 6);
  MlpParams<double> perfect = m.net.zeros_like();
  perfect.layers.back().bias = eps.data;
  CHECK(ddpm_loss(perfect, task, x0, 3, eps, m.schedule).loss == doctest::Approx(0.0).epsilon(1e-30));
}

TEST_CASE("ddpm loss gradient matches central differences") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Denoiser m = tiny_ddpm(5, 100 + trial);
    const auto task = make_dataset(trial, m.spec.dims, 1, 0.05).front();
    const Tensor x0 = to_model_space(task.source);
    const Tensor eps = normal_tensor(x0.size(), 200 + trial);
    const int t = 1 + static_cast<int>(trial % 5);
    const auto r = ddpm_loss(m.net, task, x0, t, eps, m.schedule);
    auto f = [&](const MlpParams<double>& p) { return ddpm_loss(p, task, x0, t, eps, m.schedule).loss; };
    CHECK(testutil::fd_check(m.net, r.grads, f, 30, trial) < 1e-4);
  }
}

TEST_CASE("marginal statistics of forward_diffuse") {
  const auto s = NoiseSchedule::linear(50, 1e-4, 0.02);
  const Tensor x0 = normal_tensor(3, 7);
  const int t = 30;
  const double a = s.alpha_bar(t);
  Rng rng(8);
  const int n = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3), sq = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < n; ++i) {
    const Tensor xt = forward_diffuse(x0, t, Tensor::vector(rng.normal_vector(3)), s);
    sum += xt.data;
    sq += xt.data.cwiseProduct(xt.data);
  }
  const double sd = std::sqrt(1.0 - a);
  for (int i = 0; i < 3; ++i) {
    const double mean = sum[i] / n;
    const double var = sq[i] / n - mean * mean;
    CHECK(std::abs(mean - std::sqrt(a) * x0.data[i]) < 3 * sd / std::sqrt(n));
    // SE of the sample std for a normal is sd / sqrt(2n)
    CHECK(std::abs(std::sqrt(var) - sd) < 3 * sd / std::sqrt(2.0 * n));
  }
}

TEST_CASE("sampler is deterministic, blended and in range") {
  Denoiser m = tiny_ddpm();
  const auto tasks = make_dataset(2, m.spec.dims, 6, 0.05);
  std::vector<SampleRequest> reqs;
  for (const auto& t : tasks) reqs.push_back({&t, 40 + t.task_id});
  const auto a = ddpm_sample_batch(m, reqs);
  const auto b = ddpm_sample_batch(m, reqs);
  REQUIRE(a.size() == tasks.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].data.minCoeff() >= 0.0);
    CHECK(a[i].data.maxCoeff() <= 1.0);
    for (Eigen::Index p = 0; p < a[i].pixels(); ++p)
      if (tasks[i].mask.data[p] == 0.0) CHECK(a[i].pixel(p) == tasks[i].source.pixel(p));
  }
  CHECK(ddpm_sample(m, tasks[0], 40) == a[0]);
  CHECK_FALSE(ddpm_sample(m, tasks[0], 41) == a[0]);
}

TEST_CASE("single-step schedule matches a hand-unrolled denoise") {
  Denoiser m = tiny_ddpm(1);
  const auto task = make_dataset(3, m.spec.dims, 1, 0.05).front();
  const std::uint64_t seed = 77;

  Rng rng(seed);
  const Eigen::VectorXd x1 = rng.normal_vector(m.spec.dims.image_size());
  const int K = m.spec.dims.num_classes;
  Eigen::VectorXd input(denoiser_input_dim(m.spec.dims));
  input << x1, task_condition(task, K), time_features(1.0);
  const Eigen::VectorXd eps_hat = mlp_forward(m.net, Tensor::vector(input)).data;
  const double a = 1.0 - m.schedule.beta(1);
  const Eigen::VectorXd x0 = ((x1 - std::sqrt(1.0 - a) * eps_hat) / std::sqrt(a)).cwiseMax(-1.0).cwiseMin(1.0);
  const Image expect = blend(from_model_space(Tensor::vector(x0), 4, 4), task.source, task.mask);

  const Image got = ddpm_sample(m, task, seed);
  CHECK((got.data - expect.data).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sampler aborts on non-finite state with the step") {
  Denoiser m = tiny_ddpm();
  m.net.layers.back().bias[0] = std::numeric_limits<double>::quiet_NaN();
  const auto task = make_dataset(3, m.spec.dims, 1, 0.05).front();
  try {
    ddpm_sample(m, task, 1);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.category() == "non-finite");
    CHECK(std::string(e.what()).find("step 5") != std::string::npos);
  }
}

TEST_CASE("time features") {
  const Eigen::Vector4d f = time_features(0.25);
  CHECK(f[0] == 0.25);
  CHECK(f[1] == doctest::Approx(1.0));
  CHECK(f[2] == doctest::Approx(0.0));
  CHECK(f[3] == doctest::Approx(0.0));
}
