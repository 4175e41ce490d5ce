#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "prefalign/adam.hpp"
#include "prefalign/diffusion.hpp"
#include "prefalign/dpo.hpp"
#include "prefalign/error.hpp"
#include "prefalign/flowmatch.hpp"
#include "test_util.hpp"

using namespace prefalign;

namespace {

const WorldDims kDims{4, 4, 2};

DenoiserSpec small_spec(GeneratorTag tag, std::uint64_t seed = 17) {
  DenoiserSpec spec;
  spec.tag = tag;
  spec.dims = kDims;
  spec.hidden = {32};
  spec.timesteps = 6;
  spec.beta_start = 0.01;
  spec.beta_end = 0.2;
  spec.flow_steps = 4;
  spec.init_seed = seed;
  return spec;
}

Tensor normal_tensor(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::vector(rng.normal_vector(n));
}

// Randomly nudged copy so policy and reference differ.
Denoiser perturbed(const Denoiser& m, std::uint64_t seed, double scale) {
  Denoiser out = m;
  Rng rng(seed);
  for (auto& l : out.net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] += scale * rng.normal();
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] += scale * rng.normal();
  }
  return out;
}

PreferencePair random_pair(const InpaintTask& task, std::uint64_t seed) {
  PreferencePair p;
  p.task_id = task.task_id;
  p.preferred_idx = 0;
  p.dispreferred_idx = 1;
  p.preferred = testutil::random_image(kDims.width, kDims.height, seed);
  p.dispreferred = testutil::random_image(kDims.width, kDims.height, seed + 1);
  return p;
}

double inner_loss(const Denoiser& m, const InpaintTask& task, const Image& img, double t, const Tensor& eps) {
  const Tensor x0 = to_model_space(img);
  const Tensor e(eps.data, x0.shape);
  if (m.spec.tag == GeneratorTag::DDPM) return ddpm_loss(m.net, task, x0, static_cast<int>(t), e, m.schedule).loss;
  return fm_loss(m.net, task, x0, t, e).loss;
}

PreferenceDataset pair_set(GeneratorTag tag, int n, std::uint64_t seed) {
  PreferenceDataset ds = task_set(kDims, make_dataset(seed, kDims, n, 0.05));
  ds.header.generator = tag;
  ds.header.reward_name = "fidelity";
  ds.header.candidates_per_task = 2;
  for (const auto& t : ds.tasks) ds.pairs.push_back(random_pair(t, seed * 1000 + t.task_id * 2));
  return ds;
}

}  // namespace

TEST_CASE("scalar helpers") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(-1.0) == doctest::Approx(0.313261687518223).epsilon(1e-12));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  for (double x = -5; x <= 5; x += 0.5) CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0));
}

TEST_CASE("policy equal to reference gives ln 2 for any pair and beta") {
  for (auto tag : {GeneratorTag::DDPM, GeneratorTag::FM}) {
    const Denoiser m = make_denoiser(small_spec(tag));
    const auto tasks = make_dataset(1, kDims, 5, 0.05);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const double t = tag == GeneratorTag::DDPM ? 1.0 + static_cast<double>(i) : 0.1 + 0.2 * static_cast<double>(i);
      const double beta = std::pow(10.0, static_cast<double>(i));
      const auto r = dpo_pair_loss(m, m, random_pair(tasks[i], i), tasks[i], t, normal_tensor(48, i),
                                   normal_tensor(48, i + 50), beta);
      CHECK(std::abs(r.loss - std::log(2.0)) < 1e-12);
    }
  }
}

TEST_CASE("pair loss equals the scalar formula over independent inner losses") {
  for (auto tag : {GeneratorTag::DDPM, GeneratorTag::FM}) {
    const Denoiser ref = make_denoiser(small_spec(tag));
    const Denoiser pol = perturbed(ref, 3, 0.02);
    const auto task = make_dataset(2, kDims, 1, 0.05).front();
    const auto pair = random_pair(task, 9);
    const Tensor ew = normal_tensor(48, 1), el = normal_tensor(48, 2);
    const double t = tag == GeneratorTag::DDPM ? 3.0 : 0.4;
    const double dw = inner_loss(pol, task, pair.preferred, t, ew) - inner_loss(ref, task, pair.preferred, t, ew);
    const double dl = inner_loss(pol, task, pair.dispreferred, t, el) - inner_loss(ref, task, pair.dispreferred, t, el);
    REQUIRE(dw != dl);

    const double beta = 2000.0;
    const double expect = std::log1p(std::exp(beta * (dw - dl)));
    CHECK(dpo_pair_loss(pol, ref, pair, task, t, ew, el, beta).loss == doctest::Approx(expect).epsilon(1e-9));

    // choose beta so the sigmoid argument is exactly 1: loss = -log sigmoid(1)
    const double b1 = -1.0 / (dw - dl);
    if (b1 > 0) {
      CHECK(dpo_pair_loss(pol, ref, pair, task, t, ew, el, b1).loss == doctest::Approx(0.313262).epsilon(1e-6));
    } else {
      CHECK(dpo_pair_loss(pol, ref, pair, task, t, el, ew, -b1).loss != doctest::Approx(0.0));
    }
  }
}

TEST_CASE("worked example: beta 2000 and a -0.0005 preferred improvement") {
  // beta * ((-0.0005) - 0) = -1, loss = softplus(-1)
  CHECK(softplus(2000.0 * (-0.0005 - 0.0)) == doctest::Approx(0.313262).epsilon(1e-6));
}

TEST_CASE("loss decreases as the preferred improvement grows") {
  const Denoiser ref = make_denoiser(small_spec(GeneratorTag::DDPM));
  const Denoiser pol = perturbed(ref, 4, 0.02);
  const auto task = make_dataset(3, kDims, 1, 0.05).front();
  const auto pair = random_pair(task, 11);
  const Tensor ew = normal_tensor(48, 5), el = normal_tensor(48, 6);
  auto sign_of = [&] {
    return dpo_pair_loss(pol, ref, pair, task, 2.0, ew, el, 1.0).loss < std::log(2.0) ? 1.0 : -1.0;
  };
  // with the favourable sign, larger beta means a larger positive argument
  const double s = sign_of();
  double prev = std::numeric_limits<double>::infinity();
  for (double beta = 1.0; beta <= 1e5; beta *= 3.0) {
    const Tensor& a = s > 0 ? ew : el;
    const Tensor& b = s > 0 ? el : ew;
    const double l = dpo_pair_loss(pol, ref, pair, task, 2.0, a, b, beta).loss;
    CHECK(l < prev);
    prev = l;
  }
  double last = std::numeric_limits<double>::infinity();
  for (double z = -30; z <= 30; z += 0.25) {
    CHECK(softplus(-z) < last);
    last = softplus(-z);
  }
}

TEST_CASE("pair loss gradient matches central differences") {
  int configs = 0;
  for (auto tag : {GeneratorTag::DDPM, GeneratorTag::FM})
    for (std::uint64_t trial = 0; trial < 12; ++trial) {
      const Denoiser ref = make_denoiser(small_spec(tag, 40 + trial));
      const Denoiser pol = perturbed(ref, 60 + trial, 0.05);
      const auto task = make_dataset(trial, kDims, 1, 0.05).front();
      const auto pair = random_pair(task, 70 + trial);
      const Tensor ew = normal_tensor(48, 80 + trial), el = normal_tensor(48, 90 + trial);
      const double t = tag == GeneratorTag::DDPM ? 1.0 + static_cast<double>(trial % 6) : (trial + 0.5) / 12.0;
      const double beta = 20.0;
      const auto r = dpo_pair_loss(pol, ref, pair, task, t, ew, el, beta);
      Denoiser probe = pol;
      auto f = [&](const MlpParams<double>& p) {
        probe.net = p;
        return dpo_pair_loss(probe, ref, pair, task, t, ew, el, beta).loss;
      };
      CHECK(testutil::fd_check(pol.net, r.grads, f, 30, trial) < 1e-4);
      ++configs;
    }
  CHECK(configs >= 20);
}

TEST_CASE("one Adam step from the reference point lowers the pair loss") {
  for (auto tag : {GeneratorTag::DDPM, GeneratorTag::FM}) {
    const Denoiser ref = make_denoiser(small_spec(tag));
    const auto task = make_dataset(5, kDims, 1, 0.05).front();
    const auto pair = random_pair(task, 21);
    const Tensor ew = normal_tensor(48, 22), el = normal_tensor(48, 23);
    const double t = tag == GeneratorTag::DDPM ? 4.0 : 0.6;
    const auto r = dpo_pair_loss(ref, ref, pair, task, t, ew, el, 2000.0);
    Denoiser pol = ref;
    auto adam = AdamState<double>::for_params(pol.net, 1e-5);
    adam_step(adam, pol.net, r.grads);
    CHECK(dpo_pair_loss(pol, ref, pair, task, t, ew, el, 2000.0).loss < r.loss);
  }
}

TEST_CASE("generator mismatch between policy and reference") {
  const Denoiser d = make_denoiser(small_spec(GeneratorTag::DDPM));
  const Denoiser f = make_denoiser(small_spec(GeneratorTag::FM));
  const auto task = make_dataset(5, kDims, 1, 0.05).front();
  try {
    dpo_pair_loss(d, f, random_pair(task, 1), task, 0.5, normal_tensor(48, 1), normal_tensor(48, 2), 1.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.category() == "tag-mismatch");
  }
}

TEST_CASE("training loop contract") {
  for (auto tag : {GeneratorTag::DDPM, GeneratorTag::FM}) {
    Checkpoint pre;
    pre.model = make_denoiser(small_spec(tag));
    round_to_storage(pre.model.net);
    const Checkpoint before = pre;
    const auto data = pair_set(tag, 12, 3);

    DpoConfig cfg;
    cfg.steps = 0;
    const auto zero = train_dpo(pre, data, cfg);
    CHECK(zero.checkpoint.model.net == pre.model.net);
    CHECK(zero.trace.empty());

    cfg.steps = 15;
    cfg.batch = 4;
    cfg.seed = 9;
    const auto a = train_dpo(pre, data, cfg, {0, 5, 15});
    const auto b = train_dpo(pre, data, cfg);
    CHECK(a.checkpoint.model.net == b.checkpoint.model.net);
    CHECK(a.checkpoint.step == 15);
    CHECK(a.trace.size() == 15);
    CHECK(a.trace.front().loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_FALSE(a.checkpoint.model.net == pre.model.net);
    REQUIRE(a.snapshots.size() == 3);
    CHECK(a.snapshots[0].model.net == pre.model.net);
    CHECK(a.snapshots[2].model.net == a.checkpoint.model.net);
    CHECK(pre.model.net == before.model.net);

    cfg.seed = 10;
    CHECK_FALSE(train_dpo(pre, data, cfg).checkpoint.model.net == a.checkpoint.model.net);

  }
}

TEST_CASE("training errors") {
  Checkpoint pre;
  pre.model = make_denoiser(small_spec(GeneratorTag::DDPM));
  DpoConfig cfg;
  cfg.steps = 3;
  try {
    train_dpo(pre, pair_set(GeneratorTag::FM, 4, 1), cfg);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.category() == "tag-mismatch");
  }

  auto bad = pre;
  bad.model.net.layers.back().bias[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train_dpo(bad, pair_set(GeneratorTag::DDPM, 4, 1), cfg);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.category() == "non-finite");
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }

  cfg.beta = 0.0;
  CHECK_THROWS_AS(train_dpo(pre, pair_set(GeneratorTag::DDPM, 4, 1), cfg), Error);
}

TEST_CASE("pretraining contract") {
  const auto tasks = make_dataset(1, kDims, 32, 0.05);
  for (auto tag : {GeneratorTag::DDPM, GeneratorTag::FM}) {
    const auto spec = small_spec(tag);
    SftConfig cfg;
    cfg.steps = 0;
    CHECK(pretrain_sft(tasks, spec, cfg).checkpoint.model.net == make_denoiser(spec).net);

    cfg.steps = 600;
    cfg.seed = 4;
    const auto a = pretrain_sft(tasks, spec, cfg);
    CHECK(a.checkpoint.model.net == pretrain_sft(tasks, spec, cfg).checkpoint.model.net);
    REQUIRE(a.trace.size() == 600);
    double prev = std::numeric_limits<double>::infinity();
    for (int w = 0; w < 6; ++w) {
      double mean = 0.0;
      for (int i = 0; i < 100; ++i) mean += a.trace[static_cast<std::size_t>(100 * w + i)].loss / 100.0;
      CHECK(mean <= prev);
      prev = mean;
    }
  }
  CHECK_THROWS_AS(pretrain_sft({}, small_spec(GeneratorTag::DDPM), SftConfig{}), Error);
}
