#include "prefalign/dpo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "prefalign/adam.hpp"
#include "prefalign/csv.hpp"
#include "prefalign/error.hpp"
#include "prefalign/generator.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LossResult dpo_batch_loss(const Denoiser& policy, const Denoiser& reference, const Eigen::MatrixXd& x_w,
                          const Eigen::MatrixXd& x_l, const Eigen::MatrixXd& cond, const Eigen::VectorXd& t,
                          const Eigen::MatrixXd& eps_w, const Eigen::MatrixXd& eps_l, double beta) {
  require(policy.spec.tag == reference.spec.tag, "tag-mismatch", "policy and reference use different generators");
  require(beta > 0.0, "invalid-config", "beta must be positive");
  const Eigen::Index b = x_w.cols();
  require(x_l.cols() == b && cond.cols() == b && t.size() == b && eps_w.cols() == b && eps_l.cols() == b,
          "shape-mismatch", "DPO batch components differ in size");

  // Columns [0, b) are preferred images, [b, 2b) dispreferred.
  Eigen::MatrixXd x0(x_w.rows(), 2 * b), c2(cond.rows(), 2 * b), eps(x_w.rows(), 2 * b);
  x0 << x_w, x_l;
  c2 << cond, cond;
  eps << eps_w, eps_l;
  Eigen::VectorXd t2(2 * b);
  t2 << t, t;
  const TrainingBatch batch = training_batch(policy, x0, c2, t2, eps);

  const BatchLoss ref = weighted_mse(reference.net, batch, Eigen::VectorXd::Zero(2 * b), false);
  const DenoisingPass pass = denoising_forward(policy.net, batch);

  Eigen::VectorXd weights(2 * b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double dw = pass.losses[i] - ref.losses[i];
    const double dl = pass.losses[b + i] - ref.losses[b + i];
    const double z = -beta * (dw - dl);
    total += softplus(-z);
    // dL/dL_theta^w = beta * sigmoid(-z), dL/dL_theta^l = -beta * sigmoid(-z)
    const double g = beta * sigmoid(-z) / static_cast<double>(b);
    weights[i] = g;
    weights[b + i] = -g;
  }
  const double loss = total / static_cast<double>(b);
  if (!std::isfinite(loss)) fail("non-finite", "DPO loss is not finite");

  return {loss, denoising_backward(policy.net, pass, weights)};
}

LossResult dpo_pair_loss(const Denoiser& policy, const Denoiser& reference, const PreferencePair& pair,
                         const InpaintTask& task, double t, const Tensor& eps_w, const Tensor& eps_l, double beta) {
  const auto x_w = to_model_space(pair.preferred);
  const auto x_l = to_model_space(pair.dispreferred);
  return dpo_batch_loss(policy, reference, x_w.data, x_l.data, task_condition(task, policy.spec.dims.num_classes),
                        Eigen::VectorXd::Constant(1, t), eps_w.data, eps_l.data, beta);
}

namespace {

std::uint64_t hash_double(double v) { return std::bit_cast<std::uint64_t>(v); }

void snapshot_if_requested(const std::vector<int>& steps, int done, const Checkpoint& current,
                           std::vector<Checkpoint>& out) {
  for (int s : steps)
    if (s == done) out.push_back(current);
}

}  // namespace

TrainResult train_dpo(const Checkpoint& pretrained, const PreferenceDataset& dataset, const DpoConfig& config,
                      const std::vector<int>& snapshot_steps) {
  const auto& spec = pretrained.model.spec;
  if (!dataset.header.generator || *dataset.header.generator != spec.tag)
    fail("tag-mismatch", "dataset generator '" +
                             (dataset.header.generator ? to_string(*dataset.header.generator) : std::string("none")) +
                             "' does not match checkpoint generator '" + to_string(spec.tag) + "'");
  require(dataset.header.dims == spec.dims, "shape-mismatch", "dataset geometry differs from the checkpoint");
  require(config.beta > 0.0, "invalid-config", "beta must be positive");
  require(config.steps >= 0 && config.batch >= 1, "invalid-config", "steps must be >= 0 and batch >= 1");
  require(config.steps == 0 || !dataset.pairs.empty(), "invalid-input", "dataset has no preference pairs");

  const Denoiser reference = pretrained.model;
  TrainResult result;
  result.checkpoint = pretrained;
  result.checkpoint.config_hash = stable_hash({pretrained.config_hash, hash_double(config.beta),
                                               hash_double(config.lr), static_cast<std::uint64_t>(config.steps),
                                               static_cast<std::uint64_t>(config.batch), config.seed});
  result.checkpoint.step = 0;
  snapshot_if_requested(snapshot_steps, 0, result.checkpoint, result.snapshots);
  if (config.steps == 0) return result;

  Denoiser& policy = result.checkpoint.model;
  const Eigen::Index d = spec.dims.image_size();
  const std::size_t n_pairs = dataset.pairs.size();

  Eigen::MatrixXd all_w(d, static_cast<Eigen::Index>(n_pairs)), all_l(d, static_cast<Eigen::Index>(n_pairs));
  Eigen::MatrixXd all_cond;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const auto& p = dataset.pairs[i];
    const auto col = static_cast<Eigen::Index>(i);
    all_w.col(col) = to_model_space(p.preferred).data;
    all_l.col(col) = to_model_space(p.dispreferred).data;
    Eigen::VectorXd c = task_condition(dataset.task(p.task_id), spec.dims.num_classes);
    if (i == 0) all_cond.resize(c.size(), static_cast<Eigen::Index>(n_pairs));
    all_cond.col(col) = c;
  }

  Rng rng(config.seed);
  auto adam = AdamState<double>::for_params(policy.net, config.lr);
  std::vector<std::size_t> order(n_pairs);
  std::size_t cursor = n_pairs;
  const Eigen::Index b = config.batch;

  for (int step = 1; step <= config.steps; ++step) {
    Eigen::MatrixXd xw(d, b), xl(d, b), cond(all_cond.rows(), b), ew(d, b), el(d, b);
    Eigen::VectorXd t(b);
    for (Eigen::Index j = 0; j < b; ++j) {
      if (cursor == n_pairs) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t k = n_pairs; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
        cursor = 0;
      }
      const auto idx = static_cast<Eigen::Index>(order[cursor++]);
      xw.col(j) = all_w.col(idx);
      xl.col(j) = all_l.col(idx);
      cond.col(j) = all_cond.col(idx);
      t[j] = draw_time(policy, rng);
      auto cw = ew.col(j);
      rng.fill_normal(cw);
      auto cl = el.col(j);
      rng.fill_normal(cl);
    }
    LossResult lr;
    try {
      lr = dpo_batch_loss(policy, reference, xw, xl, cond, t, ew, el, config.beta);
      adam_step(adam, policy.net, lr.grads);
    } catch (const Error& e) {
      fail(e.category(), "DPO training aborted at step " + std::to_string(step) + ": " + e.what());
    }
    result.trace.push_back({step, lr.loss});
    result.checkpoint.step = static_cast<std::uint64_t>(step);
    snapshot_if_requested(snapshot_steps, step, result.checkpoint, result.snapshots);
  }
  return result;
}

CsvTable trace_csv(const std::vector<TracePoint>& trace) {
  CsvTable t;
  t.header = {"step", "loss"};
  for (const auto& p : trace) t.add_row({std::to_string(p.step), format_number(p.loss)});
  return t;
}

TrainResult pretrain_sft(const std::vector<InpaintTask>& tasks, const DenoiserSpec& spec, const SftConfig& config) {
  require(!tasks.empty(), "invalid-input", "pretraining needs at least one task");
  require(config.steps >= 0 && config.batch >= 1 && config.lr > 0.0, "invalid-config",
          "sft steps must be >= 0, batch >= 1 and lr > 0");
  TrainResult result;
  result.checkpoint.model = make_denoiser(spec);
  result.checkpoint.config_hash = stable_hash({static_cast<std::uint64_t>(config.steps), hash_double(config.lr),
                                               static_cast<std::uint64_t>(config.batch), config.seed,
                                               static_cast<std::uint64_t>(spec.tag), spec.init_seed});
  if (config.steps == 0) return result;

  Denoiser& model = result.checkpoint.model;
  const Eigen::Index d = spec.dims.image_size();
  const Eigen::Index n = static_cast<Eigen::Index>(tasks.size());
  Eigen::MatrixXd all_x0(d, n), all_cond;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& task = tasks[static_cast<std::size_t>(i)];
    check_task(task, spec.dims);
    all_x0.col(i) = to_model_space(task.source).data;
    Eigen::VectorXd c = task_condition(task, spec.dims.num_classes);
    if (i == 0) all_cond.resize(c.size(), n);
    all_cond.col(i) = c;
  }

  Rng rng(config.seed);
  auto adam = AdamState<double>::for_params(model.net, config.lr);
  const Eigen::Index b = config.batch;
  const Eigen::VectorXd weights = Eigen::VectorXd::Constant(b, 1.0 / static_cast<double>(b));
  for (int step = 1; step <= config.steps; ++step) {
    Eigen::MatrixXd x0(d, b), cond(all_cond.rows(), b), eps(d, b);
    Eigen::VectorXd t(b);
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
      x0.col(j) = all_x0.col(idx);
      cond.col(j) = all_cond.col(idx);
      t[j] = draw_time(model, rng);
      auto col = eps.col(j);
      rng.fill_normal(col);
    }
    double loss = 0.0;
    try {
      BatchLoss bl = weighted_mse(model.net, training_batch(model, x0, cond, t, eps), weights, true);
      loss = bl.losses.mean();
      adam_step(adam, model.net, bl.grads);
    } catch (const Error& e) {
      fail(e.category(), "pretraining diverged at step " + std::to_string(step) + ": " + e.what());
    }
    result.trace.push_back({step, loss});
  }
  result.checkpoint.step = static_cast<std::uint64_t>(config.steps);
  return result;
}

}  // namespace prefalign
