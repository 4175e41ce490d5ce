#include "prefalign/experiments.hpp"

#include <algorithm>

#include "prefalign/error.hpp"

namespace prefalign {

namespace {

EvalReport run_eval(const Denoiser& model, const EvalSpec& spec, const std::string& tag) {
  return evaluate(model_source(model, spec.flow_steps), spec.tasks, spec.registry, spec.rewards,
                  spec.samples_per_task, spec.seed, nullptr, tag);
}

void require_ascending(const std::vector<int>& xs, const char* what) {
  require(!xs.empty(), "invalid-config", std::string(what) + " must not be empty");
  for (std::size_t i = 1; i < xs.size(); ++i)
    require(xs[i] > xs[i - 1], "invalid-config", std::string(what) + " must be strictly ascending");
}

}  // namespace

std::vector<std::string> metric_columns(const EvalSpec& spec) {
  std::vector<std::string> cols{"fidelity"};
  for (BiasStat b : kBiasStats) cols.push_back(to_string(b));
  for (const auto& r : spec.rewards) cols.push_back("reward_" + r);
  return cols;
}

std::vector<std::string> metric_row(const EvalReport& report, const EvalSpec& spec) {
  std::vector<std::string> row{format_number(report.fidelity)};
  for (BiasStat b : kBiasStats) row.push_back(format_number(report.bias_mean(b)));
  for (const auto& r : spec.rewards) row.push_back(format_number(report.reward_means.at(r)));
  return row;
}

CsvTable hparam_grid(const Checkpoint& pretrained, const PreferenceDataset& pairs, const std::vector<double>& betas,
                     const std::vector<double>& lrs, const DpoConfig& base, const EvalSpec& eval) {
  require(!betas.empty() && !lrs.empty(), "invalid-config", "hyper-parameter grid must not be empty");
  CsvTable table;
  table.header = {"beta", "lr"};
  const auto cols = metric_columns(eval);
  table.header.insert(table.header.end(), cols.begin(), cols.end());
  table.header.insert(table.header.end(), {"final_loss", "status"});

  for (double beta : betas) {
    for (double lr : lrs) {
      std::vector<std::string> row{format_number(beta), format_number(lr)};
      DpoConfig cfg = base;
      cfg.beta = beta;
      cfg.lr = lr;
      try {
        const TrainResult res = train_dpo(pretrained, pairs, cfg);
        const auto metrics = metric_row(run_eval(res.checkpoint.model, eval, "grid"), eval);
        row.insert(row.end(), metrics.begin(), metrics.end());
        row.push_back(res.trace.empty() ? "" : format_number(res.trace.back().loss));
        row.push_back("ok");
      } catch (const Error& e) {
        row.resize(row.size() + cols.size() + 1);
        row.push_back(e.category());
      }
      table.add_row(std::move(row));
    }
  }
  return table;
}

CsvTable scale_candidates(const Checkpoint& pretrained, const std::vector<InpaintTask>& tasks,
                          const std::string& selector, const std::vector<int>& n_list, std::uint64_t candidate_seed,
                          std::uint64_t pair_seed, const DpoConfig& config, const EvalSpec& eval,
                          const PairOptions& options) {
  require_ascending(n_list, "candidate counts");
  require(n_list.front() >= 2, "invalid-config", "need at least two candidates per task");

  PreferenceDataset all = gen_candidates(pretrained.model, tasks, n_list.back(), candidate_seed);
  std::vector<std::string> names = eval.registry.names();
  score_candidates(all, eval.registry, names);

  CsvTable table;
  table.header = {"N", "margin", "pairs"};
  const auto cols = metric_columns(eval);
  table.header.insert(table.header.end(), cols.begin(), cols.end());
  table.header.push_back("status");
  for (int n : n_list) {
    std::vector<std::string> row{std::to_string(n)};
    try {
      const PreferenceDataset pairs = build_pairs(first_candidates(all, n), selector, pair_seed, options);
      row.push_back(format_number(mean_margin(pairs)));
      row.push_back(std::to_string(pairs.pairs.size()));
      const TrainResult res = train_dpo(pretrained, pairs, config);
      const auto metrics = metric_row(run_eval(res.checkpoint.model, eval, "N=" + std::to_string(n)), eval);
      row.insert(row.end(), metrics.begin(), metrics.end());
      row.push_back("ok");
    } catch (const Error& e) {
      row.resize(3 + cols.size());
      row.push_back(e.category());
    }
    table.add_row(std::move(row));
  }
  return table;
}

CsvTable scale_samples(const Checkpoint& pretrained, const PreferenceDataset& pairs, const std::vector<int>& step_list,
                       const DpoConfig& config, const EvalSpec& eval) {
  require_ascending(step_list, "snapshot steps");
  require(step_list.front() >= 0, "invalid-config", "snapshot steps must be non-negative");
  DpoConfig cfg = config;
  cfg.steps = step_list.back();
  const TrainResult res = train_dpo(pretrained, pairs, cfg, step_list);

  CsvTable table;
  table.header = {"steps"};
  const auto cols = metric_columns(eval);
  table.header.insert(table.header.end(), cols.begin(), cols.end());
  for (std::size_t i = 0; i < step_list.size(); ++i) {
    std::vector<std::string> row{std::to_string(step_list[i])};
    const auto metrics = metric_row(run_eval(res.snapshots.at(i).model, eval, "steps"), eval);
    row.insert(row.end(), metrics.begin(), metrics.end());
    table.add_row(std::move(row));
  }
  return table;
}

}  // namespace prefalign
