#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefalign/csv.hpp"
#include "prefalign/dpo.hpp"
#include "prefalign/evalsuite.hpp"
#include "prefalign/prefdata.hpp"

namespace prefalign {

/// How every trained model in a sweep is evaluated.
struct EvalSpec {
  std::vector<InpaintTask> tasks;
  RewardRegistry registry = RewardRegistry::defaults();
  std::vector<std::string> rewards{"fidelity"};
  int samples_per_task = 4;
  std::uint64_t seed = 0;
  int flow_steps = 0;  // 0 = the model's own setting
};

/// Column names appended by metric_row, in order.
std::vector<std::string> metric_columns(const EvalSpec& spec);
/// fidelity, the three bias means, then one column per reward.
std::vector<std::string> metric_row(const EvalReport& report, const EvalSpec& spec);

/// One DPO run per (beta, lr); columns beta,lr,<metrics>,final_loss,status.
/// A failed cell keeps its row with empty metrics and the error category.
CsvTable hparam_grid(const Checkpoint& pretrained, const PreferenceDataset& pairs, const std::vector<double>& betas,
                     const std::vector<double>& lrs, const DpoConfig& base, const EvalSpec& eval);

/// Candidates are drawn once for max(n_list); each N uses the nested prefix.
/// Columns N,margin,pairs,<metrics>,status.
CsvTable scale_candidates(const Checkpoint& pretrained, const std::vector<InpaintTask>& tasks,
                          const std::string& selector, const std::vector<int>& n_list, std::uint64_t candidate_seed,
                          std::uint64_t pair_seed, const DpoConfig& config, const EvalSpec& eval,
                          const PairOptions& options = {});

/// One DPO run with snapshots; columns steps,<metrics>.
CsvTable scale_samples(const Checkpoint& pretrained, const PreferenceDataset& pairs, const std::vector<int>& step_list,
                       const DpoConfig& config, const EvalSpec& eval);

}  // namespace prefalign
