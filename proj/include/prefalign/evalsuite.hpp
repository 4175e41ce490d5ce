#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefalign/csv.hpp"
#include "prefalign/diffusion.hpp"
#include "prefalign/rewards.hpp"

namespace prefalign {

/// Produces one image per request (a trained sampler, the data itself, ...).
using ImageSource = std::function<std::vector<Image>(std::span<const SampleRequest>)>;

/// Scores one result; nullopt (or a thrown Error) means the judge failed on it.
using Judge = std::function<std::optional<double>(const InpaintTask&, const Image&)>;

ImageSource model_source(const Denoiser& model, int flow_steps = 0);
/// Returns each task's source image untouched.
ImageSource dataset_source();
/// A uniform image, not blended.
ImageSource constant_source(double value);
/// A fresh draw from the data distribution of the task's class, blended.
ImageSource resampling_source(const WorldDims& dims, double noise_sigma);

Judge reward_judge(const BiasProfile& profile);

enum class BiasStat { Brightness = 0, Vividness = 1, Complexity = 2 };
inline constexpr std::array<BiasStat, 3> kBiasStats{BiasStat::Brightness, BiasStat::Vividness, BiasStat::Complexity};
std::string to_string(BiasStat stat);
double bias_stat(BiasStat stat, const Image& img);

struct SampleStats {
  std::uint32_t task_id = 0;
  std::uint32_t sample_idx = 0;
  std::array<double, 3> bias{};  // indexed by BiasStat
  double fidelity = 0.0;
  std::map<std::string, double> rewards;
  std::optional<double> judge;
};

struct EvalReport {
  std::string model_tag;
  std::map<std::string, double> reward_means;
  std::array<double, 3> bias_means{};
  double fidelity = 0.0;
  std::optional<double> judge_mean;
  std::size_t judge_failures = 0;
  std::size_t sample_count = 0;
  std::vector<SampleStats> samples;  // task-major, then sample index

  double bias_mean(BiasStat s) const { return bias_means[static_cast<std::size_t>(s)]; }
};

/// Seed of evaluation sample m for a task.
std::uint64_t eval_seed(std::uint64_t seed, std::uint32_t task_id, std::uint32_t sample_idx);

EvalReport evaluate(const ImageSource& source, const std::vector<InpaintTask>& tasks, const RewardRegistry& registry,
                    const std::vector<std::string>& rewards, int samples_per_task, std::uint64_t seed,
                    const Judge* judge = nullptr, std::string model_tag = {});

/// metric,name,value rows.
CsvTable eval_report_csv(const EvalReport& report);

struct WinRate {
  double win_a = 0.0;
  double win_b = 0.0;
  double tie = 0.0;
  std::size_t counted = 0;
  std::size_t skipped = 0;
};

/// One sample per task from each source with the same seed; A wins when
/// judge(A) > judge(B).
WinRate win_rate(const ImageSource& a, const ImageSource& b, const std::vector<InpaintTask>& tasks,
                 const Judge& judge, std::uint64_t seed);
CsvTable win_rate_csv(const WinRate& w);

struct StatDrift {
  BiasStat stat = BiasStat::Brightness;
  double generated_mean = 0.0;
  double data_mean = 0.0;
  double drift = 0.0;  // generated_mean - data_mean
  double se = 0.0;     // standard error of the drift
};

struct DriftReport {
  std::array<StatDrift, 3> stats{};
  double hacking_index = 0.0;  // max |drift|
  EvalReport generated;

  const StatDrift& at(BiasStat s) const { return stats[static_cast<std::size_t>(s)]; }
};

DriftReport drift(const ImageSource& source, const std::vector<InpaintTask>& tasks,
                  const std::vector<InpaintTask>& train_tasks, int samples_per_task, std::uint64_t seed);
DriftReport drift_from_report(EvalReport generated, const std::vector<InpaintTask>& train_tasks);
CsvTable drift_csv(const DriftReport& report);

/// Mean and standard error of per-sample differences a_i - b_i for two
/// reports over the same tasks and seeds.
struct PairedDifference {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
PairedDifference paired_difference(const EvalReport& a, const EvalReport& b, BiasStat stat);
PairedDifference paired_fidelity_difference(const EvalReport& a, const EvalReport& b);

}  // namespace prefalign
