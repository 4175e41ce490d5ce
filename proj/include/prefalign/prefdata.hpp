#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefalign/model.hpp"
#include "prefalign/rewards.hpp"
#include "prefalign/toyworld.hpp"

namespace prefalign {

struct Candidate {
  std::uint32_t task_id = 0;
  std::uint32_t candidate_idx = 0;
  std::uint64_t seed = 0;
  Image image;  // blended, stored at f32 precision
  std::map<std::string, double> scores;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct PreferencePair {
  std::uint32_t task_id = 0;
  std::uint32_t preferred_idx = 0;
  std::uint32_t dispreferred_idx = 0;
  std::uint64_t preferred_seed = 0;
  std::uint64_t dispreferred_seed = 0;
  double margin = 0.0;  // score gap, or mean-rank gap for the ensemble
  Image preferred;
  Image dispreferred;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

struct Exclusion {
  std::uint32_t task_id = 0;
  std::string reason;

  friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

struct DatasetHeader {
  WorldDims dims;
  std::string reward_name;  // selector that built the pairs; empty for task/candidate sets
  std::uint32_t candidates_per_task = 0;
  std::optional<GeneratorTag> generator;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

/// One container for task sets, candidate sets and preference pairs.
struct PreferenceDataset {
  DatasetHeader header;
  std::vector<InpaintTask> tasks;
  std::vector<Candidate> candidates;
  std::vector<PreferencePair> pairs;
  std::vector<Exclusion> excluded;

  const InpaintTask& task(std::uint32_t task_id) const;

  friend bool operator==(const PreferenceDataset&, const PreferenceDataset&) = default;
};

PreferenceDataset task_set(const WorldDims& dims, std::vector<InpaintTask> tasks);

/// Seed of candidate `candidate_idx` for `task_id`.
std::uint64_t candidate_seed(std::uint64_t global_seed, std::uint32_t task_id, std::uint32_t candidate_idx);

/// N samples per task, seeds from candidate_seed, images rounded to f32.
/// Candidates are ordered task-major.
PreferenceDataset gen_candidates(const Denoiser& model, const std::vector<InpaintTask>& tasks, int n_candidates,
                                 std::uint64_t global_seed);

/// Fills candidate score maps for the named rewards.
void score_candidates(PreferenceDataset& ds, const RewardRegistry& registry, const std::vector<std::string>& names);

/// Candidates with index < n; nested by construction of candidate_seed.
PreferenceDataset first_candidates(const PreferenceDataset& ds, int n);

struct PairOptions {
  std::vector<std::string> ensemble = default_ensemble();
  /// Score used for the margin of randomly drawn pairs (|difference|).
  std::string random_margin_reward = "fidelity";
};

/// selector: a reward name, "random" or "ensemble". One pair per task; tasks
/// whose candidates are all tied are excluded and logged.
PreferenceDataset build_pairs(const PreferenceDataset& candidates, const std::string& selector, std::uint64_t seed,
                              const PairOptions& options = {});

double mean_margin(const PreferenceDataset& ds);

std::vector<std::uint8_t> encode_dataset(const PreferenceDataset& ds);
PreferenceDataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const PreferenceDataset& ds, const std::filesystem::path& path);
PreferenceDataset load_dataset(const std::filesystem::path& path);

}  // namespace prefalign
