#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefalign/toyworld.hpp"

namespace prefalign {

/// Mean luminance 0.299 R + 0.587 G + 0.114 B.
double brightness(const Image& img);
/// Mean of (max channel - min channel).
double vividness(const Image& img);
/// Mean absolute difference over horizontally and vertically adjacent pixel
/// pairs, all channels.
double complexity(const Image& img);
/// -MSE against the task's class prototype; 0 is a perfect match.
double fidelity(const InpaintTask& task, const Image& img);

/// Linear scorer over the bias statistics, optionally plus fidelity.
struct BiasProfile {
  std::string name;
  double w_brightness = 0.0;
  double w_vividness = 0.0;
  double w_complexity = 0.0;
  bool include_fidelity = true;
};

BiasProfile hps_like();        // +0.3, +0.3, +0.6 with fidelity
BiasProfile pick_like();       // -0.3, -0.3, -0.6 with fidelity
BiasProfile fidelity_only();   // fidelity alone
BiasProfile neg_brightness();  // -brightness, no fidelity

double reward_score(const BiasProfile& profile, const InpaintTask& task, const Image& img);

/// Uniform [0, 1), a pure function of (task_id, candidate_idx, seed).
double random_reward(std::uint32_t task_id, std::uint32_t candidate_idx, std::uint64_t seed);

/// Named scorers; configs and result files refer to rewards by these names.
class RewardRegistry {
 public:
  /// hps_like, pick_like, fidelity, neg_brightness, brightness, vividness, complexity.
  static RewardRegistry defaults();

  void add(BiasProfile profile);
  bool contains(const std::string& name) const;
  const BiasProfile& get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, BiasProfile> profiles_;
};

const std::vector<std::string>& default_ensemble();

/// Scores of N candidates under R rewards for one task.
struct ScoreMatrix {
  std::uint32_t task_id = 0;
  std::vector<std::string> reward_names;
  std::vector<std::vector<double>> scores;  // [reward][candidate]

  std::size_t candidate_count() const { return scores.empty() ? 0 : scores.front().size(); }
};

/// Rank 1 = highest score; tied scores share the mean of the ranks they occupy.
std::vector<double> fractional_rank(const std::vector<double>& scores);

struct EnsembleChoice {
  std::size_t preferred = 0;
  std::size_t dispreferred = 0;
  std::vector<double> mean_ranks;
  bool no_signal = false;  // every candidate tied under every reward
};

/// Preferred = lowest mean rank, dispreferred = highest; ties go to the lowest index.
EnsembleChoice ensemble_rank(const ScoreMatrix& matrix);

}  // namespace prefalign
