#include "prefalign/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prefalign/error.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

namespace {
constexpr std::uint64_t kRandomRewardDomain = 0x72616e64ULL;  // "rand"
}

double brightness(const Image& img) {
  const Eigen::Vector3d luma(0.299, 0.587, 0.114);
  double total = 0.0;
  for (Eigen::Index p = 0; p < img.pixels(); ++p) total += luma.dot(img.pixel(p));
  return total / static_cast<double>(img.pixels());
}

double vividness(const Image& img) {
  double total = 0.0;
  for (Eigen::Index p = 0; p < img.pixels(); ++p) {
    const auto px = img.pixel(p);
    total += px.maxCoeff() - px.minCoeff();
  }
  return total / static_cast<double>(img.pixels());
}

double complexity(const Image& img) {
  double total = 0.0;
  Eigen::Index pairs = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        if (x + 1 < img.width) {
          total += std::abs(img.at(x + 1, y, c) - img.at(x, y, c));
          ++pairs;
        }
        if (y + 1 < img.height) {
          total += std::abs(img.at(x, y + 1, c) - img.at(x, y, c));
          ++pairs;
        }
      }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

double fidelity(const InpaintTask& task, const Image& img) {
  const WorldDims dims{img.width, img.height, static_cast<int>(task.label) + 2};
  const Image proto = prototype_image(dims, static_cast<int>(task.label));
  return -(img.data - proto.data).squaredNorm() / static_cast<double>(img.data.size());
}

BiasProfile hps_like() { return {"hps_like", 0.3, 0.3, 0.6, true}; }
BiasProfile pick_like() { return {"pick_like", -0.3, -0.3, -0.6, true}; }
BiasProfile fidelity_only() { return {"fidelity", 0.0, 0.0, 0.0, true}; }
BiasProfile neg_brightness() { return {"neg_brightness", -1.0, 0.0, 0.0, false}; }

double reward_score(const BiasProfile& profile, const InpaintTask& task, const Image& img) {
  double s = profile.include_fidelity ? fidelity(task, img) : 0.0;
  if (profile.w_brightness != 0.0) s += profile.w_brightness * brightness(img);
  if (profile.w_vividness != 0.0) s += profile.w_vividness * vividness(img);
  if (profile.w_complexity != 0.0) s += profile.w_complexity * complexity(img);
  return s;
}

double random_reward(std::uint32_t task_id, std::uint32_t candidate_idx, std::uint64_t seed) {
  return static_cast<double>(stable_hash({seed, task_id, candidate_idx, kRandomRewardDomain}) >> 11) * 0x1.0p-53;
}

RewardRegistry RewardRegistry::defaults() {
  RewardRegistry r;
  r.add(hps_like());
  r.add(pick_like());
  r.add(fidelity_only());
  r.add(neg_brightness());
  r.add({"brightness", 1.0, 0.0, 0.0, false});
  r.add({"vividness", 0.0, 1.0, 0.0, false});
  r.add({"complexity", 0.0, 0.0, 1.0, false});
  return r;
}

void RewardRegistry::add(BiasProfile profile) {
  require(std::isfinite(profile.w_brightness) && std::isfinite(profile.w_vividness) &&
              std::isfinite(profile.w_complexity),
          "invalid-config", "reward '" + profile.name + "' has non-finite weights");
  require(!profile.name.empty() && profile.name != "random" && profile.name != "ensemble", "invalid-config",
          "reward name '" + profile.name + "' is reserved or empty");
  auto name = profile.name;
  profiles_[name] = std::move(profile);
}

bool RewardRegistry::contains(const std::string& name) const { return profiles_.count(name) != 0; }

const BiasProfile& RewardRegistry::get(const std::string& name) const {
  auto it = profiles_.find(name);
  if (it == profiles_.end()) fail("unknown-reward", "no reward named '" + name + "'");
  return it->second;
}

std::vector<std::string> RewardRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : profiles_) out.push_back(name);
  return out;
}

const std::vector<std::string>& default_ensemble() {
  static const std::vector<std::string> members{"hps_like", "pick_like", "fidelity", "neg_brightness"};
  return members;
}

std::vector<double> fractional_rank(const std::vector<double>& scores) {
  require(!scores.empty(), "invalid-input", "cannot rank an empty score list");
  for (double s : scores) require(!std::isnan(s), "invalid-input", "NaN score cannot be ranked");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<double> ranks(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    // positions i..j (0-based) hold ranks i+1..j+1
    const double shared = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

EnsembleChoice ensemble_rank(const ScoreMatrix& matrix) {
  require(!matrix.scores.empty(), "invalid-input", "ensemble needs at least one reward");
  const std::size_t n = matrix.candidate_count();
  require(n >= 2, "invalid-input", "ensemble needs at least two candidates");

  EnsembleChoice choice;
  choice.mean_ranks.assign(n, 0.0);
  bool all_tied = true;
  for (const auto& row : matrix.scores) {
    require(row.size() == n, "invalid-input", "score matrix is not rectangular");
    const auto ranks = fractional_rank(row);
    for (std::size_t i = 0; i < n; ++i) choice.mean_ranks[i] += ranks[i];
    if (std::any_of(row.begin(), row.end(), [&](double s) { return s != row.front(); })) all_tied = false;
  }
  for (double& r : choice.mean_ranks) r /= static_cast<double>(matrix.scores.size());

  const auto& m = choice.mean_ranks;
  choice.preferred = static_cast<std::size_t>(std::min_element(m.begin(), m.end()) - m.begin());
  choice.dispreferred = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
  choice.no_signal = all_tied || choice.preferred == choice.dispreferred;
  return choice;
}

}  // namespace prefalign
