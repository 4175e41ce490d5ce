#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "prefalign/dpo.hpp"
#include "prefalign/model.hpp"

namespace prefalign {

/// Every tunable of a run. Stored as `key = value` lines; lists are
/// comma-separated.
struct RunConfig {
  // world
  int width = 16;
  int height = 16;
  int classes = 4;
  double noise_sigma = 0.05;
  int tasks = 256;
  int eval_tasks = 64;
  std::uint64_t seed = 0;
  // generator
  std::string generator = "ddpm";
  std::vector<int> hidden{1024};
  int timesteps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int flow_steps = 25;
  std::uint64_t init_seed = 17;
  // pretraining
  int sft_steps = 2000;
  double sft_lr = 1e-3;
  int sft_batch = 32;
  // preference data
  int candidates = 8;
  std::string selector = "fidelity";
  std::vector<std::string> ensemble{"hps_like", "pick_like", "fidelity", "neg_brightness"};
  // dpo
  double dpo_beta = 2000.0;
  double dpo_lr = 1e-6;
  int dpo_steps = 2000;
  int dpo_batch = 8;
  // evaluation
  int eval_samples = 4;
  std::vector<std::string> rewards{"fidelity", "hps_like", "pick_like", "neg_brightness"};
  std::string judge = "fidelity";  // a reward name, "mock" or "remote"
  std::vector<int> n_list{2, 4, 8, 16};
  std::vector<int> step_list{0, 250, 500, 1000, 2000};
  std::vector<double> grid_betas{2000.0, 4000.0, 8000.0};
  std::vector<double> grid_lrs{1e-7, 1e-6, 1e-5};
  std::string judge_endpoint;
  std::string judge_model = "gpt-4o";
  int judge_parallelism = 4;
  double judge_timeout = 60.0;
  int judge_retries = 4;
  // inputs
  std::string train_data;
  std::string eval_data;
  std::string checkpoint;
  std::string checkpoint_b;
  std::string candidates_data;
  std::string pairs_data;
  int threads = 0;  // 0 = hardware concurrency

  DenoiserSpec denoiser_spec() const;
  SftConfig sft_config() const;
  DpoConfig dpo_config() const;
  WorldDims dims() const { return {width, height, classes}; }

  /// Derived seed for one pipeline stage.
  std::uint64_t stage_seed(const char* stage) const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

/// All recognised keys, in file order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from text; unknown keys raise "invalid-config".
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies `key = value` lines ('#' starts a comment) on top of cfg.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

std::string config_to_text(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Range checks shared by every subcommand.
void validate_config(const RunConfig& cfg);

}  // namespace prefalign
