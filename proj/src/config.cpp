#include "prefalign/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "prefalign/binary_io.hpp"
#include "prefalign/csv.hpp"
#include "prefalign/error.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) fail("invalid-config", "key '" + key + "' expects an integer, got '" + text + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    return parse_number(text);
  } catch (const Error&) {
    fail("invalid-config", "key '" + key + "' expects a number, got '" + text + "'");
  }
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
  return out;
}

template <typename T>
ConfigKey integer_key(std::string name, std::string help, T RunConfig::*field) {
  return {name, std::move(help), [field](const RunConfig& c) { return std::to_string(c.*field); },
          [field, name](RunConfig& c, const std::string& v) { c.*field = parse_integer<T>(name, v); }};
}

ConfigKey real_key(std::string name, std::string help, double RunConfig::*field) {
  return {name, std::move(help), [field](const RunConfig& c) { return format_number(c.*field); },
          [field, name](RunConfig& c, const std::string& v) { c.*field = parse_real(name, v); }};
}

ConfigKey text_key(std::string name, std::string help, std::string RunConfig::*field) {
  return {name, std::move(help), [field](const RunConfig& c) { return c.*field; },
          [field](RunConfig& c, const std::string& v) { c.*field = v; }};
}

ConfigKey names_key(std::string name, std::string help, std::vector<std::string> RunConfig::*field) {
  return {name, std::move(help), [field](const RunConfig& c) { return join(c.*field); },
          [field](RunConfig& c, const std::string& v) { c.*field = split_list(v); }};
}

ConfigKey ints_key(std::string name, std::string help, std::vector<int> RunConfig::*field) {
  return {name, std::move(help),
          [field](const RunConfig& c) {
            std::vector<std::string> xs;
            for (int x : c.*field) xs.push_back(std::to_string(x));
            return join(xs);
          },
          [field, name](RunConfig& c, const std::string& v) {
            (c.*field).clear();
            for (const auto& x : split_list(v)) (c.*field).push_back(parse_integer<int>(name, x));
          }};
}

ConfigKey reals_key(std::string name, std::string help, std::vector<double> RunConfig::*field) {
  return {name, std::move(help),
          [field](const RunConfig& c) {
            std::vector<std::string> xs;
            for (double x : c.*field) xs.push_back(format_number(x));
            return join(xs);
          },
          [field, name](RunConfig& c, const std::string& v) {
            (c.*field).clear();
            for (const auto& x : split_list(v)) (c.*field).push_back(parse_real(name, x));
          }};
}

}  // namespace

DenoiserSpec RunConfig::denoiser_spec() const {
  DenoiserSpec s;
  s.tag = parse_generator_tag(generator);
  s.dims = dims();
  s.hidden.assign(hidden.begin(), hidden.end());
  s.timesteps = timesteps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.flow_steps = flow_steps;
  s.init_seed = init_seed;
  return s;
}

SftConfig RunConfig::sft_config() const {
  return {sft_steps, sft_lr, sft_batch, stage_seed("sft")};
}

DpoConfig RunConfig::dpo_config() const {
  return {dpo_beta, dpo_lr, dpo_steps, dpo_batch, stage_seed("dpo")};
}

std::uint64_t RunConfig::stage_seed(const char* stage) const {
  const std::string s(stage);
  return stable_hash({seed, fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()))});
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      integer_key("width", "image width", &RunConfig::width),
      integer_key("height", "image height", &RunConfig::height),
      integer_key("classes", "number of classes K", &RunConfig::classes),
      real_key("noise_sigma", "pixel noise of the data distribution", &RunConfig::noise_sigma),
      integer_key("tasks", "training tasks to generate", &RunConfig::tasks),
      integer_key("eval_tasks", "held-out tasks to generate", &RunConfig::eval_tasks),
      integer_key("seed", "global seed", &RunConfig::seed),
      text_key("generator", "ddpm or fm", &RunConfig::generator),
      ints_key("hidden", "hidden layer widths", &RunConfig::hidden),
      integer_key("timesteps", "diffusion steps T", &RunConfig::timesteps),
      real_key("beta_start", "first noise level", &RunConfig::beta_start),
      real_key("beta_end", "last noise level", &RunConfig::beta_end),
      integer_key("flow_steps", "Euler steps S", &RunConfig::flow_steps),
      integer_key("init_seed", "network initialisation seed", &RunConfig::init_seed),
      integer_key("sft_steps", "pretraining steps", &RunConfig::sft_steps),
      real_key("sft_lr", "pretraining learning rate", &RunConfig::sft_lr),
      integer_key("sft_batch", "pretraining batch size", &RunConfig::sft_batch),
      integer_key("candidates", "candidates per task N", &RunConfig::candidates),
      text_key("selector", "pair selector: reward name, random or ensemble", &RunConfig::selector),
      names_key("ensemble", "rewards ranked by the ensemble selector", &RunConfig::ensemble),
      real_key("dpo_beta", "DPO regularisation strength", &RunConfig::dpo_beta),
      real_key("dpo_lr", "DPO learning rate", &RunConfig::dpo_lr),
      integer_key("dpo_steps", "DPO steps", &RunConfig::dpo_steps),
      integer_key("dpo_batch", "pairs per DPO step", &RunConfig::dpo_batch),
      integer_key("eval_samples", "samples per evaluation task M", &RunConfig::eval_samples),
      names_key("rewards", "rewards reported by eval", &RunConfig::rewards),
      text_key("judge", "judge for win-rate/judge: reward name, mock or remote", &RunConfig::judge),
      ints_key("n_list", "candidate counts for scale-candidates", &RunConfig::n_list),
      ints_key("step_list", "snapshot steps for scale-samples", &RunConfig::step_list),
      reals_key("grid_betas", "betas for hparam-grid", &RunConfig::grid_betas),
      reals_key("grid_lrs", "learning rates for hparam-grid", &RunConfig::grid_lrs),
      text_key("judge_endpoint", "http://host:port/path of the remote judge", &RunConfig::judge_endpoint),
      text_key("judge_model", "model name sent to the remote judge", &RunConfig::judge_model),
      integer_key("judge_parallelism", "remote requests in flight", &RunConfig::judge_parallelism),
      real_key("judge_timeout", "remote request timeout in seconds", &RunConfig::judge_timeout),
      integer_key("judge_retries", "remote retries per request", &RunConfig::judge_retries),
      text_key("train_data", "training task set (.pfd)", &RunConfig::train_data),
      text_key("eval_data", "held-out task set (.pfd)", &RunConfig::eval_data),
      text_key("checkpoint", "model checkpoint (.pfc)", &RunConfig::checkpoint),
      text_key("checkpoint_b", "second checkpoint for win-rate", &RunConfig::checkpoint_b),
      text_key("candidates_data", "candidate set (.pfd)", &RunConfig::candidates_data),
      text_key("pairs_data", "preference pairs (.pfd)", &RunConfig::pairs_data),
      integer_key("threads", "worker threads, 0 for all cores", &RunConfig::threads),
  };
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  fail("invalid-config", "unknown key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "invalid-config",
            origin + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.category(), origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  const auto bytes = read_file_bytes(path);
  apply_config_text(base, std::string(bytes.begin(), bytes.end()), path.string());
  return base;
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  const std::string text = config_to_text(cfg);
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void validate_config(const RunConfig& c) {
  require(c.width >= 2 && c.height >= 2, "invalid-config", "images must be at least 2x2");
  require(c.classes >= 2, "invalid-config", "need at least two classes");
  require(c.noise_sigma >= 0.0 && c.noise_sigma <= 0.2, "invalid-config", "noise_sigma must lie in [0, 0.2]");
  require(c.tasks >= 1 && c.eval_tasks >= 1, "invalid-config", "task counts must be positive");
  (void)parse_generator_tag(c.generator);
  require(!c.hidden.empty(), "invalid-config", "need at least one hidden layer");
  for (int h : c.hidden) require(h >= 1, "invalid-config", "hidden widths must be positive");
  require(c.timesteps >= 1 && c.flow_steps >= 1, "invalid-config", "step counts must be positive");
  require(c.sft_steps >= 0 && c.sft_batch >= 1 && c.sft_lr > 0.0, "invalid-config", "bad pretraining settings");
  require(c.candidates >= 2, "invalid-config", "need at least two candidates per task");
  require(c.dpo_beta > 0.0 && c.dpo_lr > 0.0 && c.dpo_steps >= 0 && c.dpo_batch >= 1, "invalid-config",
          "bad DPO settings");
  require(c.eval_samples >= 1, "invalid-config", "eval_samples must be at least 1");
  require(c.judge_parallelism >= 1 && c.judge_retries >= 0 && c.judge_timeout > 0.0, "invalid-config",
          "bad judge settings");
  require(c.threads >= 0, "invalid-config", "threads must be non-negative");
  require(!c.n_list.empty() && c.n_list.front() >= 2 && std::is_sorted(c.n_list.begin(), c.n_list.end()) &&
              std::adjacent_find(c.n_list.begin(), c.n_list.end()) == c.n_list.end(),
          "invalid-config", "n_list must be strictly ascending with entries >= 2");
  require(!c.step_list.empty() && c.step_list.front() >= 0 && std::is_sorted(c.step_list.begin(), c.step_list.end()),
          "invalid-config", "step_list must be ascending and non-negative");
  require(!c.grid_betas.empty() && !c.grid_lrs.empty(), "invalid-config", "hyper-parameter grids must be non-empty");
}

}  // namespace prefalign
