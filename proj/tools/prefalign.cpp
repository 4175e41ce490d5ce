// Command-line front end: one subcommand per pipeline stage.
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "prefalign/checkpoint.hpp"
#include "prefalign/config.hpp"
#include "prefalign/csv.hpp"
#include "prefalign/dpo.hpp"
#include "prefalign/error.hpp"
#include "prefalign/evalsuite.hpp"
#include "prefalign/experiments.hpp"
#include "prefalign/judge.hpp"
#include "prefalign/parallel.hpp"
#include "prefalign/prefdata.hpp"

namespace fs = std::filesystem;
using namespace prefalign;

namespace {

// Files written by the current run; removed again if it fails.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  fs::path file(const std::string& name) {
    fs::path p = dir_ / name;
    written_.push_back(p);
    return p;
  }

  void prepare() {
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dir_ = true;
    }
    require(fs::is_directory(dir_), "io", "--out is not a directory: " + dir_.string());
  }

  void discard() {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
    if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool created_dir_ = false;
};

const std::string& need(const std::string& path, const char* key) {
  require(!path.empty(), "invalid-config", std::string("missing input: set ") + key);
  require(fs::exists(path), "io", std::string(key) + " not found: " + path);
  return path;
}

std::vector<InpaintTask> load_tasks(const std::string& path, const char* key, const RunConfig& cfg) {
  PreferenceDataset ds = load_dataset(need(path, key));
  require(ds.header.dims == cfg.dims(), "shape-mismatch",
          std::string(key) + " geometry differs from the configured width/height/classes");
  require(!ds.tasks.empty(), "invalid-file", std::string(key) + " holds no tasks");
  return std::move(ds.tasks);
}

Checkpoint load_model(const std::string& path, const char* key, const RunConfig& cfg) {
  Checkpoint ckpt = load_checkpoint(need(path, key));
  require(ckpt.model.spec.dims == cfg.dims(), "shape-mismatch",
          std::string(key) + " geometry differs from the configured width/height/classes");
  return ckpt;
}

RemoteJudgeConfig remote_config(const RunConfig& cfg) {
  RemoteJudgeConfig r;
  r.endpoint = cfg.judge_endpoint;
  r.model = cfg.judge_model;
  r.timeout_s = cfg.judge_timeout;
  r.max_retries = cfg.judge_retries;
  r.parallelism = cfg.judge_parallelism;
  return r;
}

Judge make_judge(const RunConfig& cfg, const RewardRegistry& registry) {
  if (cfg.judge == "mock") return mock_judge(cfg.classes);
  if (cfg.judge == "remote") {
    require(!cfg.judge_endpoint.empty(), "invalid-config", "remote judge needs judge_endpoint");
    return remote_judge(remote_config(cfg), cfg.classes);
  }
  return reward_judge(registry.get(cfg.judge));
}

EvalSpec eval_spec(const RunConfig& cfg, std::vector<InpaintTask> tasks) {
  EvalSpec spec;
  spec.tasks = std::move(tasks);
  spec.rewards = cfg.rewards;
  spec.samples_per_task = cfg.eval_samples;
  spec.seed = cfg.stage_seed("eval");
  spec.flow_steps = cfg.flow_steps;
  return spec;
}

using Command = std::function<void(const RunConfig&, Outputs&)>;

void make_data(const RunConfig& cfg, Outputs& out) {
  const std::uint64_t seed = cfg.stage_seed("data");
  auto train = make_dataset(seed, cfg.dims(), cfg.tasks, cfg.noise_sigma, 0);
  auto held = make_dataset(seed, cfg.dims(), cfg.eval_tasks, cfg.noise_sigma, static_cast<std::uint32_t>(cfg.tasks));
  save_dataset(task_set(cfg.dims(), std::move(train)), out.file("train.pfd"));
  save_dataset(task_set(cfg.dims(), std::move(held)), out.file("eval.pfd"));
}

void pretrain(const RunConfig& cfg, Outputs& out) {
  const auto tasks = load_tasks(cfg.train_data, "train_data", cfg);
  const TrainResult res = pretrain_sft(tasks, cfg.denoiser_spec(), cfg.sft_config());
  save_checkpoint(res.checkpoint, out.file("pretrained.pfc"));
  write_csv(trace_csv(res.trace), out.file("sft_trace.csv"));
}

void gen_candidates_cmd(const RunConfig& cfg, Outputs& out) {
  const Checkpoint ckpt = load_model(cfg.checkpoint, "checkpoint", cfg);
  const auto tasks = load_tasks(cfg.train_data, "train_data", cfg);
  PreferenceDataset cands = gen_candidates(ckpt.model, tasks, cfg.candidates, cfg.stage_seed("candidates"));
  const RewardRegistry registry = RewardRegistry::defaults();
  score_candidates(cands, registry, registry.names());
  save_dataset(cands, out.file("candidates.pfd"));
}

void build_pairs_cmd(const RunConfig& cfg, Outputs& out) {
  PreferenceDataset cands = load_dataset(need(cfg.candidates_data, "candidates_data"));
  const RewardRegistry registry = RewardRegistry::defaults();
  score_candidates(cands, registry, registry.names());
  PairOptions options;
  options.ensemble = cfg.ensemble;
  const PreferenceDataset pairs = build_pairs(cands, cfg.selector, cfg.stage_seed("pairs"), options);
  save_dataset(pairs, out.file("pairs.pfd"));
  CsvTable summary;
  summary.header = {"metric", "name", "value"};
  summary.add_row({"pairs", cfg.selector, std::to_string(pairs.pairs.size())});
  summary.add_row({"excluded", cfg.selector, std::to_string(pairs.excluded.size())});
  summary.add_row({"margin", cfg.selector, format_number(mean_margin(pairs))});
  write_csv(summary, out.file("pairs_summary.csv"));
}

void dpo_train_cmd(const RunConfig& cfg, Outputs& out) {
  const Checkpoint ckpt = load_model(cfg.checkpoint, "checkpoint", cfg);
  const PreferenceDataset pairs = load_dataset(need(cfg.pairs_data, "pairs_data"));
  const TrainResult res = train_dpo(ckpt, pairs, cfg.dpo_config());
  save_checkpoint(res.checkpoint, out.file("policy.pfc"));
  write_csv(trace_csv(res.trace), out.file("dpo_trace.csv"));
}

void eval_cmd(const RunConfig& cfg, Outputs& out) {
  const Checkpoint ckpt = load_model(cfg.checkpoint, "checkpoint", cfg);
  const auto tasks = load_tasks(cfg.eval_data, "eval_data", cfg);
  const RewardRegistry registry = RewardRegistry::defaults();
  const Judge judge = make_judge(cfg, registry);
  const EvalReport report = evaluate(model_source(ckpt.model, cfg.flow_steps), tasks, registry, cfg.rewards,
                                     cfg.eval_samples, cfg.stage_seed("eval"), &judge,
                                     to_string(ckpt.model.spec.tag));
  write_csv(eval_report_csv(report), out.file("eval.csv"));
}

void win_rate_cmd(const RunConfig& cfg, Outputs& out) {
  const Checkpoint a = load_model(cfg.checkpoint, "checkpoint", cfg);
  const Checkpoint b = load_model(cfg.checkpoint_b, "checkpoint_b", cfg);
  const auto tasks = load_tasks(cfg.eval_data, "eval_data", cfg);
  const RewardRegistry registry = RewardRegistry::defaults();
  const WinRate w = win_rate(model_source(a.model, cfg.flow_steps), model_source(b.model, cfg.flow_steps), tasks,
                             make_judge(cfg, registry), cfg.stage_seed("win-rate"));
  require(w.counted > 0, "judge-failed", "the judge failed on every task");
  write_csv(win_rate_csv(w), out.file("win_rate.csv"));
}

void drift_cmd(const RunConfig& cfg, Outputs& out) {
  const Checkpoint ckpt = load_model(cfg.checkpoint, "checkpoint", cfg);
  const auto tasks = load_tasks(cfg.eval_data, "eval_data", cfg);
  const auto train = load_tasks(cfg.train_data, "train_data", cfg);
  const DriftReport d =
      drift(model_source(ckpt.model, cfg.flow_steps), tasks, train, cfg.eval_samples, cfg.stage_seed("eval"));
  write_csv(drift_csv(d), out.file("drift.csv"));
}

void scale_candidates_cmd(const RunConfig& cfg, Outputs& out) {
  const Checkpoint ckpt = load_model(cfg.checkpoint, "checkpoint", cfg);
  const auto train = load_tasks(cfg.train_data, "train_data", cfg);
  PairOptions options;
  options.ensemble = cfg.ensemble;
  const CsvTable t = scale_candidates(ckpt, train, cfg.selector, cfg.n_list, cfg.stage_seed("candidates"),
                                      cfg.stage_seed("pairs"), cfg.dpo_config(),
                                      eval_spec(cfg, load_tasks(cfg.eval_data, "eval_data", cfg)), options);
  write_csv(t, out.file("scale_candidates.csv"));
}

void scale_samples_cmd(const RunConfig& cfg, Outputs& out) {
  const Checkpoint ckpt = load_model(cfg.checkpoint, "checkpoint", cfg);
  const PreferenceDataset pairs = load_dataset(need(cfg.pairs_data, "pairs_data"));
  const CsvTable t = scale_samples(ckpt, pairs, cfg.step_list, cfg.dpo_config(),
                                   eval_spec(cfg, load_tasks(cfg.eval_data, "eval_data", cfg)));
  write_csv(t, out.file("scale_samples.csv"));
}

void hparam_grid_cmd(const RunConfig& cfg, Outputs& out) {
  const Checkpoint ckpt = load_model(cfg.checkpoint, "checkpoint", cfg);
  const PreferenceDataset pairs = load_dataset(need(cfg.pairs_data, "pairs_data"));
  const CsvTable t = hparam_grid(ckpt, pairs, cfg.grid_betas, cfg.grid_lrs, cfg.dpo_config(),
                                 eval_spec(cfg, load_tasks(cfg.eval_data, "eval_data", cfg)));
  write_csv(t, out.file("hparam_grid.csv"));
}

// Scores one sample per held-out task with the rubric judge and reports how
// often it agrees with the fidelity oracle on sample pairs.
void judge_cmd(const RunConfig& cfg, Outputs& out) {
  require(cfg.judge == "mock" || cfg.judge == "remote", "invalid-config", "judge must be mock or remote");
  const Checkpoint ckpt = load_model(cfg.checkpoint, "checkpoint", cfg);
  const auto tasks = load_tasks(cfg.eval_data, "eval_data", cfg);
  const std::uint64_t seed = cfg.stage_seed("judge");

  std::vector<SampleRequest> requests;
  for (const auto& t : tasks)
    for (std::uint32_t m = 0; m < 2; ++m) requests.push_back({&t, eval_seed(seed, t.task_id, m)});
  const auto images = model_source(ckpt.model, cfg.flow_steps)(requests);

  std::vector<std::optional<JudgeVerdict>> verdicts;
  if (cfg.judge == "mock") {
    for (std::size_t i = 0; i < images.size(); ++i)
      verdicts.push_back(judge_mock(*requests[i].task, images[i], cfg.classes));
  } else {
    require(!cfg.judge_endpoint.empty(), "invalid-config", "remote judge needs judge_endpoint");
    std::vector<JudgeRequest> reqs;
    for (std::size_t i = 0; i < images.size(); ++i)
      reqs.push_back(make_judge_request(*requests[i].task, images[i], cfg.classes, remote_config(cfg)));
    verdicts = judge_remote_batch(reqs, remote_config(cfg));
  }

  CsvTable table;
  table.header = {"task_id", "sample", "aesthetic", "structural", "semantic", "total", "status"};
  std::map<std::pair<std::uint32_t, const Image*>, double> scored;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& v = verdicts[i];
    const std::string sample = std::to_string(i % 2);
    if (v) {
      scored[{requests[i].task->task_id, &images[i]}] = v->total;
      table.add_row({std::to_string(requests[i].task->task_id), sample, format_number(v->aesthetic),
                     format_number(v->structural), format_number(v->semantic), format_number(v->total), "ok"});
    } else {
      table.add_row({std::to_string(requests[i].task->task_id), sample, "", "", "", "", "failed"});
    }
  }
  write_csv(table, out.file("judge.csv"));

  // Verdicts are already in hand, so the rubric judge is a lookup here.
  const Judge lookup = [&scored](const InpaintTask& t, const Image& img) -> std::optional<double> {
    for (const auto& [key, total] : scored)
      if (key.first == t.task_id && *key.second == img) return total;
    return std::nullopt;
  };
  std::vector<JudgedPair> pairs;
  for (std::size_t i = 0; i + 1 < images.size(); i += 2) pairs.push_back({requests[i].task, images[i], images[i + 1]});
  const Agreement ag = judge_agreement(lookup, reward_judge(fidelity_only()), pairs);
  CsvTable summary;
  summary.header = {"metric", "name", "value"};
  summary.add_row({"agreement", "fidelity", format_number(ag.percent)});
  summary.add_row({"counted", "pairs", std::to_string(ag.counted)});
  summary.add_row({"skipped", "pairs", std::to_string(ag.skipped)});
  write_csv(summary, out.file("judge_agreement.csv"));
}

const std::vector<std::pair<std::string, Command>>& commands() {
  static const std::vector<std::pair<std::string, Command>> list = {
      {"make-data", make_data},
      {"pretrain", pretrain},
      {"gen-candidates", gen_candidates_cmd},
      {"build-pairs", build_pairs_cmd},
      {"dpo-train", dpo_train_cmd},
      {"eval", eval_cmd},
      {"win-rate", win_rate_cmd},
      {"drift", drift_cmd},
      {"scale-candidates", scale_candidates_cmd},
      {"scale-samples", scale_samples_cmd},
      {"hparam-grid", hparam_grid_cmd},
      {"judge", judge_cmd},
  };
  return list;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

std::string flag_name(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-alignment experiments on a toy inpainting world"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> assignments;
  std::map<std::string, std::string> flag_values;

  for (const auto& [name, _] : commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value file applied before flags");
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--set", assignments, "key=value override (repeatable)");
    for (const auto& key : config_keys()) sub->add_option(flag_name(key.name), flag_values[key.name], key.help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << one_line(e.what()) << "\n";
    return 1;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  Outputs out(out_dir);
  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& key : config_keys()) {
      const auto* opt = chosen->get_option(flag_name(key.name));
      if (opt->count() > 0) key.set(cfg, flag_values[key.name]);
    }
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      require(eq != std::string::npos, "invalid-config", "--set expects key=value, got '" + a + "'");
      set_config_value(cfg, a.substr(0, eq), a.substr(eq + 1));
    }
    validate_config(cfg);
    set_thread_count(cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));

    out.prepare();
    const std::string name = chosen->get_name();
    for (const auto& [cmd, fn] : commands())
      if (cmd == name) fn(cfg, out);
    save_config(cfg, out.file(name + ".cfg"));
  } catch (const Error& e) {
    out.discard();
    std::cerr << "error: " << e.category() << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    out.discard();
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
