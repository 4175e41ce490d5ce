#include "prefalign/evalsuite.hpp"

#include <algorithm>
#include <cmath>

#include "prefalign/error.hpp"
#include "prefalign/generator.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

namespace {

constexpr std::uint64_t kEvalDomain = 0x6576616cULL;  // "eval"
constexpr std::uint64_t kWinDomain = 0x77696e73ULL;   // "wins"

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  std::size_t n = 0;
};

MeanVar mean_var(const std::vector<double>& xs) {
  MeanVar mv;
  mv.n = xs.size();
  if (xs.empty()) return mv;
  for (double x : xs) mv.mean += x;
  mv.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) mv.var += (x - mv.mean) * (x - mv.mean);
    mv.var /= static_cast<double>(xs.size() - 1);
  }
  return mv;
}

std::optional<double> run_judge(const Judge& judge, const InpaintTask& task, const Image& img) {
  try {
    auto v = judge(task, img);
    if (v && !std::isfinite(*v)) return std::nullopt;
    return v;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

ImageSource model_source(const Denoiser& model, int flow_steps) {
  return [&model, flow_steps](std::span<const SampleRequest> requests) {
    return sample_images(model, requests, flow_steps);
  };
}

ImageSource dataset_source() {
  return [](std::span<const SampleRequest> requests) {
    std::vector<Image> out;
    for (const auto& r : requests) out.push_back(r.task->source);
    return out;
  };
}

ImageSource constant_source(double value) {
  return [value](std::span<const SampleRequest> requests) {
    std::vector<Image> out;
    for (const auto& r : requests)
      out.push_back(Image::filled(r.task->source.width, r.task->source.height, Eigen::Vector3d::Constant(value)));
    return out;
  };
}

ImageSource resampling_source(const WorldDims& dims, double noise_sigma) {
  return [dims, noise_sigma](std::span<const SampleRequest> requests) {
    std::vector<Image> out;
    for (const auto& r : requests) {
      const Image fresh = sample_class_image(dims, static_cast<int>(r.task->label), noise_sigma, r.seed);
      out.push_back(blend(fresh, r.task->source, r.task->mask));
    }
    return out;
  };
}

Judge reward_judge(const BiasProfile& profile) {
  return [profile](const InpaintTask& task, const Image& img) -> std::optional<double> {
    return reward_score(profile, task, img);
  };
}

std::string to_string(BiasStat stat) {
  switch (stat) {
    case BiasStat::Brightness: return "brightness";
    case BiasStat::Vividness: return "vividness";
    case BiasStat::Complexity: return "complexity";
  }
  return "unknown";
}

double bias_stat(BiasStat stat, const Image& img) {
  switch (stat) {
    case BiasStat::Brightness: return brightness(img);
    case BiasStat::Vividness: return vividness(img);
    case BiasStat::Complexity: return complexity(img);
  }
  return 0.0;
}

std::uint64_t eval_seed(std::uint64_t seed, std::uint32_t task_id, std::uint32_t sample_idx) {
  return stable_hash({seed, task_id, sample_idx, kEvalDomain});
}

EvalReport evaluate(const ImageSource& source, const std::vector<InpaintTask>& tasks, const RewardRegistry& registry,
                    const std::vector<std::string>& rewards, int samples_per_task, std::uint64_t seed,
                    const Judge* judge, std::string model_tag) {
  require(samples_per_task >= 1, "invalid-config", "need at least one sample per task");
  require(!tasks.empty(), "invalid-input", "evaluation needs at least one task");
  for (const auto& name : rewards) (void)registry.get(name);

  std::vector<SampleRequest> requests;
  for (const auto& task : tasks)
    for (int m = 0; m < samples_per_task; ++m)
      requests.push_back({&task, eval_seed(seed, task.task_id, static_cast<std::uint32_t>(m))});
  const std::vector<Image> images = source(requests);
  require(images.size() == requests.size(), "invalid-input", "image source returned the wrong number of images");

  EvalReport report;
  report.model_tag = std::move(model_tag);
  report.sample_count = images.size();
  double judge_total = 0.0;
  std::size_t judged = 0;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const InpaintTask& task = *requests[k].task;
    const Image& img = images[k];
    SampleStats s;
    s.task_id = task.task_id;
    s.sample_idx = static_cast<std::uint32_t>(k % static_cast<std::size_t>(samples_per_task));
    for (BiasStat b : kBiasStats) s.bias[static_cast<std::size_t>(b)] = bias_stat(b, img);
    s.fidelity = fidelity(task, img);
    for (const auto& name : rewards) s.rewards[name] = reward_score(registry.get(name), task, img);
    if (judge) {
      s.judge = run_judge(*judge, task, img);
      if (s.judge) {
        judge_total += *s.judge;
        ++judged;
      } else {
        ++report.judge_failures;
      }
    }
    for (std::size_t i = 0; i < 3; ++i) report.bias_means[i] += s.bias[i];
    report.fidelity += s.fidelity;
    for (const auto& [name, v] : s.rewards) report.reward_means[name] += v;
    report.samples.push_back(std::move(s));
  }
  const double n = static_cast<double>(report.sample_count);
  for (double& v : report.bias_means) v /= n;
  report.fidelity /= n;
  for (auto& [_, v] : report.reward_means) v /= n;
  if (judge && judged > 0) report.judge_mean = judge_total / static_cast<double>(judged);
  return report;
}

CsvTable eval_report_csv(const EvalReport& report) {
  CsvTable t;
  t.header = {"metric", "name", "value"};
  for (const auto& [name, v] : report.reward_means) t.add_row({"reward", name, format_number(v)});
  for (BiasStat b : kBiasStats) t.add_row({"bias", to_string(b), format_number(report.bias_mean(b))});
  t.add_row({"fidelity", "fidelity", format_number(report.fidelity)});
  if (report.judge_mean) t.add_row({"judge", "mean", format_number(*report.judge_mean)});
  if (report.judge_failures) t.add_row({"judge", "failures", std::to_string(report.judge_failures)});
  t.add_row({"count", "samples", std::to_string(report.sample_count)});
  return t;
}

WinRate win_rate(const ImageSource& a, const ImageSource& b, const std::vector<InpaintTask>& tasks,
                 const Judge& judge, std::uint64_t seed) {
  std::vector<SampleRequest> requests;
  for (const auto& task : tasks) requests.push_back({&task, stable_hash({seed, task.task_id, kWinDomain})});
  const auto images_a = a(requests);
  const auto images_b = b(requests);
  require(images_a.size() == requests.size() && images_b.size() == requests.size(), "invalid-input",
          "image source returned the wrong number of images");

  WinRate w;
  std::size_t wins_a = 0, wins_b = 0, ties = 0;
  for (std::size_t k = 0; k < requests.size(); ++k) {
    const auto sa = run_judge(judge, *requests[k].task, images_a[k]);
    const auto sb = run_judge(judge, *requests[k].task, images_b[k]);
    if (!sa || !sb) {
      ++w.skipped;
      continue;
    }
    if (*sa > *sb)
      ++wins_a;
    else if (*sb > *sa)
      ++wins_b;
    else
      ++ties;
  }
  w.counted = wins_a + wins_b + ties;
  if (w.counted > 0) {
    const double n = static_cast<double>(w.counted);
    w.win_a = static_cast<double>(wins_a) / n;
    w.win_b = static_cast<double>(wins_b) / n;
    w.tie = static_cast<double>(ties) / n;
  }
  return w;
}

CsvTable win_rate_csv(const WinRate& w) {
  CsvTable t;
  t.header = {"winA", "winB", "tie"};
  t.add_row({format_number(w.win_a), format_number(w.win_b), format_number(w.tie)});
  return t;
}

DriftReport drift_from_report(EvalReport generated, const std::vector<InpaintTask>& train_tasks) {
  require(!train_tasks.empty(), "invalid-input", "drift needs training data");
  DriftReport report;
  for (BiasStat b : kBiasStats) {
    const auto i = static_cast<std::size_t>(b);
    std::vector<double> gen, data;
    for (const auto& s : generated.samples) gen.push_back(s.bias[i]);
    for (const auto& t : train_tasks) data.push_back(bias_stat(b, t.source));
    const MeanVar g = mean_var(gen), d = mean_var(data);
    StatDrift& sd = report.stats[i];
    sd.stat = b;
    sd.generated_mean = g.mean;
    sd.data_mean = d.mean;
    sd.drift = g.mean - d.mean;
    sd.se = std::sqrt(g.var / static_cast<double>(g.n) + d.var / static_cast<double>(d.n));
    report.hacking_index = std::max(report.hacking_index, std::abs(sd.drift));
  }
  report.generated = std::move(generated);
  return report;
}

DriftReport drift(const ImageSource& source, const std::vector<InpaintTask>& tasks,
                  const std::vector<InpaintTask>& train_tasks, int samples_per_task, std::uint64_t seed) {
  const RewardRegistry none;
  return drift_from_report(evaluate(source, tasks, none, {}, samples_per_task, seed), train_tasks);
}

CsvTable drift_csv(const DriftReport& report) {
  CsvTable t;
  t.header = {"metric", "name", "value"};
  for (const auto& sd : report.stats) {
    t.add_row({"drift", to_string(sd.stat), format_number(sd.drift)});
    t.add_row({"drift_se", to_string(sd.stat), format_number(sd.se)});
    t.add_row({"generated_mean", to_string(sd.stat), format_number(sd.generated_mean)});
    t.add_row({"data_mean", to_string(sd.stat), format_number(sd.data_mean)});
  }
  t.add_row({"hacking_index", "max_abs_drift", format_number(report.hacking_index)});
  return t;
}

namespace {

PairedDifference paired(const EvalReport& a, const EvalReport& b, const std::function<double(const SampleStats&)>& f) {
  require(a.samples.size() == b.samples.size() && !a.samples.empty(), "invalid-input",
          "paired comparison needs reports over the same samples");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    require(a.samples[i].task_id == b.samples[i].task_id && a.samples[i].sample_idx == b.samples[i].sample_idx,
            "invalid-input", "paired reports are not aligned");
    diffs.push_back(f(a.samples[i]) - f(b.samples[i]));
  }
  const MeanVar mv = mean_var(diffs);
  return {mv.mean, std::sqrt(mv.var / static_cast<double>(mv.n)), mv.n};
}

}  // namespace

PairedDifference paired_difference(const EvalReport& a, const EvalReport& b, BiasStat stat) {
  const auto i = static_cast<std::size_t>(stat);
  return paired(a, b, [i](const SampleStats& s) { return s.bias[i]; });
}

PairedDifference paired_fidelity_difference(const EvalReport& a, const EvalReport& b) {
  return paired(a, b, [](const SampleStats& s) { return s.fidelity; });
}

}  // namespace prefalign
