#pragma once

// Small fixed objects whose encodings are frozen under tests/golden.
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "prefalign/checkpoint.hpp"
#include "prefalign/csv.hpp"
#include "prefalign/dpo.hpp"
#include "prefalign/evalsuite.hpp"
#include "prefalign/prefdata.hpp"

namespace golden {

using namespace prefalign;

inline const WorldDims kDims{3, 2, 2};

inline Image ramp(double start, double step) {
  Image img(kDims.width, kDims.height);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = std::fmod(start + step * i, 1.0);
  round_to_storage(img);
  return img;
}

inline PreferenceDataset dataset() {
  PreferenceDataset ds;
  ds.header.dims = kDims;
  ds.header.reward_name = "hps_like";
  ds.header.candidates_per_task = 2;
  ds.header.generator = GeneratorTag::FM;
  for (std::uint32_t t = 0; t < 2; ++t) {
    InpaintTask task;
    task.task_id = 10 + t;
    task.label = t;
    task.source = ramp(0.125 * t, 0.0625);
    task.mask = Mask(kDims.width, kDims.height);
    task.mask.at(1, 0) = 1.0;
    task.mask.at(2, t) = 1.0;
    ds.tasks.push_back(task);
    for (std::uint32_t i = 0; i < 2; ++i) {
      Candidate c;
      c.task_id = task.task_id;
      c.candidate_idx = i;
      c.seed = 0x0123456789abcdefULL + 97 * t + i;
      c.image = ramp(0.03125 * (i + 1), 0.09375 + 0.015625 * t);
      c.scores["fidelity"] = -0.015625 * (i + 1);
      c.scores["hps_like"] = 0.5 - 0.25 * i + 0.125 * t;
      ds.candidates.push_back(c);
    }
  }
  PreferencePair p;
  p.task_id = 10;
  p.preferred_idx = 0;
  p.dispreferred_idx = 1;
  p.preferred_seed = ds.candidates[0].seed;
  p.dispreferred_seed = ds.candidates[1].seed;
  p.margin = 0.25;
  p.preferred = ds.candidates[0].image;
  p.dispreferred = ds.candidates[1].image;
  ds.pairs.push_back(p);
  ds.excluded.push_back({11, "no-signal"});
  return ds;
}

inline Checkpoint checkpoint() {
  DenoiserSpec spec;
  spec.tag = GeneratorTag::DDPM;
  spec.dims = kDims;
  spec.hidden = {3};
  spec.timesteps = 7;
  spec.beta_start = 0.001;
  spec.beta_end = 0.05;
  spec.flow_steps = 5;
  spec.init_seed = 99;
  Checkpoint c;
  c.model = make_denoiser(spec);
  // replace random init with exact binary fractions so the file does not
  // depend on the RNG or libm
  int k = 0;
  for (auto& l : c.model.net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = ((k++ % 17) - 8) / 32.0;
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = ((k++ % 5) - 2) / 64.0;
  }
  c.config_hash = 0xfeedfacecafebeefULL;
  c.step = 1234;
  return c;
}

inline CsvTable eval_csv() {
  EvalReport r;
  r.model_tag = "golden";
  r.reward_means = {{"fidelity", -0.0078125}, {"hps_like", 0.3125}};
  r.bias_means = {0.5, 0.25, 0.125};
  r.fidelity = -0.0078125;
  r.judge_mean = 87.5;
  r.judge_failures = 1;
  r.sample_count = 8;
  return eval_report_csv(r);
}

inline CsvTable win_csv() { return win_rate_csv({0.625, 0.25, 0.125, 8, 1}); }

inline CsvTable trace() { return trace_csv({{1, 0.6931471805599453}, {2, 0.5}, {3, 0.1}}); }

inline std::filesystem::path dir() { return PREFALIGN_GOLDEN_DIR; }

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<std::uint8_t> text_bytes(const std::string& s) { return {s.begin(), s.end()}; }

struct GoldenFile {
  std::string name;
  std::vector<std::uint8_t> bytes;
};

inline std::vector<GoldenFile> all() {
  return {{"dataset.pfd", encode_dataset(dataset())},
          {"checkpoint.pfc", encode_checkpoint(checkpoint())},
          {"eval.csv", text_bytes(eval_csv().to_string())},
          {"win_rate.csv", text_bytes(win_csv().to_string())},
          {"trace.csv", text_bytes(trace().to_string())}};
}

}  // namespace golden
