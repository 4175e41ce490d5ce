#include "prefalign/prefdata.hpp"

#include <algorithm>
#include <unordered_map>

#include "prefalign/binary_io.hpp"
#include "prefalign/error.hpp"
#include "prefalign/generator.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

namespace {

constexpr std::string_view kMagic = "PFD1";
constexpr std::uint16_t kVersion = 1;
constexpr std::uint64_t kPairDomain = 0x70616972ULL;  // "pair"

std::uint8_t encode_tag(const std::optional<GeneratorTag>& tag) {
  return tag ? static_cast<std::uint8_t>(*tag) : 0;
}

}  // namespace

const InpaintTask& PreferenceDataset::task(std::uint32_t task_id) const {
  auto it = std::find_if(tasks.begin(), tasks.end(), [&](const InpaintTask& t) { return t.task_id == task_id; });
  if (it == tasks.end()) fail("invalid-input", "dataset has no task " + std::to_string(task_id));
  return *it;
}

PreferenceDataset task_set(const WorldDims& dims, std::vector<InpaintTask> tasks) {
  PreferenceDataset ds;
  ds.header.dims = dims;
  ds.tasks = std::move(tasks);
  return ds;
}

std::uint64_t candidate_seed(std::uint64_t global_seed, std::uint32_t task_id, std::uint32_t candidate_idx) {
  return stable_hash({global_seed, task_id, candidate_idx});
}

PreferenceDataset gen_candidates(const Denoiser& model, const std::vector<InpaintTask>& tasks, int n_candidates,
                                 std::uint64_t global_seed) {
  require(n_candidates >= 2, "invalid-config", "need at least 2 candidates per task");
  PreferenceDataset ds = task_set(model.spec.dims, tasks);
  ds.header.candidates_per_task = static_cast<std::uint32_t>(n_candidates);
  ds.header.generator = model.spec.tag;

  std::vector<SampleRequest> requests;
  for (const auto& task : ds.tasks) {
    check_task(task, model.spec.dims);
    for (int i = 0; i < n_candidates; ++i)
      requests.push_back({&task, candidate_seed(global_seed, task.task_id, static_cast<std::uint32_t>(i))});
  }
  std::vector<Image> images;
  try {
    images = sample_images(model, requests);
  } catch (const Error& e) {
    fail(e.category(), std::string("candidate generation: ") + e.what());
  }
  ds.candidates.reserve(images.size());
  for (std::size_t k = 0; k < images.size(); ++k) {
    Candidate c;
    c.task_id = requests[k].task->task_id;
    c.candidate_idx = static_cast<std::uint32_t>(k % static_cast<std::size_t>(n_candidates));
    c.seed = requests[k].seed;
    c.image = std::move(images[k]);
    round_to_storage(c.image);
    ds.candidates.push_back(std::move(c));
  }
  return ds;
}

void score_candidates(PreferenceDataset& ds, const RewardRegistry& registry, const std::vector<std::string>& names) {
  std::unordered_map<std::uint32_t, const InpaintTask*> by_id;
  for (const auto& t : ds.tasks) by_id[t.task_id] = &t;
  for (auto& c : ds.candidates) {
    auto it = by_id.find(c.task_id);
    require(it != by_id.end(), "invalid-input", "candidate refers to unknown task " + std::to_string(c.task_id));
    for (const auto& name : names) c.scores[name] = reward_score(registry.get(name), *it->second, c.image);
  }
}

PreferenceDataset first_candidates(const PreferenceDataset& ds, int n) {
  require(n >= 2 && static_cast<std::uint32_t>(n) <= ds.header.candidates_per_task, "invalid-config",
          "cannot take " + std::to_string(n) + " of " + std::to_string(ds.header.candidates_per_task) +
              " candidates per task");
  PreferenceDataset out = ds;
  out.header.candidates_per_task = static_cast<std::uint32_t>(n);
  std::erase_if(out.candidates, [&](const Candidate& c) { return c.candidate_idx >= static_cast<std::uint32_t>(n); });
  return out;
}

PreferenceDataset build_pairs(const PreferenceDataset& candidates, const std::string& selector, std::uint64_t seed,
                              const PairOptions& options) {
  PreferenceDataset out;
  out.header = candidates.header;
  out.header.reward_name = selector;

  std::map<std::uint32_t, std::vector<const Candidate*>> groups;
  for (const auto& c : candidates.candidates) groups[c.task_id].push_back(&c);
  for (auto& [_, g] : groups)
    std::sort(g.begin(), g.end(),
              [](const Candidate* a, const Candidate* b) { return a->candidate_idx < b->candidate_idx; });

  auto score_of = [&](const Candidate& c, const std::string& name) {
    auto it = c.scores.find(name);
    if (it == c.scores.end())
      fail("missing-scores", "candidate " + std::to_string(c.candidate_idx) + " of task " +
                                 std::to_string(c.task_id) + " has no score for '" + name + "'");
    return it->second;
  };

  for (const auto& task : candidates.tasks) {
    auto git = groups.find(task.task_id);
    require(git != groups.end() && git->second.size() >= 2, "invalid-input",
            "task " + std::to_string(task.task_id) + " has fewer than 2 candidates");
    const auto& group = git->second;
    const std::size_t n = group.size();

    std::size_t pref = 0, disp = 0;
    double margin = 0.0;
    if (selector == "random") {
      Rng rng(stable_hash({seed, task.task_id, kPairDomain}));
      pref = static_cast<std::size_t>(rng.below(n));
      disp = static_cast<std::size_t>(rng.below(n - 1));
      if (disp >= pref) ++disp;
      if (!options.random_margin_reward.empty() && group[0]->scores.count(options.random_margin_reward))
        margin = std::abs(score_of(*group[pref], options.random_margin_reward) -
                          score_of(*group[disp], options.random_margin_reward));
    } else if (selector == "ensemble") {
      ScoreMatrix m;
      m.task_id = task.task_id;
      m.reward_names = options.ensemble;
      for (const auto& name : options.ensemble) {
        std::vector<double> row;
        for (const auto* c : group) row.push_back(score_of(*c, name));
        m.scores.push_back(std::move(row));
      }
      const auto choice = ensemble_rank(m);
      if (choice.no_signal) {
        out.excluded.push_back({task.task_id, "no-signal"});
        continue;
      }
      pref = choice.preferred;
      disp = choice.dispreferred;
      margin = choice.mean_ranks[disp] - choice.mean_ranks[pref];
    } else {
      std::vector<double> s;
      for (const auto* c : group) s.push_back(score_of(*c, selector));
      pref = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
      disp = static_cast<std::size_t>(std::min_element(s.begin(), s.end()) - s.begin());
      if (s[pref] == s[disp]) {
        out.excluded.push_back({task.task_id, "no-signal"});
        continue;
      }
      margin = s[pref] - s[disp];
    }

    PreferencePair p;
    p.task_id = task.task_id;
    p.preferred_idx = group[pref]->candidate_idx;
    p.dispreferred_idx = group[disp]->candidate_idx;
    p.preferred_seed = group[pref]->seed;
    p.dispreferred_seed = group[disp]->seed;
    p.margin = margin;
    p.preferred = group[pref]->image;
    p.dispreferred = group[disp]->image;
    out.tasks.push_back(task);
    out.pairs.push_back(std::move(p));
  }
  return out;
}

double mean_margin(const PreferenceDataset& ds) {
  if (ds.pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : ds.pairs) total += p.margin;
  return total / static_cast<double>(ds.pairs.size());
}

std::vector<std::uint8_t> encode_dataset(const PreferenceDataset& ds) {
  const auto& dims = ds.header.dims;
  auto check_size = [&](const Image& img, const char* what) {
    require(img.width == dims.width && img.height == dims.height, "shape-mismatch",
            std::string(what) + " image size differs from the dataset header");
  };

  ByteWriter w;
  w.raw(kMagic);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(dims.width));
  w.u32(static_cast<std::uint32_t>(dims.height));
  w.u32(static_cast<std::uint32_t>(dims.num_classes));
  w.u32(ds.header.candidates_per_task);
  w.u8(encode_tag(ds.header.generator));
  w.str16(ds.header.reward_name);

  w.u32(static_cast<std::uint32_t>(ds.tasks.size()));
  for (const auto& t : ds.tasks) {
    check_size(t.source, "task");
    w.u32(t.task_id);
    w.u32(t.label);
    w.f32_array(t.source.data);
    for (Eigen::Index p = 0; p < t.mask.data.size(); ++p) w.u8(t.mask.data[p] > 0.5 ? 1 : 0);
  }

  w.u32(static_cast<std::uint32_t>(ds.candidates.size()));
  for (const auto& c : ds.candidates) {
    check_size(c.image, "candidate");
    w.u32(c.task_id);
    w.u32(c.candidate_idx);
    w.u64(c.seed);
    w.f32_array(c.image.data);
    w.u16(static_cast<std::uint16_t>(c.scores.size()));
    for (const auto& [name, value] : c.scores) {
      w.str16(name);
      w.f64(value);
    }
  }

  w.u32(static_cast<std::uint32_t>(ds.pairs.size()));
  for (const auto& p : ds.pairs) {
    check_size(p.preferred, "preferred");
    check_size(p.dispreferred, "dispreferred");
    w.u32(p.task_id);
    w.u32(p.preferred_idx);
    w.u32(p.dispreferred_idx);
    w.u64(p.preferred_seed);
    w.u64(p.dispreferred_seed);
    w.f64(p.margin);
    w.f32_array(p.preferred.data);
    w.f32_array(p.dispreferred.data);
  }

  w.u32(static_cast<std::uint32_t>(ds.excluded.size()));
  for (const auto& e : ds.excluded) {
    w.u32(e.task_id);
    w.str16(e.reason);
  }
  w.checksum();
  return w.bytes();
}

PreferenceDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "PFD1 dataset");
  if (bytes.size() < kMagic.size() || r.raw(kMagic.size()) != kMagic)
    fail("bad-magic", "not a PFD1 dataset (magic bytes do not match)");
  const std::uint16_t version = r.u16();
  if (version != kVersion)
    fail("version-mismatch", "PFD1 version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kVersion) + ")");

  PreferenceDataset ds;
  auto& dims = ds.header.dims;
  dims.width = static_cast<int>(r.u32());
  dims.height = static_cast<int>(r.u32());
  dims.num_classes = static_cast<int>(r.u32());
  require(dims.width > 0 && dims.height > 0 && dims.width <= 4096 && dims.height <= 4096 && dims.num_classes >= 2,
          "invalid-file", "PFD1 header has invalid dimensions");
  ds.header.candidates_per_task = r.u32();
  const std::uint8_t tag = r.u8();
  require(tag <= 2, "invalid-file", "PFD1 header has unknown generator tag " + std::to_string(tag));
  if (tag != 0) ds.header.generator = static_cast<GeneratorTag>(tag);
  ds.header.reward_name = r.str16();

  const Eigen::Index image_size = dims.image_size();
  const std::size_t image_bytes = static_cast<std::size_t>(image_size) * 4;
  auto read_image = [&]() {
    Image img(dims.width, dims.height);
    img.data = r.f32_array(image_size);
    return img;
  };

  const std::uint32_t n_tasks = r.count(8 + image_bytes + static_cast<std::size_t>(dims.pixels()));
  ds.tasks.reserve(n_tasks);
  for (std::uint32_t i = 0; i < n_tasks; ++i) {
    InpaintTask t;
    t.task_id = r.u32();
    t.label = r.u32();
    t.source = read_image();
    t.mask = Mask(dims.width, dims.height);
    for (Eigen::Index p = 0; p < dims.pixels(); ++p) {
      const std::uint8_t m = r.u8();
      require(m <= 1, "invalid-file", "mask byte is not 0/1 in task " + std::to_string(t.task_id));
      t.mask.data[p] = m;
    }
    ds.tasks.push_back(std::move(t));
  }

  const std::uint32_t n_cands = r.count(18 + image_bytes);
  ds.candidates.reserve(n_cands);
  for (std::uint32_t i = 0; i < n_cands; ++i) {
    Candidate c;
    c.task_id = r.u32();
    c.candidate_idx = r.u32();
    c.seed = r.u64();
    c.image = read_image();
    const std::uint16_t n_scores = r.u16();
    for (std::uint16_t k = 0; k < n_scores; ++k) {
      std::string name = r.str16();
      c.scores[std::move(name)] = r.f64();
    }
    ds.candidates.push_back(std::move(c));
  }

  const std::uint32_t n_pairs = r.count(36 + 2 * image_bytes);
  ds.pairs.reserve(n_pairs);
  for (std::uint32_t i = 0; i < n_pairs; ++i) {
    PreferencePair p;
    p.task_id = r.u32();
    p.preferred_idx = r.u32();
    p.dispreferred_idx = r.u32();
    p.preferred_seed = r.u64();
    p.dispreferred_seed = r.u64();
    p.margin = r.f64();
    p.preferred = read_image();
    p.dispreferred = read_image();
    require(p.preferred_idx != p.dispreferred_idx && p.margin >= 0.0, "invalid-file",
            "pair for task " + std::to_string(p.task_id) + " violates pair invariants");
    ds.pairs.push_back(std::move(p));
  }

  const std::uint32_t n_excl = r.count(6);
  for (std::uint32_t i = 0; i < n_excl; ++i) {
    Exclusion e;
    e.task_id = r.u32();
    e.reason = r.str16();
    ds.excluded.push_back(std::move(e));
  }
  r.verify_checksum();
  r.expect_end();
  return ds;
}

void save_dataset(const PreferenceDataset& ds, const std::filesystem::path& path) {
  write_file_bytes(path, encode_dataset(ds));
}

PreferenceDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file_bytes(path)); }

}  // namespace prefalign
