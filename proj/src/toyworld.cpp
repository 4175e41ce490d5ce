#include "prefalign/toyworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "prefalign/error.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

namespace {

constexpr std::uint64_t kTaskDomain = 0x7461736bULL;    // "task"
constexpr std::uint64_t kSampleDomain = 0x73616d70ULL;  // "samp"

double q64(double v) { return std::round(v * 64.0) / 64.0; }

const std::array<ClassPrototype, 4> kBasePalette{{
    {{16 / 64.0, 16 / 64.0, 20 / 64.0}, {26 / 64.0, 22 / 64.0, 19 / 64.0}, 0.25, 0.25},  // dark, muted
    {{48 / 64.0, 48 / 64.0, 45 / 64.0}, {38 / 64.0, 42 / 64.0, 45 / 64.0}, 0.34375, 0.1875},  // bright, muted
    {{13 / 64.0, 16 / 64.0, 35 / 64.0}, {38 / 64.0, 13 / 64.0, 16 / 64.0}, 0.1875, 0.34375},  // dark, vivid
    {{51 / 64.0, 48 / 64.0, 16 / 64.0}, {16 / 64.0, 45 / 64.0, 22 / 64.0}, 0.3125, 0.3125},  // bright, vivid
}};

}  // namespace

Image Image::filled(int w, int h, const Eigen::Vector3d& rgb) {
  Image img(w, h);
  for (Eigen::Index p = 0; p < img.pixels(); ++p) img.data.segment<3>(3 * p) = rgb;
  return img;
}

ClassPrototype class_prototype(int label, int num_classes) {
  require(num_classes >= 2 && label >= 0 && label < num_classes, "invalid-config",
          "class label " + std::to_string(label) + " outside [0," + std::to_string(num_classes) + ")");
  if (label < static_cast<int>(kBasePalette.size())) return kBasePalette[static_cast<std::size_t>(label)];

  // Extra classes: hues spaced around the wheel, alternating brightness.
  const double hue = std::fmod(0.618033988749895 * label, 1.0);
  const double level = (label % 2 == 0) ? 0.3 : 0.7;
  Eigen::Vector3d bg, fg;
  for (int c = 0; c < 3; ++c) {
    const double phase = 2.0 * M_PI * (hue + c / 3.0);
    bg[c] = q64(std::clamp(level + 0.15 * std::cos(phase), 0.2, 0.8));
    fg[c] = q64(std::clamp(1.0 - level + 0.15 * std::sin(phase), 0.2, 0.8));
  }
  const double hw = 0.1875 + 0.0625 * (label % 3);
  const double hh = 0.1875 + 0.0625 * ((label / 3) % 3);
  return {bg, fg, hw, hh};
}

Image render_prototype(const ClassPrototype& proto, int width, int height) {
  Image img = Image::filled(width, height, proto.background);
  const int x0 = static_cast<int>(std::lround(width * (0.5 - proto.half_width)));
  const int x1 = static_cast<int>(std::lround(width * (0.5 + proto.half_width)));
  const int y0 = static_cast<int>(std::lround(height * (0.5 - proto.half_height)));
  const int y1 = static_cast<int>(std::lround(height * (0.5 + proto.half_height)));
  for (int y = std::max(y0, 0); y < std::min(y1, height); ++y)
    for (int x = std::max(x0, 0); x < std::min(x1, width); ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = proto.foreground[c];
  return img;
}

Image prototype_image(const WorldDims& dims, int label) {
  return render_prototype(class_prototype(label, dims.num_classes), dims.width, dims.height);
}

void round_to_storage(Image& img) {
  img.data = img.data.cast<float>().cast<double>();
}

Image sample_class_image(const WorldDims& dims, int label, double noise_sigma, std::uint64_t seed) {
  Image img = prototype_image(dims, label);
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < img.data.size(); ++i)
      img.data[i] = std::clamp(img.data[i] + noise_sigma * rng.normal(), 0.0, 1.0);
  }
  round_to_storage(img);
  return img;
}

std::vector<InpaintTask> make_dataset(std::uint64_t seed, const WorldDims& dims, int n_tasks, double noise_sigma,
                                      std::uint32_t first_task_id) {
  require(dims.num_classes >= 2, "invalid-config", "need at least 2 classes, got " + std::to_string(dims.num_classes));
  require(n_tasks >= 1, "invalid-config", "need at least one task");
  require(noise_sigma >= 0.0 && noise_sigma <= 0.2, "invalid-config",
          "noise_sigma must lie in [0, 0.2], got " + std::to_string(noise_sigma));
  require(dims.width >= 2 && dims.height >= 2, "invalid-config", "images must be at least 2x2");

  const int total = dims.width * dims.height;
  std::vector<InpaintTask> tasks;
  tasks.reserve(static_cast<std::size_t>(n_tasks));
  for (int i = 0; i < n_tasks; ++i) {
    InpaintTask task;
    task.task_id = first_task_id + static_cast<std::uint32_t>(i);
    task.label = task.task_id % static_cast<std::uint32_t>(dims.num_classes);
    Rng rng(stable_hash({seed, task.task_id, kTaskDomain}));

    task.source = sample_class_image(dims, static_cast<int>(task.label), noise_sigma, rng.next_u64());

    // Rectangle covering 25-75% of the area, by rejection.
    int w = 0, h = 0;
    do {
      w = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.width)));
      h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.height)));
    } while (4 * w * h < total || 4 * w * h > 3 * total);
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.width - w + 1)));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.height - h + 1)));
    task.mask = Mask(dims.width, dims.height);
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) task.mask.at(x, y) = 1.0;
    tasks.push_back(std::move(task));
  }
  return tasks;
}

Tensor to_model_space(const Image& img) {
  check_image(img);
  return Tensor(img.data.array() * 2.0 - 1.0, {img.height, img.width, 3});
}

Image from_model_space(const Tensor& t, int width, int height) {
  require(t.size() == Eigen::Index{3} * width * height, "shape-mismatch",
          "model-space tensor has " + std::to_string(t.size()) + " values, expected " +
              std::to_string(3 * width * height));
  Image img(width, height);
  img.data = ((t.data.array() + 1.0) * 0.5).cwiseMax(0.0).cwiseMin(1.0);
  return img;
}

Image blend(const Image& generated, const Image& source, const Mask& mask) {
  require(generated.width == source.width && generated.height == source.height && mask.width == source.width &&
              mask.height == source.height,
          "shape-mismatch",
          "blend inputs differ in size: generated " + std::to_string(generated.width) + "x" +
              std::to_string(generated.height) + ", source " + std::to_string(source.width) + "x" +
              std::to_string(source.height) + ", mask " + std::to_string(mask.width) + "x" +
              std::to_string(mask.height));
  Image out(source.width, source.height);
  for (Eigen::Index p = 0; p < source.pixels(); ++p) {
    const double m = mask.data[p];
    out.data.segment<3>(3 * p) = m * generated.pixel(p) + (1.0 - m) * source.pixel(p);
  }
  return out;
}

Image masked_view(const InpaintTask& task) {
  Image out = task.source;
  for (Eigen::Index p = 0; p < out.pixels(); ++p)
    if (task.mask.data[p] > 0.5) out.data.segment<3>(3 * p).setConstant(0.5);
  return out;
}

void check_image(const Image& img) {
  require(img.width > 0 && img.height > 0 && img.data.size() == img.pixels() * 3, "shape-mismatch",
          "image buffer does not match its " + std::to_string(img.width) + "x" + std::to_string(img.height) +
              " geometry");
  require(img.data.allFinite() && img.data.minCoeff() >= 0.0 && img.data.maxCoeff() <= 1.0, "invalid-image",
          "image values must be finite and lie in [0,1]");
}

void check_task(const InpaintTask& task, const WorldDims& dims) {
  check_image(task.source);
  require(task.source.width == dims.width && task.source.height == dims.height, "shape-mismatch",
          "task " + std::to_string(task.task_id) + " image size differs from the configured world");
  require(task.mask.width == dims.width && task.mask.height == dims.height, "shape-mismatch",
          "task " + std::to_string(task.task_id) + " mask size differs from the configured world");
  require(task.label < static_cast<std::uint32_t>(dims.num_classes), "invalid-task",
          "task " + std::to_string(task.task_id) + " label out of range");
  const double cov = task.mask.coverage();
  require(((task.mask.data.array() == 0.0) || (task.mask.data.array() == 1.0)).all() && cov > 0.0 && cov < 1.0,
          "invalid-task", "task " + std::to_string(task.task_id) + " mask must be binary with both values present");
}

}  // namespace prefalign
