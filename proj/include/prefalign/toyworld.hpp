#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "prefalign/tensor.hpp"

namespace prefalign {

/// Image geometry and class count shared by every component of one experiment.
struct WorldDims {
  int width = 16;
  int height = 16;
  int num_classes = 4;

  Eigen::Index pixels() const { return Eigen::Index{width} * height; }
  Eigen::Index image_size() const { return 3 * pixels(); }

  friend bool operator==(const WorldDims&, const WorldDims&) = default;
};

/// 3-channel raster, interleaved RGB, row-major, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  Eigen::VectorXd data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(Eigen::VectorXd::Zero(Eigen::Index{3} * w * h)) {}
  static Image filled(int w, int h, const Eigen::Vector3d& rgb);

  Eigen::Index pixels() const { return Eigen::Index{width} * height; }
  Eigen::Index index(int x, int y, int c) const { return (Eigen::Index{y} * width + x) * 3 + c; }
  double& at(int x, int y, int c) { return data[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data[index(x, y, c)]; }

  /// Pixel p as a 3-vector (p = y * width + x).
  auto pixel(Eigen::Index p) const { return data.segment<3>(3 * p); }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
  }
};

/// Single-channel binary mask; 1 marks the region to inpaint.
struct Mask {
  int width = 0;
  int height = 0;
  Eigen::VectorXd data;

  Mask() = default;
  Mask(int w, int h, double value = 0.0)
      : width(w), height(h), data(Eigen::VectorXd::Constant(Eigen::Index{w} * h, value)) {}

  double& at(int x, int y) { return data[Eigen::Index{y} * width + x]; }
  double at(int x, int y) const { return data[Eigen::Index{y} * width + x]; }
  double coverage() const { return data.mean(); }

  friend bool operator==(const Mask& a, const Mask& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
  }
};

struct InpaintTask {
  std::uint32_t task_id = 0;
  Image source;
  Mask mask;
  std::uint32_t label = 0;

  friend bool operator==(const InpaintTask&, const InpaintTask&) = default;
};

/// Background color with a centered foreground rectangle; half extents are
/// fractions of the image size.
struct ClassPrototype {
  Eigen::Vector3d background;
  Eigen::Vector3d foreground;
  double half_width = 0.25;
  double half_height = 0.25;
};

/// Fixed palette: dark/muted, bright/muted, dark/vivid, bright/vivid for the
/// first four classes; further classes are derived deterministically. All
/// colors are multiples of 1/64 so they survive f32 storage unchanged.
ClassPrototype class_prototype(int label, int num_classes);
Image render_prototype(const ClassPrototype& proto, int width, int height);
Image prototype_image(const WorldDims& dims, int label);

/// Tasks [first_task_id, first_task_id + n_tasks). Task content depends only
/// on (seed, task_id), so disjoint id ranges give disjoint held-out sets.
std::vector<InpaintTask> make_dataset(std::uint64_t seed, const WorldDims& dims, int n_tasks, double noise_sigma,
                                      std::uint32_t first_task_id = 0);

/// Fresh draw of the data distribution for the given class and seed
/// (prototype + clamped Gaussian noise).
Image sample_class_image(const WorldDims& dims, int label, double noise_sigma, std::uint64_t seed);

/// [0,1] -> [-1,1], shape {height, width, 3}.
Tensor to_model_space(const Image& img);
/// [-1,1] -> [0,1] with clamping.
Image from_model_space(const Tensor& t, int width, int height);

Image blend(const Image& generated, const Image& source, const Mask& mask);
Image masked_view(const InpaintTask& task);

/// Rounds every pixel to the nearest f32 (the persistence precision).
void round_to_storage(Image& img);

void check_image(const Image& img);
void check_task(const InpaintTask& task, const WorldDims& dims);

}  // namespace prefalign
