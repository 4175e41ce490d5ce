#include "prefalign/checkpoint.hpp"

#include "prefalign/binary_io.hpp"
#include "prefalign/error.hpp"

namespace prefalign {

namespace {
constexpr std::string_view kMagic = "PFC1";
constexpr std::uint16_t kVersion = 1;
}  // namespace

void round_to_storage(MlpParams<double>& params) {
  for (auto& l : params.layers) {
    l.weight = l.weight.cast<float>().cast<double>();
    l.bias = l.bias.cast<float>().cast<double>();
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const auto& spec = ckpt.model.spec;
  const auto& net = ckpt.model.net;
  ByteWriter w;
  w.raw(kMagic);
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(spec.tag));
  w.u32(static_cast<std::uint32_t>(spec.dims.width));
  w.u32(static_cast<std::uint32_t>(spec.dims.height));
  w.u32(static_cast<std::uint32_t>(spec.dims.num_classes));
  w.u32(static_cast<std::uint32_t>(spec.timesteps));
  w.f64(spec.beta_start);
  w.f64(spec.beta_end);
  w.u32(static_cast<std::uint32_t>(spec.flow_steps));
  w.u64(spec.init_seed);
  w.u8(static_cast<std::uint8_t>(net.activation));
  w.u32(static_cast<std::uint32_t>(net.layers.size() + 1));
  w.u32(static_cast<std::uint32_t>(net.input_dim()));
  for (const auto& l : net.layers) w.u32(static_cast<std::uint32_t>(l.out_dim()));
  w.u64(ckpt.config_hash);
  w.u64(ckpt.step);
  for (const auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f32(static_cast<float>(l.weight(r, c)));
    w.f32_array(l.bias);
  }
  w.checksum();
  return w.bytes();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "PFC1 checkpoint");
  if (bytes.size() < kMagic.size() || r.raw(kMagic.size()) != kMagic)
    fail("bad-magic", "not a PFC1 checkpoint (magic bytes do not match)");
  const std::uint16_t version = r.u16();
  if (version != kVersion)
    fail("version-mismatch", "PFC1 version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kVersion) + ")");
  Checkpoint ckpt;
  auto& spec = ckpt.model.spec;
  const std::uint8_t tag = r.u8();
  require(tag == 1 || tag == 2, "invalid-file", "PFC1 has unknown generator tag " + std::to_string(tag));
  spec.tag = static_cast<GeneratorTag>(tag);
  spec.dims.width = static_cast<int>(r.u32());
  spec.dims.height = static_cast<int>(r.u32());
  spec.dims.num_classes = static_cast<int>(r.u32());
  spec.timesteps = static_cast<int>(r.u32());
  spec.beta_start = r.f64();
  spec.beta_end = r.f64();
  spec.flow_steps = static_cast<int>(r.u32());
  spec.init_seed = r.u64();
  const std::uint8_t act = r.u8();
  require(act <= 1, "invalid-file", "PFC1 has unknown activation " + std::to_string(act));
  const std::uint32_t n_dims = r.count(4);
  require(n_dims >= 2 && n_dims <= 64, "invalid-file", "PFC1 layer count is invalid");
  std::vector<Eigen::Index> dims;
  for (std::uint32_t i = 0; i < n_dims; ++i) dims.push_back(static_cast<Eigen::Index>(r.u32()));
  require(spec.dims.width > 0 && spec.dims.height > 0 && spec.dims.num_classes >= 2, "invalid-file",
          "PFC1 header has invalid world dimensions");
  require(dims.front() == denoiser_input_dim(spec.dims) && dims.back() == spec.dims.image_size(), "invalid-file",
          "PFC1 network dimensions do not match the image geometry");
  spec.hidden.assign(dims.begin() + 1, dims.end() - 1);
  ckpt.config_hash = r.u64();
  ckpt.step = r.u64();

  ckpt.model.schedule = NoiseSchedule::linear(spec.timesteps, spec.beta_start, spec.beta_end);
  auto& net = ckpt.model.net;
  net.activation = static_cast<Activation>(act);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    require(dims[i] > 0 && dims[i + 1] > 0, "invalid-file", "PFC1 has a zero-width layer");
    const std::size_t need = static_cast<std::size_t>(dims[i + 1] * (dims[i] + 1)) * 4;
    if (need > r.remaining()) fail("truncated", "PFC1 checkpoint: weights of layer " + std::to_string(i) + " are cut off");
    DenseLayer<double> layer{Eigen::MatrixXd(dims[i + 1], dims[i]), Eigen::VectorXd()};
    for (Eigen::Index row = 0; row < layer.weight.rows(); ++row)
      for (Eigen::Index col = 0; col < layer.weight.cols(); ++col) layer.weight(row, col) = r.f32();
    layer.bias = r.f32_array(dims[i + 1]);
    net.layers.push_back(std::move(layer));
  }
  r.verify_checksum();
  r.expect_end();
  require(net.all_finite(), "invalid-file", "PFC1 weights are not finite");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace prefalign
