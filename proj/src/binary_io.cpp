#include "prefalign/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "prefalign/error.hpp"

namespace prefalign {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str16(std::string_view s) {
  require(s.size() <= 0xFFFF, "invalid-input", "string too long for a u16 length prefix");
  u16(static_cast<std::uint16_t>(s.size()));
  raw(s);
}

void ByteWriter::f32_array(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) f32(static_cast<float>(v[i]));
}

void ByteReader::need(std::size_t n) {
  if (remaining() < n)
    fail("truncated", what_ + ": file ends at byte " + std::to_string(bytes_.size()) + " while reading " +
                          std::to_string(n) + " bytes at offset " + std::to_string(pos_));
}

std::uint64_t ByteReader::get(int n) {
  need(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::raw(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::string ByteReader::str16() { return raw(u16()); }

Eigen::VectorXd ByteReader::f32_array(Eigen::Index n) {
  need(static_cast<std::size_t>(n) * 4);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = static_cast<double>(f32());
  return v;
}

std::uint32_t ByteReader::count(std::size_t min_record_bytes) {
  const std::uint32_t n = u32();
  if (min_record_bytes > 0 && static_cast<std::uint64_t>(n) * min_record_bytes > remaining())
    fail("truncated", what_ + ": record count " + std::to_string(n) + " at offset " + std::to_string(pos_ - 4) +
                          " exceeds the remaining " + std::to_string(remaining()) + " bytes");
  return n;
}

void ByteReader::verify_checksum() {
  const std::size_t body = pos_;
  const std::uint64_t stored = u64();
  const std::uint64_t actual = fnv1a64(bytes_.first(body));
  if (stored != actual)
    fail("checksum", what_ + ": checksum mismatch (stored " + std::to_string(stored) + ", computed " +
                         std::to_string(actual) + ")");
}

void ByteReader::expect_end() {
  if (remaining() != 0)
    fail("invalid-file", what_ + ": " + std::to_string(remaining()) + " unexpected trailing bytes");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("io", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail("io", "write failed for " + path.string());
}

}  // namespace prefalign
