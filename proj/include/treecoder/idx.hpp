#pragma once

// IDX (MNIST) files: big-endian u32 magic, u32 dimension sizes, then unsigned
// bytes. Images use magic 0x00000803 with (count, rows, cols); labels use
// 0x00000801 with (count).

#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "treecoder/dataset.hpp"
#include "treecoder/errors.hpp"

namespace treecoder {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImageShape {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

namespace detail {

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

inline void write_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

inline void check_idx_size(std::size_t header, std::uint64_t payload, std::size_t actual, const char* what) {
  const std::uint64_t expected = header + payload;
  if (actual != expected)
    throw FormatError(std::string(what) + ": expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(actual));
}

}  // namespace detail

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Images scaled to [0, 1] by /255, one row per image, pixels row-major.
template <std::floating_point T = double>
Dataset<T> parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) detail::check_idx_size(16, 0, bytes.size(), "IDX image header");
  const auto magic = detail::read_be32(bytes, 0);
  if (magic != kIdxImageMagic)
    throw FormatError("bad IDX image magic " + detail::hex32(magic) + " (expected " +
                      detail::hex32(kIdxImageMagic) + ")");
  const IdxImageShape shape{detail::read_be32(bytes, 4), detail::read_be32(bytes, 8), detail::read_be32(bytes, 12)};
  const std::uint64_t dim = std::uint64_t{shape.rows} * shape.cols;
  detail::check_idx_size(16, std::uint64_t{shape.count} * dim, bytes.size(), "IDX image payload");
  if (dim == 0) throw FormatError("IDX image with zero pixels");

  Dataset<T> ds(Matrix<T>(shape.count, static_cast<std::size_t>(dim)));
  auto flat = ds.instances.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = static_cast<T>(bytes[16 + i]) / T{255};
  return ds;
}

inline std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) detail::check_idx_size(8, 0, bytes.size(), "IDX label header");
  const auto magic = detail::read_be32(bytes, 0);
  if (magic != kIdxLabelMagic)
    throw FormatError("bad IDX label magic " + detail::hex32(magic) + " (expected " +
                      detail::hex32(kIdxLabelMagic) + ")");
  const auto count = detail::read_be32(bytes, 4);
  detail::check_idx_size(8, count, bytes.size(), "IDX label payload");
  return {bytes.begin() + 8, bytes.end()};
}

template <std::floating_point T = double>
Dataset<T> load_idx_images(const std::string& path) {
  return parse_idx_images<T>(read_file_bytes(path));
}

inline std::vector<int> load_idx_labels(const std::string& path) { return parse_idx_labels(read_file_bytes(path)); }

/// Inverse of parse_idx_images for data on the 1/255 grid. Values are clamped
/// to [0, 1] and rounded to the nearest byte.
template <std::floating_point T>
std::vector<std::uint8_t> encode_idx_images(const Dataset<T>& ds, std::uint32_t rows, std::uint32_t cols) {
  if (std::uint64_t{rows} * cols != ds.dim()) throw StructuralError("rows * cols does not match dataset dimension");
  std::vector<std::uint8_t> out;
  out.reserve(16 + ds.instances.size());
  detail::write_be32(out, kIdxImageMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(ds.size()));
  detail::write_be32(out, rows);
  detail::write_be32(out, cols);
  for (T v : ds.instances.flat()) {
    const T c = std::clamp(v, T{0}, T{1});
    out.push_back(static_cast<std::uint8_t>(std::lround(c * T{255})));
  }
  return out;
}

inline std::vector<std::uint8_t> encode_idx_labels(const std::vector<int>& labels) {
  std::vector<std::uint8_t> out;
  detail::write_be32(out, kIdxLabelMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 255) throw InputError("label does not fit in a byte");
    out.push_back(static_cast<std::uint8_t>(l));
  }
  return out;
}

}  // namespace treecoder
