#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "braindec/tensor.hpp"

namespace braindec::npy {

/// Parses an in-memory NPY image (format versions 1.0 and 2.0, little-endian).
/// Fortran-ordered payloads are remapped to row-major.
Tensor parse(std::span<const std::byte> file);

/// Serializes to NPY 1.0; data starts at a 64-byte boundary.
std::vector<std::byte> serialize(const Tensor& t);

/// The textual header dict (padded, newline-terminated) that `serialize` emits.
std::string header_text(const Tensor& t);
std::string header_text(DType dtype, const Shape& shape);

Tensor read(const std::filesystem::path& path);

struct Info {
  DType dtype;
  Shape shape;
  bool fortran_order;
  std::size_t data_offset;
};
/// Header only; the payload is not read.
Info read_info(const std::filesystem::path& path);
void write(const Tensor& t, const std::filesystem::path& path);

}  // namespace braindec::npy
