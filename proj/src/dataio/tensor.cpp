#include "braindec/tensor.hpp"

#include <numeric>

namespace braindec {

std::size_t dtype_size(DType dt) noexcept {
  switch (dt) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::i32: return 4;
    case DType::i64: return 8;
    case DType::boolean: return 1;
  }
  return 0;
}

std::string_view dtype_name(DType dt) noexcept {
  switch (dt) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::i32: return "i32";
    case DType::i64: return "i64";
    case DType::boolean: return "bool";
  }
  return "?";
}

std::size_t shape_numel(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

Tensor::Tensor(DType dtype, Shape shape)
    : dtype_(dtype), shape_(std::move(shape)), bytes_(shape_numel(shape_) * dtype_size(dtype)) {}

Tensor::Tensor(DType dtype, Shape shape, std::vector<std::byte> bytes)
    : dtype_(dtype), shape_(std::move(shape)), bytes_(std::move(bytes)) {
  if (bytes_.size() != shape_numel(shape_) * dtype_size(dtype_)) {
    throw ArgumentError("payload of " + std::to_string(bytes_.size()) + " bytes does not match shape " +
                        shape_string(shape_) + " of " + std::string(dtype_name(dtype_)));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ArgumentError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(shape_.size()));
  }
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return 1;
  throw ArgumentError("expected a rank-1 or rank-2 tensor, got shape " + shape_string(shape_));
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  throw ArgumentError("expected a rank-1 or rank-2 tensor, got shape " + shape_string(shape_));
}

double Tensor::as_double(std::size_t i) const {
  const std::byte* p = bytes_.data() + i * dtype_size(dtype_);
  switch (dtype_) {
    case DType::f32: { float v; std::memcpy(&v, p, 4); return v; }
    case DType::f64: { double v; std::memcpy(&v, p, 8); return v; }
    case DType::i32: { std::int32_t v; std::memcpy(&v, p, 4); return static_cast<double>(v); }
    case DType::i64: { std::int64_t v; std::memcpy(&v, p, 8); return static_cast<double>(v); }
    case DType::boolean: return *p != std::byte{0} ? 1.0 : 0.0;
  }
  return 0.0;
}

std::vector<double> Tensor::to_doubles() const {
  std::vector<double> out(numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = as_double(i);
  return out;
}

Tensor Tensor::from_doubles(DType dtype, Shape shape, std::span<const double> values) {
  Tensor t(dtype, std::move(shape));
  if (values.size() != t.numel()) throw ArgumentError("element count does not match shape");
  std::byte* p = t.bytes_.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    switch (dtype) {
      case DType::f32: { float v = static_cast<float>(values[i]); std::memcpy(p + 4 * i, &v, 4); break; }
      case DType::f64: std::memcpy(p + 8 * i, &values[i], 8); break;
      case DType::i32: { auto v = static_cast<std::int32_t>(values[i]); std::memcpy(p + 4 * i, &v, 4); break; }
      case DType::i64: { auto v = static_cast<std::int64_t>(values[i]); std::memcpy(p + 8 * i, &v, 8); break; }
      case DType::boolean: p[i] = std::byte{values[i] != 0.0 ? uint8_t{1} : uint8_t{0}}; break;
    }
  }
  return t;
}

void Tensor::reshape(Shape shape) {
  if (shape_numel(shape) != numel()) {
    throw ArgumentError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

}  // namespace braindec
