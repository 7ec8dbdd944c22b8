#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "braindec/errors.hpp"

namespace braindec {

enum class DType { f32, f64, i32, i64, boolean };

std::size_t dtype_size(DType dt) noexcept;
std::string_view dtype_name(DType dt) noexcept;

template <typename T>
constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::f32; }
template <> constexpr DType dtype_of<double>() { return DType::f64; }
template <> constexpr DType dtype_of<std::int32_t>() { return DType::i32; }
template <> constexpr DType dtype_of<std::int64_t>() { return DType::i64; }
template <> constexpr DType dtype_of<bool>() { return DType::boolean; }

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major n-d array with a dtype fixed at construction.
/// Bool elements are stored as one byte each (0 or 1), matching NPY '|b1'.
class Tensor {
 public:
  Tensor() : dtype_(DType::f32), shape_{0} {}
  Tensor(DType dtype, Shape shape);
  Tensor(DType dtype, Shape shape, std::vector<std::byte> bytes);

  template <typename T>
  static Tensor from(Shape shape, std::span<const T> values) {
    Tensor t(dtype_of<T>(), std::move(shape));
    if (values.size() != t.numel()) {
      throw ArgumentError("element count " + std::to_string(values.size()) +
                          " does not match shape " + shape_string(t.shape()));
    }
    if constexpr (std::is_same_v<T, bool>) {
      for (std::size_t i = 0; i < values.size(); ++i) t.bytes_[i] = std::byte{values[i] ? uint8_t{1} : uint8_t{0}};
    } else if (!values.empty()) {
      std::memcpy(t.bytes_.data(), values.data(), values.size_bytes());
    }
    return t;
  }

  template <typename T>
  static Tensor from(Shape shape, const std::vector<T>& values) {
    if constexpr (std::is_same_v<T, bool>) {
      Tensor t(DType::boolean, std::move(shape));
      if (values.size() != t.numel()) throw ArgumentError("element count does not match shape");
      for (std::size_t i = 0; i < values.size(); ++i) t.bytes_[i] = std::byte{values[i] ? uint8_t{1} : uint8_t{0}};
      return t;
    } else {
      return from<T>(std::move(shape), std::span<const T>(values));
    }
  }

  DType dtype() const noexcept { return dtype_; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return shape_numel(shape_); }
  std::size_t dim(std::size_t axis) const;

  std::span<const std::byte> bytes() const noexcept { return bytes_; }
  std::span<std::byte> bytes() noexcept { return bytes_; }

  /// Typed view; throws ArgumentError if T does not match the dtype.
  /// Not available for bool (use `bytes()`).
  template <typename T>
  std::span<const T> values() const {
    check<T>();
    return {reinterpret_cast<const T*>(bytes_.data()), numel()};
  }
  template <typename T>
  std::span<T> values() {
    check<T>();
    return {reinterpret_cast<T*>(bytes_.data()), numel()};
  }

  /// Element `i` (flat row-major) widened to double. Works for every dtype.
  double as_double(std::size_t i) const;
  /// Copy of all elements widened to double.
  std::vector<double> to_doubles() const;
  /// New tensor of `dtype` with values narrowed from `values` (same shape).
  static Tensor from_doubles(DType dtype, Shape shape, std::span<const double> values);

  /// Reinterprets the payload with a new shape of equal element count.
  void reshape(Shape shape);

  /// Rows of a rank-2 tensor (or 1 for rank-1 treated as a row vector).
  std::size_t rows() const;
  std::size_t cols() const;

  /// Bitwise equality of dtype, shape and payload.
  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    return a.dtype_ == b.dtype_ && a.shape_ == b.shape_ && a.bytes_ == b.bytes_;
  }

 private:
  template <typename T>
  void check() const {
    static_assert(!std::is_same_v<T, bool>, "use bytes() for bool tensors");
    if (dtype_of<T>() != dtype_) {
      throw ArgumentError(std::string("tensor dtype is ") + std::string(dtype_name(dtype_)) +
                          ", requested " + std::string(dtype_name(dtype_of<T>())));
    }
  }

  DType dtype_;
  Shape shape_;
  std::vector<std::byte> bytes_;
};

}  // namespace braindec
