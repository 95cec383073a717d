#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace disc {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape &shape);
std::string to_string(const Shape &shape);

/// Dense row-major tensor. The shape is fixed at construction; only the
/// values can change afterwards.
template <typename T> class Tensor {
public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{});
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, value); }

  const Shape &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T *data() noexcept { return values_.data(); }
  const T *data() const noexcept { return values_.data(); }

  T &operator[](std::size_t i) { return values_[i]; }
  const T &operator[](std::size_t i) const { return values_[i]; }

  /// Value of a single-element tensor.
  T item() const;

  void fill(T value);

  /// Copy with a different shape of equal element count.
  Tensor reshaped(Shape shape) const;

  template <typename U> Tensor<U> cast() const {
    std::vector<U> out(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i)
      out[i] = static_cast<U>(values_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor &, const Tensor &) = default;

private:
  Shape shape_;
  std::vector<T> values_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

} // namespace disc
