#include "disc/gradcore/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace disc {

std::size_t numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), values_(numel(shape_), fill) {
  for (auto d : shape_)
    if (d == 0)
      throw std::invalid_argument("tensor dimensions must be positive, got " + to_string(shape_));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto d : shape_)
    if (d == 0)
      throw std::invalid_argument("tensor dimensions must be positive, got " + to_string(shape_));
  if (values_.size() != numel(shape_))
    throw std::invalid_argument("tensor of shape " + to_string(shape_) + " needs " +
                                std::to_string(numel(shape_)) + " values, got " +
                                std::to_string(values_.size()));
}

template <typename T> T Tensor<T>::item() const {
  if (values_.size() != 1)
    throw std::invalid_argument("item() on tensor of shape " + to_string(shape_));
  return values_[0];
}

template <typename T> void Tensor<T>::fill(T value) { std::fill(values_.begin(), values_.end(), value); }

template <typename T> Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  return Tensor(std::move(shape), values_);
}

template class Tensor<float>;
template class Tensor<double>;

} // namespace disc
