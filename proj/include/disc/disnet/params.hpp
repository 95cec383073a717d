#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "disc/disnet/netspec.hpp"
#include "disc/gradcore/tensor.hpp"

namespace disc::net {

/// Named weight tensors in a fixed order. One store backs every stream of a
/// network; graphs bind its tensors by reference.
template <typename T> class ParameterStore {
public:
  using Entry = std::pair<std::string, Tensor<T>>;

  void add(std::string name, Tensor<T> value);
  bool contains(std::string_view name) const;
  const Tensor<T> &at(std::string_view name) const;
  Tensor<T> &at(std::string_view name);

  const std::vector<Entry> &entries() const noexcept { return entries_; }
  std::vector<Entry> &entries() noexcept { return entries_; }
  std::size_t parameter_count() const;

  std::uint64_t seed = 0;

  template <typename U> ParameterStore<U> cast() const {
    ParameterStore<U> out;
    out.seed = seed;
    for (const auto &[name, t] : entries_)
      out.add(name, t.template cast<U>());
    return out;
  }

  friend bool operator==(const ParameterStore &, const ParameterStore &) = default;

private:
  std::vector<Entry> entries_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

namespace names {
std::string conv_weight(std::size_t index);
std::string conv_bias(std::size_t index);
std::string fc_weight(std::size_t index);
std::string fc_bias(std::size_t index);
inline constexpr const char *category_weight = "category_head.weight";
inline constexpr const char *category_bias = "category_head.bias";
inline constexpr const char *pose_weight = "pose_head.weight";
inline constexpr const char *pose_bias = "pose_head.bias";
} // namespace names

bool is_head_parameter(std::string_view name);

/// Shapes of every parameter the spec needs, in store order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const NetSpec &spec);

/// Gaussian weights (std spec.init_std, or fan-in scaled when 0), zero
/// biases. Each tensor draws from its own stream keyed by (seed, name).
template <typename T> ParameterStore<T> init_parameters(const NetSpec &spec, std::uint64_t seed);

/// Re-draws one tensor with the initialization rule of init_parameters.
template <typename T>
Tensor<T> init_tensor(const NetSpec &spec, const std::string &name, const Shape &shape, std::uint64_t seed);

} // namespace disc::net
