#include "disc/disnet/params.hpp"

#include <cmath>
#include <stdexcept>

#include "disc/common/ini.hpp"
#include "disc/gradcore/rng.hpp"

namespace disc::net {

template <typename T> void ParameterStore<T>::add(std::string name, Tensor<T> value) {
  if (contains(name))
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

template <typename T> bool ParameterStore<T>::contains(std::string_view name) const {
  for (const auto &e : entries_)
    if (e.first == name)
      return true;
  return false;
}

template <typename T> const Tensor<T> &ParameterStore<T>::at(std::string_view name) const {
  for (const auto &e : entries_)
    if (e.first == name)
      return e.second;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

template <typename T> Tensor<T> &ParameterStore<T>::at(std::string_view name) {
  return const_cast<Tensor<T> &>(std::as_const(*this).at(name));
}

template <typename T> std::size_t ParameterStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto &e : entries_)
    n += e.second.size();
  return n;
}

template class ParameterStore<float>;
template class ParameterStore<double>;

namespace names {
std::string conv_weight(std::size_t index) { return "conv" + std::to_string(index) + ".weight"; }
std::string conv_bias(std::size_t index) { return "conv" + std::to_string(index) + ".bias"; }
std::string fc_weight(std::size_t index) { return "fc" + std::to_string(index) + ".weight"; }
std::string fc_bias(std::size_t index) { return "fc" + std::to_string(index) + ".bias"; }
} // namespace names

bool is_head_parameter(std::string_view name) {
  return name.starts_with("category_head.") || name.starts_with("pose_head.");
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const NetSpec &spec) {
  std::vector<std::pair<std::string, Shape>> out;
  auto shape = spec.input_shape;
  std::size_t conv = 0, fc = 0;
  for (const auto &l : spec.layers) {
    if (l.kind == LayerKind::Conv) {
      ++conv;
      out.emplace_back(names::conv_weight(conv), Shape{l.units, shape[0], l.kernel, l.kernel});
      out.emplace_back(names::conv_bias(conv), Shape{l.units});
      shape = {l.units, (shape[1] + 2 * l.pad - l.kernel) / l.stride + 1,
               (shape[2] + 2 * l.pad - l.kernel) / l.stride + 1};
    } else if (l.kind == LayerKind::Pool) {
      shape = {shape[0], (shape[1] - l.kernel) / l.stride + 1, (shape[2] - l.kernel) / l.stride + 1};
    } else if (l.kind == LayerKind::Fc) {
      ++fc;
      out.emplace_back(names::fc_weight(fc), Shape{l.units, shape[0] * shape[1] * shape[2]});
      out.emplace_back(names::fc_bias(fc), Shape{l.units});
      shape = {l.units, 1, 1};
    }
  }
  out.emplace_back(names::category_weight, Shape{spec.num_categories, spec.category_inputs()});
  out.emplace_back(names::category_bias, Shape{spec.num_categories});
  if (spec.kind == ModelKind::Disentangled && spec.num_pose_labels > 0) {
    out.emplace_back(names::pose_weight, Shape{spec.num_pose_labels, 2 * spec.pose_units});
    out.emplace_back(names::pose_bias, Shape{spec.num_pose_labels});
  }
  return out;
}

template <typename T>
Tensor<T> init_tensor(const NetSpec &spec, const std::string &name, const Shape &shape, std::uint64_t seed) {
  Tensor<T> t(shape);
  if (name.ends_with(".bias"))
    return t;
  const std::size_t fan_in = t.size() / shape[0];
  const double std = spec.init_std > 0 ? spec.init_std : std::sqrt(2.0 / static_cast<double>(fan_in));
  Rng rng = keyed_rng(seed, {fnv1a64(name)});
  for (auto &v : t.values())
    v = static_cast<T>(std * standard_normal(rng));
  return t;
}

template <typename T> ParameterStore<T> init_parameters(const NetSpec &spec, std::uint64_t seed) {
  spec.validate();
  ParameterStore<T> store;
  store.seed = seed;
  for (const auto &[name, shape] : parameter_shapes(spec))
    store.add(name, init_tensor<T>(spec, name, shape, seed));
  return store;
}

template ParameterStore<float> init_parameters<float>(const NetSpec &, std::uint64_t);
template ParameterStore<double> init_parameters<double>(const NetSpec &, std::uint64_t);
template Tensor<float> init_tensor<float>(const NetSpec &, const std::string &, const Shape &, std::uint64_t);
template Tensor<double> init_tensor<double>(const NetSpec &, const std::string &, const Shape &, std::uint64_t);

} // namespace disc::net
