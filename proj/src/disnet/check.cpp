#include "disc/disnet/check.hpp"

#include "disc/disnet/loss.hpp"
#include "disc/gradcore/rng.hpp"

namespace disc::net {

GradCheckReport network_gradcheck(const NetSpec &spec, std::uint64_t seed, const GradCheckOptions &options) {
  spec.validate();
  const Network<double> network(spec);
  auto params = init_parameters<double>(spec, seed);
  const auto image = [&](std::uint64_t which) {
    Rng rng = keyed_rng(seed, {0x6763696d67ULL, which});
    Tensor<double> t(Shape{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]});
    for (auto &v : t.values())
      v = standard_normal(rng);
    return t;
  };
  const auto left = image(0), right = image(1);
  Labels labels;
  labels.category = seed % spec.num_categories;
  if (spec.kind == ModelKind::Disentangled)
    labels.pose = (seed / spec.num_categories) % spec.num_pose_labels;
  const LossBuilder build = [&](Graph<double> &g) {
    Rng l(1), r(2);
    if (spec.kind == ModelKind::Baseline)
      return composite_loss(g, network.build_single(g, params, left, Mode::Eval, l), labels).total;
    const auto nodes = network.build_pair(g, params, left, right, Mode::Eval, l, r);
    return composite_loss(g, nodes, labels, LossWeights{1.0, 0.1}, spec.tie_form).total;
  };
  std::vector<CheckedParameter> checked;
  for (auto &[name, t] : params.entries())
    checked.push_back({name, &t});
  return finite_diff_check(build, checked, options);
}

} // namespace disc::net
