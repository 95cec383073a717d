#include "disc/gradcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "disc/gradcore/rng.hpp"

namespace disc {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::string consumer_op(const Graph<double> &g, NodeId param) {
  for (NodeId id = param + 1; id < g.size(); ++id)
    for (auto in : g.inputs(id))
      if (in == param)
        return std::string(op_name(g.kind(id)));
  return "unused";
}

} // namespace

GradCheckReport finite_diff_check(const LossBuilder &build, const std::vector<CheckedParameter> &parameters,
                                  const GradCheckOptions &options) {
  if (!(options.h > 0))
    throw std::invalid_argument("finite_diff_check: h must be positive");

  Graph<double> graph;
  const NodeId loss = build(graph);
  graph.backward(loss);

  GradCheckReport report;
  Rng rng = keyed_rng(options.seed, {0x67636b});
  for (const auto &param : parameters) {
    Tensor<double> &theta = *param.storage;
    Tensor<double> analytic(theta.shape());
    std::string op = "unused";
    if (auto id = graph.find_parameter(param.name)) {
      analytic = graph.parameter_grad(param.name);
      op = consumer_op(graph, *id);
    }

    std::vector<std::size_t> coords(theta.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coordinates_per_parameter > 0 && coords.size() > options.max_coordinates_per_parameter) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates_per_parameter);
      std::sort(coords.begin(), coords.end());
    }

    for (auto i : coords) {
      const double saved = theta[i];
      theta[i] = saved + options.h;
      Graph<double> plus;
      const double f_plus = plus.value(build(plus))[0];
      theta[i] = saved - options.h;
      Graph<double> minus;
      const double f_minus = minus.value(build(minus))[0];
      theta[i] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * options.h);
      const double err = relative_error(analytic[i], numeric);
      ++report.coordinates_checked;
      auto &op_err = report.per_op_errors[op];
      op_err = std::max(op_err, err);
      if (report.worst_parameter.empty() || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = param.name;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

} // namespace disc
