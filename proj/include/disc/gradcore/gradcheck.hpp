#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "disc/gradcore/graph.hpp"

namespace disc {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  /// Worst error among parameters consumed by each op kind.
  std::map<std::string, double> per_op_errors;
  std::size_t coordinates_checked = 0;
};

struct GradCheckOptions {
  double h = 1e-5;
  /// Coordinates probed per parameter tensor; 0 probes every coordinate.
  /// When sampling, coordinates are drawn without replacement from `seed`.
  std::size_t max_coordinates_per_parameter = 0;
  std::uint64_t seed = 0;
};

/// Builds a fresh double-precision graph over the checked parameters and
/// returns its scalar loss node. Called once for the analytic pass and twice
/// per probed coordinate.
using LossBuilder = std::function<NodeId(Graph<double> &)>;

struct CheckedParameter {
  std::string name;
  Tensor<double> *storage;
};

/// Central-difference check (f(x+h) - f(x-h)) / 2h against reverse mode,
/// with relative error |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport finite_diff_check(const LossBuilder &build, const std::vector<CheckedParameter> &parameters,
                                  const GradCheckOptions &options = {});

double relative_error(double analytic, double numeric);

} // namespace disc
