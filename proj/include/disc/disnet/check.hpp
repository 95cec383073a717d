#pragma once

#include <cstdint>

#include "disc/disnet/netspec.hpp"
#include "disc/gradcore/gradcheck.hpp"

namespace disc::net {

/// Finite-difference check of the full network in double precision with
/// dropout off: a random image pair, both labels, weights (1, 0.1) for the
/// two-stream network; a single labelled image for the baseline.
GradCheckReport network_gradcheck(const NetSpec &spec, std::uint64_t seed, const GradCheckOptions &options);

} // namespace disc::net
