#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace nmdps::ad {

struct PrimitiveCheck {
  std::string op;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Finite-difference check of every primitive on `trials` random shapes each.
// Inputs are drawn from [-2, 2] (shifted positive for log) and nudged away
// from relu, clamp and k-max tie points.
std::vector<PrimitiveCheck> check_primitives(std::size_t trials, std::uint64_t seed,
                                             double epsilon = 1e-5,
                                             double tolerance = 1e-4);

}  // namespace nmdps::ad
