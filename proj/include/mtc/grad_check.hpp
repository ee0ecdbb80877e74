#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mtc/tensor.hpp"

namespace mtc::check {

// Compares tape gradients against central finite differences.
//
// f must be a pure scalar-valued function of the given inputs: it is called
// once under a tape for the analytic pass and repeatedly without a tape for
// the numeric probes. Relative error |a - n| / max(|a|, |n|) is reported per
// coordinate, falling back to the absolute difference when both magnitudes
// sit below 1e-8 (deep chains shrink true gradients under the finite-
// difference noise floor, where a ratio is meaningless).
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// max_coords_per_input == 0 checks every coordinate; otherwise that many
// coordinates are sampled per input with the seeded generator.
GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor> inputs,
                           double eps = 1e-5, std::size_t max_coords_per_input = 0,
                           std::uint64_t seed = 1234567);

}  // namespace mtc::check
