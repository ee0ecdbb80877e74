#include "mtc/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "mtc/rng.hpp"

namespace mtc::check {

GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor> inputs, double eps,
                           std::size_t max_coords_per_input, std::uint64_t seed) {
    if (eps <= 0.0) throw ValueError("grad_check: eps must be positive");

    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }

    Tape tape;
    {
        Tape::Scope scope(tape);
        Tensor loss = f(inputs);
        tape.backward(loss);
    }

    Rng rng(seed);
    GradCheckResult result;
    for (auto& t : inputs) {
        const std::size_t n = t.numel();
        std::vector<std::size_t> coords;
        if (max_coords_per_input == 0 || max_coords_per_input >= n) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            coords.reserve(max_coords_per_input);
            for (std::size_t i = 0; i < max_coords_per_input; ++i)
                coords.push_back(static_cast<std::size_t>(rng.below(n)));
        }
        const double* analytic = t.grad();
        for (std::size_t i : coords) {
            const double saved = t.at(i);
            t.at(i) = saved + eps;
            const double up = f(inputs).item();
            t.at(i) = saved - eps;
            const double down = f(inputs).item();
            t.at(i) = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[i];
            const double m = std::max(std::fabs(a), std::fabs(numeric));
            const double err = m >= 1e-8 ? std::fabs(a - numeric) / m : std::fabs(a - numeric);
            result.max_rel_err = std::max(result.max_rel_err, err);
            ++result.coords_checked;
        }
    }
    return result;
}

}  // namespace mtc::check
