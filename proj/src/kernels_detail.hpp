#pragma once

#include <cstddef>

#include "mtc/kernels.hpp"

// Shared between the scalar and AVX2 translation units so that border pixels
// (where the SIMD path falls back to scalar) are produced by literally the
// same code and accumulation order.

namespace mtc::kernels::detail {

// One output pixel of the dilated convolution. x points at [in_c, H, W] for
// the current batch element, w at [in_c, k, k] for the current out channel.
inline double conv_pixel(const double* x, const double* w, double acc,
                         std::ptrdiff_t oh, std::ptrdiff_t ow,
                         std::ptrdiff_t in_c, std::ptrdiff_t H, std::ptrdiff_t W,
                         std::ptrdiff_t k, std::ptrdiff_t d) {
    const std::ptrdiff_t c = (k - 1) / 2;
    for (std::ptrdiff_t ic = 0; ic < in_c; ++ic) {
        const double* xc = x + ic * H * W;
        const double* wc = w + ic * k * k;
        for (std::ptrdiff_t kh = 0; kh < k; ++kh) {
            const std::ptrdiff_t ih = oh + d * (kh - c);
            if (ih < 0 || ih >= H) continue;
            const double* xrow = xc + ih * W;
            const double* wrow = wc + kh * k;
            for (std::ptrdiff_t kw = 0; kw < k; ++kw) {
                const std::ptrdiff_t iw = ow + d * (kw - c);
                if (iw < 0 || iw >= W) continue;
                acc += xrow[iw] * wrow[kw];
            }
        }
    }
    return acc;
}

}  // namespace mtc::kernels::detail
