#include <cstddef>

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "kernels_detail.hpp"
#include "mtc/kernels.hpp"

// Compiled with -mavx2 (and -ffp-contract=off like the rest of the tree).
// Multiplies and adds are kept as separate intrinsics -- no FMA -- so every
// lane performs the same sequence of double operations as the scalar kernel
// and the two backends match bit for bit on elementwise work and convolution.

namespace mtc::kernels::avx2 {

void conv2d_forward(const double* x, const double* w, const double* bias,
                    double* y, const ConvGeom& g) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
    const std::ptrdiff_t in_c = static_cast<std::ptrdiff_t>(g.in_c);
    const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(g.kernel);
    const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(g.dilation);
    const std::ptrdiff_t c = (k - 1) / 2;
    const std::ptrdiff_t pad = d * c;

    parallel_for(0, g.batch * g.out_c, [&](std::size_t lo_item, std::size_t hi_item) {
        for (std::size_t item = lo_item; item < hi_item; ++item) {
            const std::size_t n = item / g.out_c;
            const std::size_t oc = item % g.out_c;
            const double* xn = x + n * g.in_c * g.height * g.width;
            const double* wo = w + oc * g.in_c * g.kernel * g.kernel;
            double* yo = y + item * g.height * g.width;
            const double b = bias ? bias[oc] : 0.0;
            for (std::ptrdiff_t oh = 0; oh < H; ++oh) {
                double* yrow = yo + oh * W;
                // Left border: some column taps fall outside the image.
                const std::ptrdiff_t left = pad < W ? pad : W;
                std::ptrdiff_t ow = 0;
                for (; ow < left; ++ow) {
                    yrow[ow] = detail::conv_pixel(xn, wo, b, oh, ow, in_c, H, W, k, d);
                }
                // Interior: all column taps in bounds, 4 outputs per iteration.
                // Row taps may still leave the image; those rows are skipped,
                // mirroring the scalar helper's order exactly.
                const std::ptrdiff_t hi = W - pad;
                for (; ow + 4 <= hi; ow += 4) {
                    __m256d acc = _mm256_set1_pd(b);
                    for (std::ptrdiff_t ic = 0; ic < in_c; ++ic) {
                        const double* xc = xn + ic * H * W;
                        const double* wc = wo + ic * k * k;
                        for (std::ptrdiff_t kh = 0; kh < k; ++kh) {
                            const std::ptrdiff_t ih = oh + d * (kh - c);
                            if (ih < 0 || ih >= H) continue;
                            const double* xrow = xc + ih * W;
                            const double* wrow = wc + kh * k;
                            for (std::ptrdiff_t kw = 0; kw < k; ++kw) {
                                const std::ptrdiff_t iw = ow + d * (kw - c);
                                __m256d xv = _mm256_loadu_pd(xrow + iw);
                                __m256d wv = _mm256_set1_pd(wrow[kw]);
                                acc = _mm256_add_pd(acc, _mm256_mul_pd(xv, wv));
                            }
                        }
                    }
                    _mm256_storeu_pd(yrow + ow, acc);
                }
                // Interior remainder plus right border.
                for (; ow < W; ++ow) {
                    yrow[ow] = detail::conv_pixel(xn, wo, b, oh, ow, in_c, H, W, k, d);
                }
            }
        }
    });
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) y[i] = alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        // keep x where x > 0, else +0.0 -- matches the scalar ternary bitwise
        __m256d m = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(y + i, _mm256_and_pd(m, xv));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* gy, double* gx, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        __m256d gyv = _mm256_loadu_pd(gy + i);
        __m256d gxv = _mm256_loadu_pd(gx + i);
        __m256d m = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
        // blend keeps the original gx bits (not gx + 0.0) in masked-off lanes
        __m256d upd = _mm256_add_pd(gxv, gyv);
        _mm256_storeu_pd(gx + i, _mm256_blendv_pd(gxv, upd, m));
    }
    for (; i < n; ++i) {
        if (x[i] > 0.0) gx[i] += gy[i];
    }
}

namespace {

inline double hsum(__m256d v) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                               _mm256_loadu_pd(b + i)));
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

double sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

}  // namespace mtc::kernels::avx2

#endif  // x86-64
