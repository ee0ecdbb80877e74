#include <cstddef>

#include "kernels_detail.hpp"
#include "mtc/kernels.hpp"

namespace mtc::kernels::scalar {

void conv2d_forward(const double* x, const double* w, const double* bias,
                    double* y, const ConvGeom& g) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
    const std::ptrdiff_t in_c = static_cast<std::ptrdiff_t>(g.in_c);
    const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(g.kernel);
    const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(g.dilation);

    // One (batch, out channel) image per parallel work item; writes disjoint.
    parallel_for(0, g.batch * g.out_c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t item = lo; item < hi; ++item) {
            const std::size_t n = item / g.out_c;
            const std::size_t oc = item % g.out_c;
            const double* xn = x + n * g.in_c * g.height * g.width;
            const double* wo = w + oc * g.in_c * g.kernel * g.kernel;
            double* yo = y + item * g.height * g.width;
            const double b = bias ? bias[oc] : 0.0;
            for (std::ptrdiff_t oh = 0; oh < H; ++oh) {
                for (std::ptrdiff_t ow = 0; ow < W; ++ow) {
                    yo[oh * W + ow] =
                        detail::conv_pixel(xn, wo, b, oh, ow, in_c, H, W, k, d);
                }
            }
        }
    });
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* gy, double* gx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > 0.0) gx[i] += gy[i];
    }
}

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace mtc::kernels::scalar
