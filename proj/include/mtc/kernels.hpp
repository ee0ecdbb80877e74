#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace mtc::kernels {

// ---------------------------------------------------------------------------
// Backend selection.
//
// Every kernel has a plain scalar implementation and (on x86-64) an AVX2
// variant. The dispatching entry points below pick the active backend at
// runtime; tests pin one backend at a time and compare results.
// ---------------------------------------------------------------------------

enum class Backend { scalar, avx2 };

std::string backend_name(Backend b);
bool backend_supported(Backend b);

// Best backend supported by this CPU, honoring the MTC_SIMD environment
// variable ("scalar", "avx2", or "auto").
Backend detect_backend();

Backend active_backend();
void set_backend(Backend b);  // throws ValueError if unsupported here

// ---------------------------------------------------------------------------
// 2-D dilated convolution, NCHW row-major, stride 1.
//
// Padding is implicit: output(oh, ow) sums x[oh + d*(kh - c), ow + d*(kw - c)]
// * w[kh, kw] over in-bounds taps only (c = (k-1)/2), which preserves the
// spatial size for odd k. Out-of-range taps are skipped, not substituted with
// zero, so scalar and SIMD paths agree bit for bit.
// ---------------------------------------------------------------------------

struct ConvGeom {
    std::size_t batch = 1;
    std::size_t in_c = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t out_c = 1;
    std::size_t kernel = 3;    // odd
    std::size_t dilation = 1;  // >= 1
};

// x: [batch, in_c, H, W], w: [out_c, in_c, k, k], bias: [out_c] or nullptr,
// y: [batch, out_c, H, W].
void conv2d_forward(const double* x, const double* w, const double* bias,
                    double* y, const ConvGeom& g);

// ---------------------------------------------------------------------------
// Elementwise kernels (length n, bit-exact across backends).
// ---------------------------------------------------------------------------

void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);  // y += alpha * x
void scale(double alpha, const double* x, double* y, std::size_t n); // y = alpha * x
void relu(const double* x, double* y, std::size_t n);
// gx += gy where x > 0
void relu_backward(const double* x, const double* gy, double* gx, std::size_t n);

// ---------------------------------------------------------------------------
// Reductions. The SIMD variants accumulate in four interleaved lanes, so they
// match the scalar result only up to rounding; equivalence tests use a 1e-12
// relative tolerance for these two.
// ---------------------------------------------------------------------------

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);

// Per-backend entry points (same contracts), exposed for equivalence tests.
namespace scalar {
void conv2d_forward(const double* x, const double* w, const double* bias,
                    double* y, const ConvGeom& g);
void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, const double* x, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_backward(const double* x, const double* gy, double* gx, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void conv2d_forward(const double* x, const double* w, const double* bias,
                    double* y, const ConvGeom& g);
void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, const double* x, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_backward(const double* x, const double* gy, double* gx, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace avx2
#endif

// ---------------------------------------------------------------------------
// Deterministic parallelism. Work is split into one contiguous chunk per
// thread; chunk boundaries depend only on (begin, end, thread count), and
// callers must write disjoint outputs, so results never depend on timing.
// Thread count comes from MTC_THREADS (0 or unset = hardware concurrency).
// ---------------------------------------------------------------------------

std::size_t thread_count();
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace mtc::kernels
