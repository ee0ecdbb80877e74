#include "mtc/kernels.hpp"

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "mtc/errors.hpp"

namespace mtc::kernels {

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "?";
}

bool backend_supported(Backend b) {
    if (b == Backend::scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::avx2) return __builtin_cpu_supports("avx2") != 0;
#endif
    return false;
}

Backend detect_backend() {
    const char* env = std::getenv("MTC_SIMD");
    std::string mode = env && *env ? env : "auto";
    if (mode == "scalar") return Backend::scalar;
    if (mode == "avx2") {
        if (!backend_supported(Backend::avx2))
            throw ValueError("MTC_SIMD=avx2 requested but this CPU lacks AVX2");
        return Backend::avx2;
    }
    if (mode != "auto")
        throw ValueError("MTC_SIMD must be one of scalar|avx2|auto, got '" + mode + "'");
    return backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

namespace {
Backend& backend_ref() {
    static Backend b = detect_backend();
    return b;
}
}  // namespace

Backend active_backend() { return backend_ref(); }

void set_backend(Backend b) {
    if (!backend_supported(b))
        throw ValueError("backend '" + backend_name(b) + "' is not supported on this CPU");
    backend_ref() = b;
}

#if defined(__x86_64__) || defined(_M_X64)
#define MTC_DISPATCH(fn, ...)                                       \
    if (active_backend() == Backend::avx2) return avx2::fn(__VA_ARGS__); \
    return scalar::fn(__VA_ARGS__)
#else
#define MTC_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void conv2d_forward(const double* x, const double* w, const double* bias,
                    double* y, const ConvGeom& g) {
    if (g.kernel % 2 == 0) throw ValueError("conv2d kernel size must be odd");
    if (g.dilation == 0) throw ValueError("conv2d dilation must be >= 1");
    MTC_DISPATCH(conv2d_forward, x, w, bias, y, g);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    MTC_DISPATCH(add, a, b, out, n);
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
    MTC_DISPATCH(mul, a, b, out, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    MTC_DISPATCH(axpy, alpha, x, y, n);
}

void scale(double alpha, const double* x, double* y, std::size_t n) {
    MTC_DISPATCH(scale, alpha, x, y, n);
}

void relu(const double* x, double* y, std::size_t n) {
    MTC_DISPATCH(relu, x, y, n);
}

void relu_backward(const double* x, const double* gy, double* gx, std::size_t n) {
    MTC_DISPATCH(relu_backward, x, gy, gx, n);
}

double dot(const double* a, const double* b, std::size_t n) {
    MTC_DISPATCH(dot, a, b, n);
}

double sum(const double* x, std::size_t n) {
    MTC_DISPATCH(sum, x, n);
}

#undef MTC_DISPATCH

std::size_t thread_count() {
    const char* env = std::getenv("MTC_THREADS");
    long v = 0;
    if (env && *env) v = std::strtol(env, nullptr, 10);
    if (v <= 0) {
        unsigned hc = std::thread::hardware_concurrency();
        return hc ? hc : 1;
    }
    return static_cast<std::size_t>(v);
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (end <= begin) return;
    const std::size_t total = end - begin;
    const std::size_t threads = std::min(thread_count(), total);
    if (threads <= 1) {
        fn(begin, end);
        return;
    }
    // Chunk sizes depend only on (total, threads): the first `rem` chunks get
    // one extra item. Callers write disjoint ranges, so scheduling order
    // cannot change results.
    const std::size_t base = total / threads;
    const std::size_t rem = total % threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr err;
    std::mutex err_mu;
    std::size_t lo = begin;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t hi = lo + base + (t < rem ? 1 : 0);
        pool.emplace_back([&fn, &err, &err_mu, lo, hi] {
            try {
                fn(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mu);
                if (!err) err = std::current_exception();
            }
        });
        lo = hi;
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace mtc::kernels
