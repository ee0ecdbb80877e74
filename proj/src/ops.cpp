#include "mtc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include "mtc/kernels.hpp"

namespace mtc::ops {

namespace {

namespace K = mtc::kernels;

bool grad_needed(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::active()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank)
        throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) +
                         ", got " + shape_str(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor y(a.shape());
    K::add(a.data(), b.data(), y.data(), y.numel());
    if (grad_needed({&a, &b})) {
        y.set_requires_grad(true);
        Tensor ac = a, bc = b, yc = y;
        Tape::active()->record([ac, bc, yc]() mutable {
            if (ac.requires_grad()) K::axpy(1.0, yc.grad(), ac.grad(), ac.numel());
            if (bc.requires_grad()) K::axpy(1.0, yc.grad(), bc.grad(), bc.numel());
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor y(a.shape());
    K::mul(a.data(), b.data(), y.data(), y.numel());
    if (grad_needed({&a, &b})) {
        y.set_requires_grad(true);
        Tensor ac = a, bc = b, yc = y;
        Tape::active()->record([ac, bc, yc]() mutable {
            const std::size_t n = yc.numel();
            const double* gy = yc.grad();
            if (ac.requires_grad()) {
                double* ga = ac.grad();
                const double* bv = bc.data();
                for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * bv[i];
            }
            if (bc.requires_grad()) {
                double* gb = bc.grad();
                const double* av = ac.data();
                for (std::size_t i = 0; i < n; ++i) gb[i] += gy[i] * av[i];
            }
        });
    }
    return y;
}

Tensor scalar_mul(double s, const Tensor& a) {
    Tensor y(a.shape());
    K::scale(s, a.data(), y.data(), y.numel());
    if (grad_needed({&a})) {
        y.set_requires_grad(true);
        Tensor ac = a, yc = y;
        Tape::active()->record([ac, yc, s]() mutable {
            K::axpy(s, yc.grad(), ac.grad(), ac.numel());
        });
    }
    return y;
}

Tensor sum(const Tensor& a) {
    Tensor y = Tensor::scalar(K::sum(a.data(), a.numel()));
    if (grad_needed({&a})) {
        y.set_requires_grad(true);
        Tensor ac = a, yc = y;
        Tape::active()->record([ac, yc]() mutable {
            const double g = yc.grad()[0];
            double* ga = ac.grad();
            for (std::size_t i = 0; i < ac.numel(); ++i) ga[i] += g;
        });
    }
    return y;
}

Tensor relu(const Tensor& a) {
    Tensor y(a.shape());
    K::relu(a.data(), y.data(), y.numel());
    if (grad_needed({&a})) {
        y.set_requires_grad(true);
        Tensor ac = a, yc = y;
        Tape::active()->record([ac, yc]() mutable {
            K::relu_backward(ac.data(), yc.grad(), ac.grad(), ac.numel());
        });
    }
    return y;
}

Tensor reshape(const Tensor& a, Shape target) {
    if (shape_numel(target) != a.numel())
        throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(target) +
                         " changes element count");
    Tensor y = Tensor::from_data(std::move(target), a.values());
    if (grad_needed({&a})) {
        y.set_requires_grad(true);
        Tensor ac = a, yc = y;
        Tape::active()->record([ac, yc]() mutable {
            K::axpy(1.0, yc.grad(), ac.grad(), ac.numel());
        });
    }
    return y;
}

Tensor flatten2d(const Tensor& a) {
    if (a.rank() < 2) throw ShapeError("flatten2d needs rank >= 2, got " + shape_str(a.shape()));
    return reshape(a, {a.extent(0), a.numel() / a.extent(0)});
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t dilation) {
    require_rank(x, 4, "conv2d input");
    require_rank(w, 4, "conv2d weights");
    require_rank(b, 1, "conv2d bias");
    if (w.extent(2) != w.extent(3))
        throw ShapeError("conv2d kernel must be square, got " + shape_str(w.shape()));
    if (w.extent(2) % 2 == 0)
        throw ValueError("conv2d kernel size must be odd, got " + std::to_string(w.extent(2)));
    if (dilation == 0) throw ValueError("conv2d dilation must be >= 1");
    if (w.extent(1) != x.extent(1))
        throw ShapeError("conv2d channel mismatch: input has " + std::to_string(x.extent(1)) +
                         ", weights expect " + std::to_string(w.extent(1)));
    if (b.extent(0) != w.extent(0))
        throw ShapeError("conv2d bias size " + std::to_string(b.extent(0)) +
                         " != out channels " + std::to_string(w.extent(0)));

    K::ConvGeom g;
    g.batch = x.extent(0);
    g.in_c = x.extent(1);
    g.height = x.extent(2);
    g.width = x.extent(3);
    g.out_c = w.extent(0);
    g.kernel = w.extent(2);
    g.dilation = dilation;

    Tensor y({g.batch, g.out_c, g.height, g.width});
    K::conv2d_forward(x.data(), w.data(), b.data(), y.data(), g);

    if (grad_needed({&x, &w, &b})) {
        y.set_requires_grad(true);
        Tensor xc = x, wc = w, bc = b, yc = y;
        Tape::active()->record([xc, wc, bc, yc, g]() mutable {
            const double* gy = yc.grad();
            const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(g.kernel);
            const std::ptrdiff_t c = (k - 1) / 2;
            const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(g.dilation);
            const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
            const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);

            if (xc.requires_grad()) {
                // d(loss)/dx is itself a convolution of the output gradient
                // with the kernel flipped in both spatial axes and transposed
                // in its channel axes.
                std::vector<double> wf(wc.numel());
                const double* wv = wc.data();
                for (std::size_t oc = 0; oc < g.out_c; ++oc)
                    for (std::size_t ic = 0; ic < g.in_c; ++ic)
                        for (std::ptrdiff_t i = 0; i < k; ++i)
                            for (std::ptrdiff_t j = 0; j < k; ++j)
                                wf[((ic * g.out_c + oc) * g.kernel + (k - 1 - i)) * g.kernel +
                                   (k - 1 - j)] =
                                    wv[((oc * g.in_c + ic) * g.kernel + i) * g.kernel + j];
                K::ConvGeom gi = g;
                gi.in_c = g.out_c;
                gi.out_c = g.in_c;
                std::vector<double> gx(xc.numel());
                K::conv2d_forward(gy, wf.data(), nullptr, gx.data(), gi);
                K::axpy(1.0, gx.data(), xc.grad(), xc.numel());
            }

            if (wc.requires_grad()) {
                // gw[oc,ic,kh,kw] = sum over batch and valid pixels of
                // gy(n,oc,oh,ow) * x(n,ic,oh+d(kh-c),ow+d(kw-c)); the inner
                // column sum is a dot over a contiguous row segment.
                double* gw = wc.grad();
                const double* xv = xc.data();
                K::parallel_for(0, g.out_c * g.in_c * g.kernel * g.kernel,
                                [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t idx = lo; idx < hi; ++idx) {
                        const std::size_t kw = idx % g.kernel;
                        const std::size_t kh = (idx / g.kernel) % g.kernel;
                        const std::size_t ic = (idx / (g.kernel * g.kernel)) % g.in_c;
                        const std::size_t oc = idx / (g.kernel * g.kernel * g.in_c);
                        const std::ptrdiff_t dy = d * (static_cast<std::ptrdiff_t>(kh) - c);
                        const std::ptrdiff_t dx = d * (static_cast<std::ptrdiff_t>(kw) - c);
                        const std::ptrdiff_t ow_lo = dx < 0 ? -dx : 0;
                        const std::ptrdiff_t ow_hi = dx > 0 ? W - dx : W;
                        if (ow_lo >= ow_hi) continue;
                        double acc = 0.0;
                        for (std::size_t n = 0; n < g.batch; ++n) {
                            const double* gyp = gy + (n * g.out_c + oc) * g.height * g.width;
                            const double* xp = xv + (n * g.in_c + ic) * g.height * g.width;
                            for (std::ptrdiff_t oh = 0; oh < H; ++oh) {
                                const std::ptrdiff_t ih = oh + dy;
                                if (ih < 0 || ih >= H) continue;
                                acc += K::dot(gyp + oh * W + ow_lo,
                                              xp + ih * W + ow_lo + dx,
                                              static_cast<std::size_t>(ow_hi - ow_lo));
                            }
                        }
                        gw[idx] += acc;
                    }
                });
            }

            if (bc.requires_grad()) {
                double* gb = bc.grad();
                for (std::size_t n = 0; n < g.batch; ++n)
                    for (std::size_t oc = 0; oc < g.out_c; ++oc)
                        gb[oc] += K::sum(gy + (n * g.out_c + oc) * g.height * g.width,
                                         g.height * g.width);
            }
        });
    }
    return y;
}

Tensor maxpool2d(const Tensor& x) {
    require_rank(x, 4, "maxpool2d input");
    const std::size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    if (H % 2 != 0 || W % 2 != 0)
        throw ShapeError("maxpool2d requires even spatial dims, got " + shape_str(x.shape()));
    const std::size_t oh = H / 2, ow = W / 2;
    Tensor y({N, C, oh, ow});
    auto argmax = std::make_shared<std::vector<std::size_t>>(y.numel());
    const double* xv = x.data();
    double* yv = y.data();
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const double* xp = xv + nc * H * W;
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                std::size_t best = (2 * i) * W + 2 * j;
                double bv = xp[best];
                // remaining three cells in row-major order; strict > keeps
                // the first occurrence on ties
                const std::size_t cand[3] = {(2 * i) * W + 2 * j + 1,
                                             (2 * i + 1) * W + 2 * j,
                                             (2 * i + 1) * W + 2 * j + 1};
                for (std::size_t cidx : cand)
                    if (xp[cidx] > bv) {
                        bv = xp[cidx];
                        best = cidx;
                    }
                yv[(nc * oh + i) * ow + j] = bv;
                (*argmax)[(nc * oh + i) * ow + j] = nc * H * W + best;
            }
    }
    if (grad_needed({&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        Tape::active()->record([xc, yc, argmax]() mutable {
            const double* gy = yc.grad();
            double* gx = xc.grad();
            for (std::size_t i = 0; i < yc.numel(); ++i) gx[(*argmax)[i]] += gy[i];
        });
    }
    return y;
}

Tensor adaptive_maxpool2d(const Tensor& x, std::size_t th, std::size_t tw) {
    require_rank(x, 4, "adaptive_maxpool2d input");
    const std::size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    if (th == 0 || tw == 0) throw ValueError("adaptive_maxpool2d target must be positive");
    if (H < th || W < tw)
        throw ShapeError("adaptive_maxpool2d: input " + std::to_string(H) + "x" +
                         std::to_string(W) + " smaller than target " + std::to_string(th) +
                         "x" + std::to_string(tw) +
                         "; increase input size or shrink pool target");
    Tensor y({N, C, th, tw});
    auto argmax = std::make_shared<std::vector<std::size_t>>(y.numel());
    const double* xv = x.data();
    double* yv = y.data();
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const double* xp = xv + nc * H * W;
        for (std::size_t i = 0; i < th; ++i) {
            const std::size_t r0 = (i * H) / th;
            const std::size_t r1 = ((i + 1) * H + th - 1) / th;  // ceil
            for (std::size_t j = 0; j < tw; ++j) {
                const std::size_t c0 = (j * W) / tw;
                const std::size_t c1 = ((j + 1) * W + tw - 1) / tw;
                std::size_t best = r0 * W + c0;
                double bv = xp[best];
                for (std::size_t r = r0; r < r1; ++r)
                    for (std::size_t c = c0; c < c1; ++c)
                        if (xp[r * W + c] > bv) {
                            bv = xp[r * W + c];
                            best = r * W + c;
                        }
                yv[(nc * th + i) * tw + j] = bv;
                (*argmax)[(nc * th + i) * tw + j] = nc * H * W + best;
            }
        }
    }
    if (grad_needed({&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        Tape::active()->record([xc, yc, argmax]() mutable {
            const double* gy = yc.grad();
            double* gx = xc.grad();
            for (std::size_t i = 0; i < yc.numel(); ++i) gx[(*argmax)[i]] += gy[i];
        });
    }
    return y;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 2, "dense input");
    require_rank(w, 2, "dense weights");
    require_rank(b, 1, "dense bias");
    const std::size_t N = x.extent(0), in = x.extent(1), out = w.extent(0);
    if (w.extent(1) != in)
        throw ShapeError("dense: input dim " + std::to_string(in) + " != weight dim " +
                         std::to_string(w.extent(1)));
    if (b.extent(0) != out)
        throw ShapeError("dense: bias size " + std::to_string(b.extent(0)) +
                         " != output dim " + std::to_string(out));
    Tensor y({N, out});
    const double* xv = x.data();
    const double* wv = w.data();
    const double* bv = b.data();
    double* yv = y.data();
    K::parallel_for(0, N * out, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const std::size_t n = idx / out, o = idx % out;
            yv[idx] = bv[o] + K::dot(xv + n * in, wv + o * in, in);
        }
    });
    if (grad_needed({&x, &w, &b})) {
        y.set_requires_grad(true);
        Tensor xc = x, wc = w, bc = b, yc = y;
        Tape::active()->record([xc, wc, bc, yc, N, in, out]() mutable {
            const double* gy = yc.grad();
            if (xc.requires_grad()) {
                double* gx = xc.grad();
                const double* wv2 = wc.data();
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t o = 0; o < out; ++o)
                        K::axpy(gy[n * out + o], wv2 + o * in, gx + n * in, in);
            }
            if (wc.requires_grad()) {
                double* gw = wc.grad();
                const double* xv2 = xc.data();
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t o = 0; o < out; ++o)
                        K::axpy(gy[n * out + o], xv2 + n * in, gw + o * in, in);
            }
            if (bc.requires_grad()) {
                double* gb = bc.grad();
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t o = 0; o < out; ++o) gb[o] += gy[n * out + o];
            }
        });
    }
    return y;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_rank(a, 4, "concat_channels input");
    require_rank(b, 4, "concat_channels input");
    if (a.extent(0) != b.extent(0) || a.extent(2) != b.extent(2) ||
        a.extent(3) != b.extent(3))
        throw ShapeError("concat_channels: batch/spatial mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const std::size_t N = a.extent(0), Ca = a.extent(1), Cb = b.extent(1);
    const std::size_t hw = a.extent(2) * a.extent(3);
    Tensor y({N, Ca + Cb, a.extent(2), a.extent(3)});
    double* yv = y.data();
    for (std::size_t n = 0; n < N; ++n) {
        std::memcpy(yv + n * (Ca + Cb) * hw, a.data() + n * Ca * hw,
                    Ca * hw * sizeof(double));
        std::memcpy(yv + (n * (Ca + Cb) + Ca) * hw, b.data() + n * Cb * hw,
                    Cb * hw * sizeof(double));
    }
    if (grad_needed({&a, &b})) {
        y.set_requires_grad(true);
        Tensor ac = a, bc = b, yc = y;
        Tape::active()->record([ac, bc, yc, N, Ca, Cb, hw]() mutable {
            const double* gy = yc.grad();
            for (std::size_t n = 0; n < N; ++n) {
                if (ac.requires_grad())
                    K::axpy(1.0, gy + n * (Ca + Cb) * hw, ac.grad() + n * Ca * hw, Ca * hw);
                if (bc.requires_grad())
                    K::axpy(1.0, gy + (n * (Ca + Cb) + Ca) * hw, bc.grad() + n * Cb * hw,
                            Cb * hw);
            }
        });
    }
    return y;
}

Tensor softmax(const Tensor& logits) {
    require_rank(logits, 2, "softmax input");
    const std::size_t N = logits.extent(0), C = logits.extent(1);
    Tensor y({N, C});
    const double* z = logits.data();
    double* p = y.data();
    for (std::size_t n = 0; n < N; ++n) {
        const double* zr = z + n * C;
        double* pr = p + n * C;
        double m = zr[0];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, zr[c]);
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            pr[c] = std::exp(zr[c] - m);
            s += pr[c];
        }
        for (std::size_t c = 0; c < C; ++c) pr[c] /= s;
    }
    if (grad_needed({&logits})) {
        y.set_requires_grad(true);
        Tensor zc = logits, yc = y;
        Tape::active()->record([zc, yc, N, C]() mutable {
            const double* gp = yc.grad();
            const double* pv = yc.data();
            double* gz = zc.grad();
            for (std::size_t n = 0; n < N; ++n) {
                const double* gpr = gp + n * C;
                const double* pr = pv + n * C;
                double dotv = 0.0;
                for (std::size_t c = 0; c < C; ++c) dotv += gpr[c] * pr[c];
                for (std::size_t c = 0; c < C; ++c)
                    gz[n * C + c] += pr[c] * (gpr[c] - dotv);
            }
        });
    }
    return y;
}

Tensor mse_density_loss(const Tensor& pred, const Tensor& gt) {
    require_same_shape(pred, gt, "mse_density_loss");
    if (pred.rank() < 1) throw ShapeError("mse_density_loss needs rank >= 1");
    const double N = static_cast<double>(pred.extent(0));
    const std::size_t n = pred.numel();
    const double* pv = pred.data();
    const double* gv = gt.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pv[i] - gv[i];
        acc += d * d;
    }
    Tensor y = Tensor::scalar(acc / (2.0 * N));
    if (grad_needed({&pred, &gt})) {
        y.set_requires_grad(true);
        Tensor pc = pred, gc = gt, yc = y;
        Tape::active()->record([pc, gc, yc, N, n]() mutable {
            const double g = yc.grad()[0] / N;
            const double* pv2 = pc.data();
            const double* gv2 = gc.data();
            if (pc.requires_grad()) {
                double* gp = pc.grad();
                for (std::size_t i = 0; i < n; ++i) gp[i] += g * (pv2[i] - gv2[i]);
            }
            if (gc.requires_grad()) {
                double* gg = gc.grad();
                for (std::size_t i = 0; i < n; ++i) gg[i] -= g * (pv2[i] - gv2[i]);
            }
        });
    }
    return y;
}

namespace {

void check_labels(const std::vector<int>& labels, std::size_t N, std::size_t C) {
    if (labels.size() != N)
        throw ShapeError("labels size " + std::to_string(labels.size()) +
                         " != batch size " + std::to_string(N));
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= C)
            throw ValueError("label " + std::to_string(l) + " out of range [0, " +
                             std::to_string(C) + ")");
}

}  // namespace

Tensor cross_entropy_loss(const Tensor& probs, const std::vector<int>& labels,
                          bool batch_mean) {
    require_rank(probs, 2, "cross_entropy_loss probs");
    const std::size_t N = probs.extent(0), C = probs.extent(1);
    check_labels(labels, N, C);
    const double* pv = probs.data();
    for (std::size_t n = 0; n < N; ++n) {
        const double row = K::sum(pv + n * C, C);
        if (std::fabs(row - 1.0) > 1e-9)
            throw ValueError("cross_entropy_loss: row " + std::to_string(n) +
                             " sums to " + std::to_string(row) + ", not 1");
    }
    const double scale = batch_mean ? 1.0 / static_cast<double>(N) : 1.0;
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n)
        acc -= std::log(std::max(pv[n * C + labels[n]], kProbFloor));
    Tensor y = Tensor::scalar(acc * scale);
    if (grad_needed({&probs})) {
        y.set_requires_grad(true);
        Tensor pc = probs, yc = y;
        Tape::active()->record([pc, yc, labels, C, scale]() mutable {
            const double g = yc.grad()[0] * scale;
            const double* pv2 = pc.data();
            double* gp = pc.grad();
            for (std::size_t n = 0; n < labels.size(); ++n) {
                const double p = pv2[n * C + labels[n]];
                // the clamp is active below the floor, where d(loss)/dp = 0
                if (p > kProbFloor) gp[n * C + labels[n]] -= g / p;
            }
        });
    }
    return y;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             bool batch_mean) {
    require_rank(logits, 2, "softmax_cross_entropy logits");
    const std::size_t N = logits.extent(0), C = logits.extent(1);
    check_labels(labels, N, C);
    const double scale = batch_mean ? 1.0 / static_cast<double>(N) : 1.0;

    // stable row softmax kept for the backward closure
    auto probs = std::make_shared<std::vector<double>>(N * C);
    const double* z = logits.data();
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const double* zr = z + n * C;
        double* pr = probs->data() + n * C;
        double m = zr[0];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, zr[c]);
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            pr[c] = std::exp(zr[c] - m);
            s += pr[c];
        }
        for (std::size_t c = 0; c < C; ++c) pr[c] /= s;
        acc -= std::log(std::max(pr[labels[n]], kProbFloor));
    }
    Tensor y = Tensor::scalar(acc * scale);
    if (grad_needed({&logits})) {
        y.set_requires_grad(true);
        Tensor zc = logits, yc = y;
        Tape::active()->record([zc, yc, probs, labels, C, scale]() mutable {
            const double g = yc.grad()[0] * scale;
            double* gz = zc.grad();
            const double* pr = probs->data();
            for (std::size_t n = 0; n < labels.size(); ++n)
                for (std::size_t c = 0; c < C; ++c) {
                    const double ind = static_cast<std::size_t>(labels[n]) == c ? 1.0 : 0.0;
                    gz[n * C + c] += g * (pr[n * C + c] - ind);
                }
        });
    }
    return y;
}

Tensor combined_loss(const Tensor& l1, const Tensor& l2, double lambda) {
    if (lambda < 0.0) throw ValueError("combined_loss: lambda must be >= 0, got " +
                                       std::to_string(lambda));
    if (l1.numel() != 1 || l2.numel() != 1)
        throw ShapeError("combined_loss expects scalar losses");
    Tensor y = Tensor::scalar(l1.item() + lambda * l2.item());
    if (grad_needed({&l1, &l2})) {
        y.set_requires_grad(true);
        Tensor ac = l1, bc = l2, yc = y;
        Tape::active()->record([ac, bc, yc, lambda]() mutable {
            const double g = yc.grad()[0];
            if (ac.requires_grad()) ac.grad()[0] += g;
            if (bc.requires_grad()) bc.grad()[0] += lambda * g;
        });
    }
    return y;
}

}  // namespace mtc::ops
