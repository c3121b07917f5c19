#include "msfum/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "msfum/gemm.hpp"

namespace msfum {

namespace {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    check(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

template <typename T>
void axpy(int64_t n, T alpha, const T* x, T* y) {
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// im2col for one sample: cols[Cin*kh*kw][Ho*Wo].
template <typename T>
void im2col(const T* x, int64_t cin, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t ho, int64_t wo, T* cols) {
    for (int64_t c = 0; c < cin; ++c) {
        const T* plane = x + c * h * w;
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                T* row = cols + ((c * kh + ky) * kw + kx) * (ho * wo);
                // valid ox range: 0 <= ox*stride + kx - pad < w
                int64_t ox_lo = 0;
                while (ox_lo < wo && ox_lo * stride + kx - pad < 0) ++ox_lo;
                int64_t ox_hi = wo;
                while (ox_hi > ox_lo && (ox_hi - 1) * stride + kx - pad >= w) --ox_hi;
                for (int64_t oy = 0; oy < ho; ++oy) {
                    const int64_t iy = oy * stride + ky - pad;
                    T* dst = row + oy * wo;
                    if (iy < 0 || iy >= h) {
                        std::memset(dst, 0, static_cast<size_t>(wo) * sizeof(T));
                        continue;
                    }
                    const T* src = plane + iy * w;
                    std::memset(dst, 0, static_cast<size_t>(ox_lo) * sizeof(T));
                    if (stride == 1) {
                        std::memcpy(dst + ox_lo, src + ox_lo + kx - pad,
                                    static_cast<size_t>(ox_hi - ox_lo) * sizeof(T));
                    } else {
                        for (int64_t ox = ox_lo; ox < ox_hi; ++ox) {
                            dst[ox] = src[ox * stride + kx - pad];
                        }
                    }
                    std::memset(dst + ox_hi, 0, static_cast<size_t>(wo - ox_hi) * sizeof(T));
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, int64_t cin, int64_t h, int64_t w, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t ho, int64_t wo, T* x) {
    for (int64_t c = 0; c < cin; ++c) {
        T* plane = x + c * h * w;
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                const T* row = cols + ((c * kh + ky) * kw + kx) * (ho * wo);
                for (int64_t oy = 0; oy < ho; ++oy) {
                    const int64_t iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    T* dst = plane + iy * w;
                    const T* src = row + oy * wo;
                    for (int64_t ox = 0; ox < wo; ++ox) {
                        const int64_t ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
T act_forward_scalar(T x, Act kind) {
    switch (kind) {
        case Act::silu:
            return x * sigmoid_scalar(x);
        case Act::sigmoid:
            return sigmoid_scalar(x);
        case Act::relu:
            return x > T(0) ? x : T(0);
        case Act::softplus:
            return softplus_scalar(x);
    }
    return T(0);
}

template <typename T>
T act_deriv_scalar(T x, Act kind) {
    switch (kind) {
        case Act::silu: {
            const T s = sigmoid_scalar(x);
            return s * (T(1) + x * (T(1) - s));
        }
        case Act::sigmoid: {
            const T s = sigmoid_scalar(x);
            return s * (T(1) - s);
        }
        case Act::relu:
            return x > T(0) ? T(1) : T(0);
        case Act::softplus:
            return sigmoid_scalar(x);
    }
    return T(0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> out(a.data());
    const T* pb = b.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
    auto pa = a.impl();
    auto pbn = b.impl();
    return Tensor<T>::make_node(a.shape(), std::move(out), {a, b},
                                [pa, pbn](const std::vector<T>& g, const GradSink<T>& sink) {
                                    if (pa->requires_grad) {
                                        auto& ga = sink(pa.get());
                                        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                                    }
                                    if (pbn->requires_grad) {
                                        auto& gb = sink(pbn.get());
                                        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                                    }
                                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    std::vector<T> out(a.data());
    const T* pb = b.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
    auto pa = a.impl();
    auto pbn = b.impl();
    return Tensor<T>::make_node(a.shape(), std::move(out), {a, b},
                                [pa, pbn](const std::vector<T>& g, const GradSink<T>& sink) {
                                    if (pa->requires_grad) {
                                        auto& ga = sink(pa.get());
                                        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                                    }
                                    if (pbn->requires_grad) {
                                        auto& gb = sink(pbn.get());
                                        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                                    }
                                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    std::vector<T> out(a.data());
    const T* pb = b.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
    auto pa = a.impl();
    auto pbn = b.impl();
    return Tensor<T>::make_node(a.shape(), std::move(out), {a, b},
                                [pa, pbn](const std::vector<T>& g, const GradSink<T>& sink) {
                                    if (pa->requires_grad) {
                                        auto& ga = sink(pa.get());
                                        const T* bv = pbn->value.data();
                                        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                                    }
                                    if (pbn->requires_grad) {
                                        auto& gb = sink(pbn.get());
                                        const T* av = pa->value.data();
                                        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                                    }
                                });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T s) {
    std::vector<T> out(x.data());
    for (auto& v : out) v *= s;
    auto px = x.impl();
    return Tensor<T>::make_node(x.shape(), std::move(out), {x},
                                [px, s](const std::vector<T>& g, const GradSink<T>& sink) {
                                    if (!px->requires_grad) return;
                                    auto& gx = sink(px.get());
                                    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
                                });
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind) {
    std::vector<T> out(x.data().size());
    const T* px = x.ptr();
    for (size_t i = 0; i < out.size(); ++i) out[i] = act_forward_scalar(px[i], kind);
    auto pimpl = x.impl();
    return Tensor<T>::make_node(x.shape(), std::move(out), {x},
                                [pimpl, kind](const std::vector<T>& g, const GradSink<T>& sink) {
                                    if (!pimpl->requires_grad) return;
                                    auto& gx = sink(pimpl.get());
                                    const T* xv = pimpl->value.data();
                                    for (size_t i = 0; i < g.size(); ++i) {
                                        gx[i] += g[i] * act_deriv_scalar(xv[i], kind);
                                    }
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.data()) acc += v;
    auto px = x.impl();
    return Tensor<T>::make_node({1}, {acc}, {x},
                                [px](const std::vector<T>& g, const GradSink<T>& sink) {
                                    if (!px->requires_grad) return;
                                    auto& gx = sink(px.get());
                                    for (auto& v : gx) v += g[0];
                                });
}

// ---------------------------------------------------------------------------
// Linear

namespace {

template <typename T>
Tensor<T> linear_impl(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b) {
    check(w.rank() == 2, "linear: weight must be 2-D, got " + shape_str(w.shape()));
    const int64_t dout = w.dim(0);
    const int64_t din = w.dim(1);
    check(x.rank() >= 1 && x.dim(-1) == din,
          "linear: last axis of x " + shape_str(x.shape()) + " must equal Din=" +
              std::to_string(din));
    if (b) {
        check(b->rank() == 1 && b->dim(0) == dout,
              "linear: bias shape " + shape_str(b->shape()) + " must be (" + std::to_string(dout) +
                  ")");
    }
    const int64_t m = x.numel() / din;

    std::vector<T> wt(static_cast<size_t>(din * dout));
    transpose(dout, din, w.ptr(), wt.data());
    std::vector<T> out(static_cast<size_t>(m * dout));
    gemm_nn(m, dout, din, x.ptr(), wt.data(), out.data(), false);
    if (b) {
        const T* pb = b->ptr();
        for (int64_t i = 0; i < m; ++i) {
            T* row = out.data() + i * dout;
            for (int64_t j = 0; j < dout; ++j) row[j] += pb[j];
        }
    }

    std::vector<int64_t> out_shape(x.shape());
    out_shape.back() = dout;

    auto px = x.impl();
    auto pw = w.impl();
    std::shared_ptr<TensorImpl<T>> pb = b ? b->impl() : nullptr;
    std::vector<Tensor<T>> parents{x, w};
    if (b) parents.push_back(*b);

    auto fn = [px, pw, pb, m, din, dout](const std::vector<T>& g, const GradSink<T>& sink) {
        if (px->requires_grad) {
            // dx[M,Din] = g[M,Dout] * w[Dout,Din]
            gemm_nn(m, din, dout, g.data(), pw->value.data(), sink(px.get()).data(), true);
        }
        if (pw->requires_grad) {
            // dW[Dout,Din] = g^T[Dout,M] * x[M,Din]
            std::vector<T> gt(static_cast<size_t>(m * dout));
            transpose(m, dout, g.data(), gt.data());
            gemm_nn(dout, din, m, gt.data(), px->value.data(), sink(pw.get()).data(), true);
        }
        if (pb && pb->requires_grad) {
            auto& gb = sink(pb.get());
            for (int64_t i = 0; i < m; ++i) {
                const T* row = g.data() + i * dout;
                for (int64_t j = 0; j < dout; ++j) gb[j] += row[j];
            }
        }
    };
    return Tensor<T>::make_node(std::move(out_shape), std::move(out), std::move(parents),
                                std::move(fn));
}

}  // namespace

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    return linear_impl(x, w, &b);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w) {
    return linear_impl<T>(x, w, nullptr);
}

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int64_t stride,
                 int64_t padding) {
    check(x.rank() == 4, "conv2d: input must be [N,Cin,H,W], got " + shape_str(x.shape()));
    check(w.rank() == 4, "conv2d: weight must be [Cout,Cin,kh,kw], got " + shape_str(w.shape()));
    check(stride >= 1, "conv2d: stride must be >= 1");
    check(padding >= 0, "conv2d: padding must be >= 0");
    const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wdt = x.dim(3);
    const int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    check(w.dim(1) == cin, "conv2d: channel axis mismatch, input Cin=" + std::to_string(cin) +
                               " vs weight Cin=" + std::to_string(w.dim(1)));
    check(b.rank() == 1 && b.dim(0) == cout,
          "conv2d: bias axis must be (Cout=" + std::to_string(cout) + "), got " +
              shape_str(b.shape()));
    check(h + 2 * padding - kh >= 0,
          "conv2d: height axis H=" + std::to_string(h) + " too small for kh=" +
              std::to_string(kh) + " pad=" + std::to_string(padding));
    check(wdt + 2 * padding - kw >= 0,
          "conv2d: width axis W=" + std::to_string(wdt) + " too small for kw=" +
              std::to_string(kw) + " pad=" + std::to_string(padding));
    const int64_t ho = (h + 2 * padding - kh) / stride + 1;
    const int64_t wo = (wdt + 2 * padding - kw) / stride + 1;
    const int64_t kdim = cin * kh * kw;
    const int64_t owh = ho * wo;

    std::vector<T> out(static_cast<size_t>(n * cout * owh));
    std::vector<T> cols(static_cast<size_t>(kdim * owh));
    for (int64_t i = 0; i < n; ++i) {
        im2col(x.ptr() + i * cin * h * wdt, cin, h, wdt, kh, kw, stride, padding, ho, wo,
               cols.data());
        T* out_n = out.data() + i * cout * owh;
        gemm_nn(cout, owh, kdim, w.ptr(), cols.data(), out_n, false);
        const T* pb = b.ptr();
        for (int64_t c = 0; c < cout; ++c) {
            T* row = out_n + c * owh;
            const T bias = pb[c];
            for (int64_t j = 0; j < owh; ++j) row[j] += bias;
        }
    }

    auto px = x.impl();
    auto pw = w.impl();
    auto pb = b.impl();
    auto fn = [px, pw, pb, n, cin, h, wdt, cout, kh, kw, stride, padding, ho, wo, kdim,
               owh](const std::vector<T>& g, const GradSink<T>& sink) {
        std::vector<T> cols;
        std::vector<T> colst;
        std::vector<T> wt;
        std::vector<T> dcols;
        if (pw->requires_grad || px->requires_grad) cols.resize(static_cast<size_t>(kdim * owh));
        if (pw->requires_grad) colst.resize(static_cast<size_t>(kdim * owh));
        if (px->requires_grad) {
            wt.resize(static_cast<size_t>(kdim * cout));
            transpose(cout, kdim, pw->value.data(), wt.data());
            dcols.resize(static_cast<size_t>(kdim * owh));
        }
        for (int64_t i = 0; i < n; ++i) {
            const T* g_n = g.data() + i * cout * owh;
            if (pw->requires_grad || px->requires_grad) {
                im2col(px->value.data() + i * cin * h * wdt, cin, h, wdt, kh, kw, stride, padding,
                       ho, wo, cols.data());
            }
            if (pw->requires_grad) {
                transpose(kdim, owh, cols.data(), colst.data());
                gemm_nn(cout, kdim, owh, g_n, colst.data(), sink(pw.get()).data(), true);
            }
            if (pb->requires_grad) {
                auto& gb = sink(pb.get());
                for (int64_t c = 0; c < cout; ++c) {
                    const T* row = g_n + c * owh;
                    T acc = T(0);
                    for (int64_t j = 0; j < owh; ++j) acc += row[j];
                    gb[c] += acc;
                }
            }
            if (px->requires_grad) {
                gemm_nn(kdim, owh, cout, wt.data(), g_n, dcols.data(), false);
                col2im_add(dcols.data(), cin, h, wdt, kh, kw, stride, padding, ho, wo,
                           sink(px.get()).data() + i * cin * h * wdt);
            }
        }
    };
    return Tensor<T>::make_node({n, cout, ho, wo}, std::move(out), {x, w, b}, std::move(fn));
}

// ---------------------------------------------------------------------------
// conv1d_depthwise

template <typename T>
Tensor<T> conv1d_depthwise(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           bool causal) {
    check(x.rank() == 3, "conv1d_depthwise: input must be [N,L,C], got " + shape_str(x.shape()));
    check(w.rank() == 2, "conv1d_depthwise: weight must be [C,k], got " + shape_str(w.shape()));
    const int64_t n = x.dim(0), l = x.dim(1), c = x.dim(2);
    const int64_t k = w.dim(1);
    check(k >= 1, "conv1d_depthwise: kernel size must be >= 1");
    check(w.dim(0) == c, "conv1d_depthwise: channel count mismatch, input C=" + std::to_string(c) +
                             " vs weight C=" + std::to_string(w.dim(0)));
    check(b.rank() == 1 && b.dim(0) == c, "conv1d_depthwise: bias must be (C)");
    check(causal, "conv1d_depthwise: only causal padding is implemented");

    // out[n,t,c] = b[c] + sum_j w[c,j] * x[n, t-(k-1)+j, c]
    std::vector<T> wt(static_cast<size_t>(k * c));
    transpose(c, k, w.ptr(), wt.data());

    std::vector<T> out(x.data().size());
    const T* px = x.ptr();
    const T* pb = b.ptr();
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t t = 0; t < l; ++t) {
            T* orow = out.data() + (i * l + t) * c;
            for (int64_t ch = 0; ch < c; ++ch) orow[ch] = pb[ch];
            for (int64_t j = 0; j < k; ++j) {
                const int64_t tl = t - (k - 1) + j;
                if (tl < 0) continue;
                const T* xrow = px + (i * l + tl) * c;
                const T* wrow = wt.data() + j * c;
                for (int64_t ch = 0; ch < c; ++ch) orow[ch] += wrow[ch] * xrow[ch];
            }
        }
    }

    auto pxi = x.impl();
    auto pwi = w.impl();
    auto pbi = b.impl();
    auto fn = [pxi, pwi, pbi, n, l, c, k](const std::vector<T>& g, const GradSink<T>& sink) {
        const T* xv = pxi->value.data();
        const T* wv = pwi->value.data();
        if (pbi->requires_grad) {
            auto& gb = sink(pbi.get());
            for (int64_t i = 0; i < n; ++i) {
                for (int64_t t = 0; t < l; ++t) {
                    const T* grow = g.data() + (i * l + t) * c;
                    for (int64_t ch = 0; ch < c; ++ch) gb[ch] += grow[ch];
                }
            }
        }
        if (pwi->requires_grad) {
            auto& gw = sink(pwi.get());
            for (int64_t i = 0; i < n; ++i) {
                for (int64_t t = 0; t < l; ++t) {
                    const T* grow = g.data() + (i * l + t) * c;
                    for (int64_t j = 0; j < k; ++j) {
                        const int64_t tl = t - (k - 1) + j;
                        if (tl < 0) continue;
                        const T* xrow = xv + (i * l + tl) * c;
                        for (int64_t ch = 0; ch < c; ++ch) gw[ch * k + j] += grow[ch] * xrow[ch];
                    }
                }
            }
        }
        if (pxi->requires_grad) {
            auto& gx = sink(pxi.get());
            for (int64_t i = 0; i < n; ++i) {
                for (int64_t t = 0; t < l; ++t) {
                    const T* grow = g.data() + (i * l + t) * c;
                    for (int64_t j = 0; j < k; ++j) {
                        const int64_t tl = t - (k - 1) + j;
                        if (tl < 0) continue;
                        T* gxrow = gx.data() + (i * l + tl) * c;
                        for (int64_t ch = 0; ch < c; ++ch) gxrow[ch] += grow[ch] * wv[ch * k + j];
                    }
                }
            }
        }
    };
    return Tensor<T>::make_node(x.shape(), std::move(out), {x, w, b}, std::move(fn));
}

// ---------------------------------------------------------------------------
// layer_norm

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    check(x.rank() == 3, "layer_norm: input must be [N,L,C], got " + shape_str(x.shape()));
    check(eps > T(0), "layer_norm: eps must be positive");
    const int64_t n = x.dim(0), l = x.dim(1), c = x.dim(2);
    check(gamma.rank() == 1 && gamma.dim(0) == c, "layer_norm: gamma must be (C)");
    check(beta.rank() == 1 && beta.dim(0) == c, "layer_norm: beta must be (C)");

    const int64_t tokens = n * l;
    std::vector<T> out(x.data().size());
    std::vector<T> means(static_cast<size_t>(tokens));
    std::vector<T> rstds(static_cast<size_t>(tokens));
    const T* px = x.ptr();
    const T* pg = gamma.ptr();
    const T* pbv = beta.ptr();
    for (int64_t t = 0; t < tokens; ++t) {
        const T* row = px + t * c;
        T mean = T(0);
        for (int64_t i = 0; i < c; ++i) mean += row[i];
        mean /= static_cast<T>(c);
        T var = T(0);
        for (int64_t i = 0; i < c; ++i) {
            const T d = row[i] - mean;
            var += d * d;
        }
        var /= static_cast<T>(c);
        const T rstd = T(1) / std::sqrt(var + eps);
        means[t] = mean;
        rstds[t] = rstd;
        T* orow = out.data() + t * c;
        for (int64_t i = 0; i < c; ++i) orow[i] = (row[i] - mean) * rstd * pg[i] + pbv[i];
    }

    auto pxi = x.impl();
    auto pgi = gamma.impl();
    auto pbi = beta.impl();
    auto fn = [pxi, pgi, pbi, tokens, c, means = std::move(means),
               rstds = std::move(rstds)](const std::vector<T>& g, const GradSink<T>& sink) {
        const T* xv = pxi->value.data();
        const T* gv = pgi->value.data();
        std::vector<T> xhat(static_cast<size_t>(c));
        for (int64_t t = 0; t < tokens; ++t) {
            const T* xrow = xv + t * c;
            const T* grow = g.data() + t * c;
            const T mean = means[t];
            const T rstd = rstds[t];
            for (int64_t i = 0; i < c; ++i) xhat[i] = (xrow[i] - mean) * rstd;
            if (pgi->requires_grad) {
                auto& gg = sink(pgi.get());
                for (int64_t i = 0; i < c; ++i) gg[i] += grow[i] * xhat[i];
            }
            if (pbi->requires_grad) {
                auto& gb = sink(pbi.get());
                for (int64_t i = 0; i < c; ++i) gb[i] += grow[i];
            }
            if (pxi->requires_grad) {
                auto& gx = sink(pxi.get());
                T m1 = T(0), m2 = T(0);
                for (int64_t i = 0; i < c; ++i) {
                    const T dh = grow[i] * gv[i];
                    m1 += dh;
                    m2 += dh * xhat[i];
                }
                m1 /= static_cast<T>(c);
                m2 /= static_cast<T>(c);
                T* gxrow = gx.data() + t * c;
                for (int64_t i = 0; i < c; ++i) {
                    const T dh = grow[i] * gv[i];
                    gxrow[i] += rstd * (dh - m1 - xhat[i] * m2);
                }
            }
        }
    };
    return Tensor<T>::make_node(x.shape(), std::move(out), {x, gamma, beta}, std::move(fn));
}

// ---------------------------------------------------------------------------
// global_avg_pool

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    check(x.rank() == 4, "global_avg_pool: input must be [N,C,H,W], got " + shape_str(x.shape()));
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    check(h >= 1 && w >= 1, "global_avg_pool: spatial axes must be non-empty");
    const int64_t hw = h * w;
    std::vector<T> out(static_cast<size_t>(n * c));
    const T* px = x.ptr();
    for (int64_t i = 0; i < n * c; ++i) {
        const T* plane = px + i * hw;
        T acc = T(0);
        for (int64_t j = 0; j < hw; ++j) acc += plane[j];
        out[static_cast<size_t>(i)] = acc / static_cast<T>(hw);
    }
    auto pxi = x.impl();
    auto fn = [pxi, n, c, hw](const std::vector<T>& g, const GradSink<T>& sink) {
        if (!pxi->requires_grad) return;
        auto& gx = sink(pxi.get());
        for (int64_t i = 0; i < n * c; ++i) {
            const T gv = g[static_cast<size_t>(i)] / static_cast<T>(hw);
            T* plane = gx.data() + i * hw;
            for (int64_t j = 0; j < hw; ++j) plane[j] += gv;
        }
    };
    return Tensor<T>::make_node({n, c}, std::move(out), {x}, std::move(fn));
}

// ---------------------------------------------------------------------------
// concat_channels

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
    check(!xs.empty(), "concat_channels: needs at least one input");
    const int64_t n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
    int64_t ctotal = 0;
    for (const auto& x : xs) {
        check(x.rank() == 4, "concat_channels: inputs must be [N,C,H,W]");
        check(x.dim(0) == n && x.dim(2) == h && x.dim(3) == w,
              "concat_channels: spatial/batch mismatch " + shape_str(x.shape()) + " vs " +
                  shape_str(xs[0].shape()));
        ctotal += x.dim(1);
    }
    const int64_t hw = h * w;
    std::vector<T> out(static_cast<size_t>(n * ctotal * hw));
    for (int64_t i = 0; i < n; ++i) {
        int64_t coff = 0;
        for (const auto& x : xs) {
            const int64_t ci = x.dim(1);
            std::memcpy(out.data() + (i * ctotal + coff) * hw, x.ptr() + i * ci * hw,
                        static_cast<size_t>(ci * hw) * sizeof(T));
            coff += ci;
        }
    }
    std::vector<std::shared_ptr<TensorImpl<T>>> impls;
    impls.reserve(xs.size());
    for (const auto& x : xs) impls.push_back(x.impl());
    auto fn = [impls, n, ctotal, hw](const std::vector<T>& g, const GradSink<T>& sink) {
        for (int64_t i = 0; i < n; ++i) {
            int64_t coff = 0;
            for (const auto& p : impls) {
                const int64_t ci = p->shape[1];
                if (p->requires_grad) {
                    auto& gx = sink(p.get());
                    const T* src = g.data() + (i * ctotal + coff) * hw;
                    T* dst = gx.data() + i * ci * hw;
                    for (int64_t j = 0; j < ci * hw; ++j) dst[j] += src[j];
                }
                coff += ci;
            }
        }
    };
    return Tensor<T>::make_node({n, ctotal, h, w}, std::move(out), xs, std::move(fn));
}

// ---------------------------------------------------------------------------
// scale_channels

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& gate) {
    check(x.rank() == 4, "scale_channels: input must be [N,C,H,W]");
    check(gate.rank() == 2 && gate.dim(0) == x.dim(0) && gate.dim(1) == x.dim(1),
          "scale_channels: gate must be [N,C] matching " + shape_str(x.shape()));
    const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<T> out(x.data().size());
    const T* px = x.ptr();
    const T* pg = gate.ptr();
    for (int64_t i = 0; i < n * c; ++i) {
        const T gv = pg[i];
        const T* src = px + i * hw;
        T* dst = out.data() + i * hw;
        for (int64_t j = 0; j < hw; ++j) dst[j] = src[j] * gv;
    }
    auto pxi = x.impl();
    auto pgi = gate.impl();
    auto fn = [pxi, pgi, n, c, hw](const std::vector<T>& g, const GradSink<T>& sink) {
        const T* xv = pxi->value.data();
        const T* gv = pgi->value.data();
        if (pxi->requires_grad) {
            auto& gx = sink(pxi.get());
            for (int64_t i = 0; i < n * c; ++i) {
                const T s = gv[i];
                const T* grow = g.data() + i * hw;
                T* dst = gx.data() + i * hw;
                for (int64_t j = 0; j < hw; ++j) dst[j] += grow[j] * s;
            }
        }
        if (pgi->requires_grad) {
            auto& gg = sink(pgi.get());
            for (int64_t i = 0; i < n * c; ++i) {
                const T* grow = g.data() + i * hw;
                const T* xrow = xv + i * hw;
                T acc = T(0);
                for (int64_t j = 0; j < hw; ++j) acc += grow[j] * xrow[j];
                gg[i] += acc;
            }
        }
    };
    return Tensor<T>::make_node(x.shape(), std::move(out), {x, gate}, std::move(fn));
}

// ---------------------------------------------------------------------------
// upsample_bilinear_x2

namespace {

struct LerpTap {
    int64_t i0, i1;
    double f;  // weight of i1
};

inline LerpTap lerp_tap(int64_t o, int64_t in_size) {
    double s = (static_cast<double>(o) + 0.5) * 0.5 - 0.5;
    if (s < 0) s = 0;
    const double mx = static_cast<double>(in_size - 1);
    if (s > mx) s = mx;
    const int64_t i0 = static_cast<int64_t>(s);
    const int64_t i1 = std::min(i0 + 1, in_size - 1);
    return {i0, i1, s - static_cast<double>(i0)};
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear_x2(const Tensor<T>& x) {
    check(x.rank() == 4, "upsample_bilinear_x2: input must be [N,C,H,W]");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t ho = h * 2, wo = w * 2;
    std::vector<LerpTap> ty(static_cast<size_t>(ho)), tx(static_cast<size_t>(wo));
    for (int64_t i = 0; i < ho; ++i) ty[static_cast<size_t>(i)] = lerp_tap(i, h);
    for (int64_t i = 0; i < wo; ++i) tx[static_cast<size_t>(i)] = lerp_tap(i, w);

    std::vector<T> out(static_cast<size_t>(n * c * ho * wo));
    const T* px = x.ptr();
    for (int64_t p = 0; p < n * c; ++p) {
        const T* plane = px + p * h * w;
        T* oplane = out.data() + p * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
            const auto& yt = ty[static_cast<size_t>(oy)];
            const T* r0 = plane + yt.i0 * w;
            const T* r1 = plane + yt.i1 * w;
            const T fy = static_cast<T>(yt.f);
            T* orow = oplane + oy * wo;
            for (int64_t ox = 0; ox < wo; ++ox) {
                const auto& xt = tx[static_cast<size_t>(ox)];
                const T fx = static_cast<T>(xt.f);
                const T top = r0[xt.i0] * (T(1) - fx) + r0[xt.i1] * fx;
                const T bot = r1[xt.i0] * (T(1) - fx) + r1[xt.i1] * fx;
                orow[ox] = top * (T(1) - fy) + bot * fy;
            }
        }
    }
    auto pxi = x.impl();
    auto fn = [pxi, n, c, h, w, ho, wo, ty = std::move(ty),
               tx = std::move(tx)](const std::vector<T>& g, const GradSink<T>& sink) {
        if (!pxi->requires_grad) return;
        auto& gx = sink(pxi.get());
        for (int64_t p = 0; p < n * c; ++p) {
            const T* gplane = g.data() + p * ho * wo;
            T* dplane = gx.data() + p * h * w;
            for (int64_t oy = 0; oy < ho; ++oy) {
                const auto& yt = ty[static_cast<size_t>(oy)];
                const T fy = static_cast<T>(yt.f);
                const T* grow = gplane + oy * wo;
                for (int64_t ox = 0; ox < wo; ++ox) {
                    const auto& xt = tx[static_cast<size_t>(ox)];
                    const T fx = static_cast<T>(xt.f);
                    const T gv = grow[ox];
                    dplane[yt.i0 * w + xt.i0] += gv * (T(1) - fy) * (T(1) - fx);
                    dplane[yt.i0 * w + xt.i1] += gv * (T(1) - fy) * fx;
                    dplane[yt.i1 * w + xt.i0] += gv * fy * (T(1) - fx);
                    dplane[yt.i1 * w + xt.i1] += gv * fy * fx;
                }
            }
        }
    };
    return Tensor<T>::make_node({n, c, ho, wo}, std::move(out), {x}, std::move(fn));
}

// ---------------------------------------------------------------------------
// layout permutes

template <typename T>
Tensor<T> nchw_to_nlc(const Tensor<T>& x) {
    check(x.rank() == 4, "nchw_to_nlc: input must be [N,C,H,W]");
    const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<T> out(x.data().size());
    const T* px = x.ptr();
    for (int64_t i = 0; i < n; ++i) {
        const T* xb = px + i * c * hw;
        T* ob = out.data() + i * c * hw;
        for (int64_t ch = 0; ch < c; ++ch) {
            for (int64_t t = 0; t < hw; ++t) ob[t * c + ch] = xb[ch * hw + t];
        }
    }
    auto pxi = x.impl();
    auto fn = [pxi, n, c, hw](const std::vector<T>& g, const GradSink<T>& sink) {
        if (!pxi->requires_grad) return;
        auto& gx = sink(pxi.get());
        for (int64_t i = 0; i < n; ++i) {
            const T* gb = g.data() + i * c * hw;
            T* db = gx.data() + i * c * hw;
            for (int64_t ch = 0; ch < c; ++ch) {
                for (int64_t t = 0; t < hw; ++t) db[ch * hw + t] += gb[t * c + ch];
            }
        }
    };
    return Tensor<T>::make_node({n, hw, c}, std::move(out), {x}, std::move(fn));
}

template <typename T>
Tensor<T> nlc_to_nchw(const Tensor<T>& x, int64_t h, int64_t w) {
    check(x.rank() == 3, "nlc_to_nchw: input must be [N,L,C]");
    const int64_t n = x.dim(0), l = x.dim(1), c = x.dim(2);
    check(l == h * w, "nlc_to_nchw: L=" + std::to_string(l) + " must equal H*W=" +
                          std::to_string(h * w));
    std::vector<T> out(x.data().size());
    const T* px = x.ptr();
    for (int64_t i = 0; i < n; ++i) {
        const T* xb = px + i * l * c;
        T* ob = out.data() + i * l * c;
        for (int64_t ch = 0; ch < c; ++ch) {
            for (int64_t t = 0; t < l; ++t) ob[ch * l + t] = xb[t * c + ch];
        }
    }
    auto pxi = x.impl();
    auto fn = [pxi, n, l, c](const std::vector<T>& g, const GradSink<T>& sink) {
        if (!pxi->requires_grad) return;
        auto& gx = sink(pxi.get());
        for (int64_t i = 0; i < n; ++i) {
            const T* gb = g.data() + i * l * c;
            T* db = gx.data() + i * l * c;
            for (int64_t ch = 0; ch < c; ++ch) {
                for (int64_t t = 0; t < l; ++t) db[t * c + ch] += gb[ch * l + t];
            }
        }
    };
    return Tensor<T>::make_node({n, c, h, w}, std::move(out), {x}, std::move(fn));
}

// ---------------------------------------------------------------------------

#define MSFUM_INSTANTIATE_OPS(T)                                                               \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> mul_scalar<T>(const Tensor<T>&, T);                                    \
    template Tensor<T> activation<T>(const Tensor<T>&, Act);                                  \
    template Tensor<T> sum<T>(const Tensor<T>&);                                              \
    template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
    template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&);                         \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                 int64_t, int64_t);                                           \
    template Tensor<T> conv1d_depthwise<T>(const Tensor<T>&, const Tensor<T>&,                \
                                           const Tensor<T>&, bool);                           \
    template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
    template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                  \
    template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);                     \
    template Tensor<T> scale_channels<T>(const Tensor<T>&, const Tensor<T>&);                 \
    template Tensor<T> upsample_bilinear_x2<T>(const Tensor<T>&);                             \
    template Tensor<T> nchw_to_nlc<T>(const Tensor<T>&);                                      \
    template Tensor<T> nlc_to_nchw<T>(const Tensor<T>&, int64_t, int64_t);

MSFUM_INSTANTIATE_OPS(float)
MSFUM_INSTANTIATE_OPS(double)

#undef MSFUM_INSTANTIATE_OPS

}  // namespace msfum
