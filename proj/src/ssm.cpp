#include "msfum/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "msfum/ops.hpp"

namespace msfum {

template <typename T>
SsmParams<T> SsmParams<T>::seeded(int64_t d, int64_t s, int64_t r, Rng& rng) {
    check(d >= 1 && s >= 1 && r >= 1, "SsmParams: dims must be positive");
    SsmParams p;
    p.d_inner = d;
    p.n_state = s;
    p.dt_rank = r;
    p.a_log.resize(static_cast<size_t>(d * s));
    for (int64_t i = 0; i < d; ++i) {
        for (int64_t j = 0; j < s; ++j) {
            p.a_log[static_cast<size_t>(i * s + j)] =
                static_cast<T>(std::log(static_cast<double>(j + 1)));
        }
    }
    auto fill_fanin = [&rng](std::vector<T>& v, int64_t rows, int64_t cols) {
        v.resize(static_cast<size_t>(rows * cols));
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        for (auto& e : v) e = static_cast<T>(rng.uniform(-bound, bound));
    };
    fill_fanin(p.dt_in_w, r, d);
    fill_fanin(p.dt_out_w, d, r);
    fill_fanin(p.b_w, s, d);
    fill_fanin(p.c_w, s, d);
    p.dt_out_b.resize(static_cast<size_t>(d));
    for (auto& e : p.dt_out_b) {
        // softplus(bias) log-uniform in [1e-3, 1e-1]
        const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
        e = static_cast<T>(std::log(std::expm1(dt)));
    }
    p.d_skip.assign(static_cast<size_t>(d), T(1));
    return p;
}

template <typename T>
void discretize(const T* a, const T* delta, const T* b, int64_t l, int64_t d, int64_t s,
                T* a_bar, T* b_bar) {
    for (int64_t t = 0; t < l; ++t) {
        for (int64_t i = 0; i < d; ++i) {
            const T dt = delta[t * d + i];
            check(dt > T(0), "discretize: delta must be positive, got " +
                                 std::to_string(static_cast<double>(dt)) + " at (t=" +
                                 std::to_string(t) + ", d=" + std::to_string(i) + ")");
            T* arow = a_bar + (t * d + i) * s;
            T* brow = b_bar + (t * d + i) * s;
            const T* aval = a + i * s;
            const T* bt = b + t * s;
            for (int64_t j = 0; j < s; ++j) {
                arow[j] = std::exp(dt * aval[j]);
                brow[j] = dt * bt[j];
            }
        }
    }
}

template <typename T>
SsmInputs<T> ssm_project(const T* x, int64_t l, const SsmParams<T>& p) {
    const int64_t d = p.d_inner, s = p.n_state, r = p.dt_rank;
    SsmInputs<T> in;
    in.delta.resize(static_cast<size_t>(l * d));
    in.b.assign(static_cast<size_t>(l * s), T(0));
    in.c.assign(static_cast<size_t>(l * s), T(0));
    std::vector<T> rbuf(static_cast<size_t>(r));
    for (int64_t t = 0; t < l; ++t) {
        const T* xt = x + t * d;
        for (int64_t k = 0; k < r; ++k) {
            T acc = T(0);
            const T* wrow = p.dt_in_w.data() + k * d;
            for (int64_t i = 0; i < d; ++i) acc += wrow[i] * xt[i];
            rbuf[static_cast<size_t>(k)] = acc;
        }
        for (int64_t i = 0; i < d; ++i) {
            T acc = p.dt_out_b[static_cast<size_t>(i)];
            const T* wrow = p.dt_out_w.data() + i * r;
            for (int64_t k = 0; k < r; ++k) acc += wrow[k] * rbuf[static_cast<size_t>(k)];
            in.delta[static_cast<size_t>(t * d + i)] = softplus_scalar(acc);
        }
        for (int64_t j = 0; j < s; ++j) {
            T accb = T(0), accc = T(0);
            const T* brow = p.b_w.data() + j * d;
            const T* crow = p.c_w.data() + j * d;
            for (int64_t i = 0; i < d; ++i) {
                accb += brow[i] * xt[i];
                accc += crow[i] * xt[i];
            }
            in.b[static_cast<size_t>(t * s + j)] = accb;
            in.c[static_cast<size_t>(t * s + j)] = accc;
        }
    }
    return in;
}

template <typename T>
void scan_core_sequential(const T* a_bar, const T* b_bar, const T* c, const T* d_skip, const T* x,
                          int64_t l, int64_t d, int64_t s, T* y, T* h_traj) {
    std::vector<T> h(static_cast<size_t>(d * s), T(0));
    for (int64_t t = 0; t < l; ++t) {
        const T* ct = c + t * s;
        for (int64_t i = 0; i < d; ++i) {
            T* hrow = h.data() + i * s;
            const T* arow = a_bar + (t * d + i) * s;
            const T* brow = b_bar + (t * d + i) * s;
            const T xv = x[t * d + i];
            T acc = T(0);
            for (int64_t j = 0; j < s; ++j) {
                hrow[j] = arow[j] * hrow[j] + brow[j] * xv;
                acc += ct[j] * hrow[j];
            }
            y[t * d + i] = acc + d_skip[i] * xv;
            if (h_traj) {
                std::memcpy(h_traj + (t * d + i) * s, hrow, static_cast<size_t>(s) * sizeof(T));
            }
        }
    }
}

namespace {

template <typename T>
struct Discretized {
    std::vector<T> a_bar;
    std::vector<T> b_bar;
    SsmInputs<T> in;
};

template <typename T>
Discretized<T> prepare(const std::vector<T>& x, int64_t l, const SsmParams<T>& p) {
    check(static_cast<int64_t>(x.size()) == l * p.d_inner,
          "scan: x size must be L*D = " + std::to_string(l * p.d_inner));
    Discretized<T> d;
    d.in = ssm_project(x.data(), l, p);
    std::vector<T> a(static_cast<size_t>(p.d_inner * p.n_state));
    for (size_t i = 0; i < a.size(); ++i) a[i] = -std::exp(p.a_log[i]);
    d.a_bar.resize(static_cast<size_t>(l * p.d_inner * p.n_state));
    d.b_bar.resize(d.a_bar.size());
    discretize(a.data(), d.in.delta.data(), d.in.b.data(), l, p.d_inner, p.n_state,
               d.a_bar.data(), d.b_bar.data());
    return d;
}

}  // namespace

template <typename T>
std::vector<T> scan_sequential(const std::vector<T>& x, int64_t l, const SsmParams<T>& p) {
    auto d = prepare(x, l, p);
    std::vector<T> y(static_cast<size_t>(l * p.d_inner));
    scan_core_sequential(d.a_bar.data(), d.b_bar.data(), d.in.c.data(), p.d_skip.data(), x.data(),
                         l, p.d_inner, p.n_state, y.data(), static_cast<T*>(nullptr));
    return y;
}

template <typename T>
std::vector<T> scan_chunked(const std::vector<T>& x, int64_t l, const SsmParams<T>& p,
                            int64_t chunk) {
    check(chunk >= 1, "scan_chunked: chunk must be >= 1");
    auto dz = prepare(x, l, p);
    const int64_t d = p.d_inner, s = p.n_state;
    const int64_t ds = d * s;
    const int64_t nchunks = (l + chunk - 1) / chunk;

    // Local scans from a zero state; prefix[t] carries the running product
    // of transitions inside the chunk, so the true state is
    // h[t] = h_local[t] + prefix[t] * h_in(chunk).
    std::vector<T> h_local(static_cast<size_t>(l * ds));
    std::vector<T> prefix(static_cast<size_t>(l * ds));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t cidx = 0; cidx < nchunks; ++cidx) {
        const int64_t t0 = cidx * chunk;
        const int64_t t1 = std::min(t0 + chunk, l);
        std::vector<T> h(static_cast<size_t>(ds), T(0));
        std::vector<T> pr(static_cast<size_t>(ds), T(1));
        for (int64_t t = t0; t < t1; ++t) {
            for (int64_t i = 0; i < d; ++i) {
                const T* arow = dz.a_bar.data() + (t * d + i) * s;
                const T* brow = dz.b_bar.data() + (t * d + i) * s;
                const T xv = x[static_cast<size_t>(t * d + i)];
                T* hrow = h.data() + i * s;
                T* prow = pr.data() + i * s;
                T* hl = h_local.data() + (t * d + i) * s;
                T* pf = prefix.data() + (t * d + i) * s;
                for (int64_t j = 0; j < s; ++j) {
                    hrow[j] = arow[j] * hrow[j] + brow[j] * xv;
                    prow[j] = prow[j] * arow[j];
                    hl[j] = hrow[j];
                    pf[j] = prow[j];
                }
            }
        }
    }

    // Boundary composition: h_in(c) = P(c-1) * h_in(c-1) + q(c-1).
    std::vector<T> h_in(static_cast<size_t>(nchunks * ds), T(0));
    for (int64_t cidx = 1; cidx < nchunks; ++cidx) {
        const int64_t tlast = std::min(cidx * chunk, l) - 1;
        const T* q = h_local.data() + tlast * ds;
        const T* pc = prefix.data() + tlast * ds;
        const T* prev = h_in.data() + (cidx - 1) * ds;
        T* cur = h_in.data() + cidx * ds;
        for (int64_t i = 0; i < ds; ++i) cur[i] = pc[i] * prev[i] + q[i];
    }

    // Emit outputs; chunk 0 needs no correction, which keeps the single-chunk
    // case bitwise equal to the sequential scan.
    std::vector<T> y(static_cast<size_t>(l * d));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t cidx = 0; cidx < nchunks; ++cidx) {
        const int64_t t0 = cidx * chunk;
        const int64_t t1 = std::min(t0 + chunk, l);
        const T* hin = h_in.data() + cidx * ds;
        for (int64_t t = t0; t < t1; ++t) {
            const T* ct = dz.in.c.data() + t * s;
            for (int64_t i = 0; i < d; ++i) {
                const T* hl = h_local.data() + (t * d + i) * s;
                const T* pf = prefix.data() + (t * d + i) * s;
                const T* hi = hin + i * s;
                T acc = T(0);
                if (cidx == 0) {
                    for (int64_t j = 0; j < s; ++j) acc += ct[j] * hl[j];
                } else {
                    for (int64_t j = 0; j < s; ++j) acc += ct[j] * (hl[j] + pf[j] * hi[j]);
                }
                y[static_cast<size_t>(t * d + i)] =
                    acc + p.d_skip[static_cast<size_t>(i)] * x[static_cast<size_t>(t * d + i)];
            }
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// Differentiable path

template <typename T>
SsmParamTensors<T> SsmParamTensors<T>::from_params(const SsmParams<T>& p) {
    SsmParamTensors<T> t;
    t.a_log = Tensor<T>::from_data({p.d_inner, p.n_state}, p.a_log);
    t.dt_in_w = Tensor<T>::from_data({p.dt_rank, p.d_inner}, p.dt_in_w);
    t.dt_out_w = Tensor<T>::from_data({p.d_inner, p.dt_rank}, p.dt_out_w);
    t.dt_out_b = Tensor<T>::from_data({p.d_inner}, p.dt_out_b);
    t.b_w = Tensor<T>::from_data({p.n_state, p.d_inner}, p.b_w);
    t.c_w = Tensor<T>::from_data({p.n_state, p.d_inner}, p.c_w);
    t.d_skip = Tensor<T>::from_data({p.d_inner}, p.d_skip);
    return t;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const Tensor<T>& delta, const Tensor<T>& b,
                         const Tensor<T>& c, const Tensor<T>& a_log, const Tensor<T>& d_skip) {
    check(x.rank() == 3, "selective_scan: x must be [N,L,D], got " + shape_str(x.shape()));
    const int64_t n = x.dim(0), l = x.dim(1), d = x.dim(2);
    check(delta.shape() == x.shape(), "selective_scan: delta shape mismatch");
    check(a_log.rank() == 2 && a_log.dim(0) == d, "selective_scan: a_log must be [D,S]");
    const int64_t s = a_log.dim(1);
    check(b.rank() == 3 && b.dim(0) == n && b.dim(1) == l && b.dim(2) == s,
          "selective_scan: b must be [N,L,S]");
    check(c.shape() == b.shape(), "selective_scan: c shape mismatch");
    check(d_skip.rank() == 1 && d_skip.dim(0) == d, "selective_scan: d_skip must be [D]");

    std::vector<T> a(static_cast<size_t>(d * s));
    for (size_t i = 0; i < a.size(); ++i) a[i] = -std::exp(a_log.data()[i]);

    const bool tracking = GradMode::enabled() &&
                          (x.requires_grad() || delta.requires_grad() || b.requires_grad() ||
                           c.requires_grad() || a_log.requires_grad() || d_skip.requires_grad());

    std::vector<T> y(static_cast<size_t>(n * l * d));
    std::vector<T> h_traj;
    std::vector<T> abar_traj;
    if (tracking) {
        h_traj.resize(static_cast<size_t>(n * l * d * s));
        abar_traj.resize(h_traj.size());
    }

    const T* px = x.ptr();
    const T* pdelta = delta.ptr();
    const T* pb = b.ptr();
    const T* pc = c.ptr();
    const T* pskip = d_skip.ptr();
    for (int64_t bi = 0; bi < n; ++bi) {
        std::vector<T> h(static_cast<size_t>(d * s), T(0));
        const int64_t base = bi * l * d;
        for (int64_t t = 0; t < l; ++t) {
            const T* ct = pc + (bi * l + t) * s;
            const T* bt = pb + (bi * l + t) * s;
            for (int64_t i = 0; i < d; ++i) {
                const T dt = pdelta[base + t * d + i];
                const T xv = px[base + t * d + i];
                const T* arow = a.data() + i * s;
                T* hrow = h.data() + i * s;
                T* htr = tracking ? h_traj.data() + ((bi * l + t) * d + i) * s : nullptr;
                T* atr = tracking ? abar_traj.data() + ((bi * l + t) * d + i) * s : nullptr;
                T acc = T(0);
                for (int64_t j = 0; j < s; ++j) {
                    const T abar = std::exp(dt * arow[j]);
                    hrow[j] = abar * hrow[j] + dt * bt[j] * xv;
                    acc += ct[j] * hrow[j];
                    if (tracking) {
                        htr[j] = hrow[j];
                        atr[j] = abar;
                    }
                }
                y[static_cast<size_t>(base + t * d + i)] = acc + pskip[i] * xv;
            }
        }
    }

    auto pxi = x.impl();
    auto pdi = delta.impl();
    auto pbi = b.impl();
    auto pci = c.impl();
    auto pai = a_log.impl();
    auto psi = d_skip.impl();
    auto fn = [pxi, pdi, pbi, pci, pai, psi, n, l, d, s, a = std::move(a),
               h_traj = std::move(h_traj), abar_traj = std::move(abar_traj)](
                  const std::vector<T>& g, const GradSink<T>& sink) {
        const T* px = pxi->value.data();
        const T* pdelta = pdi->value.data();
        const T* pb = pbi->value.data();
        const T* pc = pci->value.data();
        const T* pskip = psi->value.data();

        T* gx = pxi->requires_grad ? sink(pxi.get()).data() : nullptr;
        T* gdelta = pdi->requires_grad ? sink(pdi.get()).data() : nullptr;
        T* gb = pbi->requires_grad ? sink(pbi.get()).data() : nullptr;
        T* gc = pci->requires_grad ? sink(pci.get()).data() : nullptr;
        T* gskip = psi->requires_grad ? sink(psi.get()).data() : nullptr;
        std::vector<T> da(pai->requires_grad ? static_cast<size_t>(d * s) : 0, T(0));

        std::vector<T> lam(static_cast<size_t>(d * s));
        for (int64_t bi = 0; bi < n; ++bi) {
            std::fill(lam.begin(), lam.end(), T(0));
            const int64_t base = bi * l * d;
            for (int64_t t = l - 1; t >= 0; --t) {
                const T* ct = pc + (bi * l + t) * s;
                const T* bt = pb + (bi * l + t) * s;
                const T* abar_next =
                    (t + 1 < l) ? abar_traj.data() + ((bi * l + t + 1) * d) * s : nullptr;
                for (int64_t i = 0; i < d; ++i) {
                    const T gtd = g[static_cast<size_t>(base + t * d + i)];
                    const T xv = px[base + t * d + i];
                    const T dt = pdelta[base + t * d + i];
                    const T* arow = a.data() + i * s;
                    const T* abar_t = abar_traj.data() + ((bi * l + t) * d + i) * s;
                    const T* h_t = h_traj.data() + ((bi * l + t) * d + i) * s;
                    const T* h_prev =
                        (t > 0) ? h_traj.data() + ((bi * l + t - 1) * d + i) * s : nullptr;
                    T* lrow = lam.data() + i * s;
                    T acc_ddelta = T(0);
                    T acc_dx = T(0);
                    for (int64_t j = 0; j < s; ++j) {
                        T lam_ts = gtd * ct[j];
                        if (abar_next) lam_ts += abar_next[i * s + j] * lrow[j];
                        const T hp = h_prev ? h_prev[j] : T(0);
                        acc_ddelta += lam_ts * (bt[j] * xv + arow[j] * abar_t[j] * hp);
                        acc_dx += lam_ts * bt[j];
                        if (gb) gb[(bi * l + t) * s + j] += lam_ts * dt * xv;
                        if (gc) gc[(bi * l + t) * s + j] += gtd * h_t[j];
                        if (!da.empty()) da[static_cast<size_t>(i * s + j)] +=
                            lam_ts * dt * abar_t[j] * hp;
                        lrow[j] = lam_ts;
                    }
                    if (gdelta) gdelta[base + t * d + i] += acc_ddelta;
                    if (gx) gx[base + t * d + i] += acc_dx * dt + gtd * pskip[i];
                    if (gskip) gskip[i] += gtd * xv;
                }
            }
        }
        if (!da.empty()) {
            auto& ga = sink(pai.get());
            // dA/da_log = -exp(a_log) = a
            for (int64_t i = 0; i < d * s; ++i) {
                ga[static_cast<size_t>(i)] += da[static_cast<size_t>(i)] * a[static_cast<size_t>(i)];
            }
        }
    };
    return Tensor<T>::make_node({n, l, d}, std::move(y), {x, delta, b, c, a_log, d_skip},
                                std::move(fn));
}

template <typename T>
Tensor<T> ssm_apply(const Tensor<T>& x, const SsmParamTensors<T>& p) {
    check(x.rank() == 3, "ssm_apply: x must be [N,L,D], got " + shape_str(x.shape()));
    Tensor<T> r = linear(x, p.dt_in_w);
    Tensor<T> delta = softplus(linear(r, p.dt_out_w, p.dt_out_b));
    Tensor<T> bv = linear(x, p.b_w);
    Tensor<T> cv = linear(x, p.c_w);
    return selective_scan(x, delta, bv, cv, p.a_log, p.d_skip);
}

// ---------------------------------------------------------------------------

#define MSFUM_INSTANTIATE_SSM(T)                                                              \
    template struct SsmParams<T>;                                                             \
    template struct SsmParamTensors<T>;                                                       \
    template void discretize<T>(const T*, const T*, const T*, int64_t, int64_t, int64_t, T*,  \
                                T*);                                                          \
    template SsmInputs<T> ssm_project<T>(const T*, int64_t, const SsmParams<T>&);             \
    template void scan_core_sequential<T>(const T*, const T*, const T*, const T*, const T*,   \
                                          int64_t, int64_t, int64_t, T*, T*);                 \
    template std::vector<T> scan_sequential<T>(const std::vector<T>&, int64_t,                \
                                               const SsmParams<T>&);                          \
    template std::vector<T> scan_chunked<T>(const std::vector<T>&, int64_t,                   \
                                            const SsmParams<T>&, int64_t);                    \
    template Tensor<T> selective_scan<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                         const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template Tensor<T> ssm_apply<T>(const Tensor<T>&, const SsmParamTensors<T>&);

MSFUM_INSTANTIATE_SSM(float)
MSFUM_INSTANTIATE_SSM(double)

#undef MSFUM_INSTANTIATE_SSM

}  // namespace msfum
