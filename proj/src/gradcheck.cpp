#include "msfum/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "msfum/ops.hpp"

namespace msfum {

namespace {

// Indices to probe: largest |analytic| first, then an even spread.
std::vector<int64_t> pick_coords(const std::vector<double>& analytic, int64_t want) {
    const int64_t n = static_cast<int64_t>(analytic.size());
    if (n <= want) {
        std::vector<int64_t> all(static_cast<size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return std::abs(analytic[static_cast<size_t>(a)]) >
               std::abs(analytic[static_cast<size_t>(b)]);
    });
    const int64_t top = want - want / 4;
    std::vector<int64_t> picked(order.begin(), order.begin() + top);
    const int64_t spread = want - top;
    for (int64_t i = 0; i < spread; ++i) {
        picked.push_back((i * n) / spread);
    }
    std::sort(picked.begin(), picked.end());
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
    return picked;
}

}  // namespace

GradcheckReport gradcheck_loss(const std::function<Tensor<double>()>& loss_fn,
                               const std::vector<Tensor<double>>& wrt, double step, double tol,
                               int64_t coords_per_tensor) {
    check(step > 0, "gradcheck: step must be positive");
    GradcheckReport report;

    for (auto t : wrt) t.zero_grad();
    Tensor<double> loss = loss_fn();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(wrt.size());
    for (const auto& t : wrt) analytic.push_back(t.grad());

    for (size_t ti = 0; ti < wrt.size(); ++ti) {
        Tensor<double> t = wrt[ti];
        const auto coords = pick_coords(analytic[ti], coords_per_tensor);
        for (int64_t idx : coords) {
            const double saved = t.data()[static_cast<size_t>(idx)];
            double lp, lm;
            {
                NoGradGuard ng;
                t.data()[static_cast<size_t>(idx)] = saved + step;
                lp = loss_fn().item();
                t.data()[static_cast<size_t>(idx)] = saved - step;
                lm = loss_fn().item();
                t.data()[static_cast<size_t>(idx)] = saved;
            }
            const double numeric = (lp - lm) / (2.0 * step);
            const double a = analytic[ti][static_cast<size_t>(idx)];
            const double diff = std::abs(a - numeric);
            // rtol+atol form: pass iff diff <= tol * (max + 1e-3), i.e. an
            // absolute floor of 1e-3*tol absorbs the irreducible rounding
            // noise of central differences at small-magnitude coordinates.
            const double denom = std::max(std::abs(a), std::abs(numeric)) + 1e-3;
            const double rel = diff / denom;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                std::ostringstream os;
                os << "tensor " << ti << " coord " << idx << " analytic " << a << " numeric "
                   << numeric;
                report.worst = os.str();
            }
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

GradcheckReport gradcheck(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                          const Tensor<double>& x, double step, double tol,
                          uint64_t projection_seed, int64_t coords) {
    Tensor<double> leaf = x.detached();
    leaf.set_requires_grad(true);

    // Projection weights with |w| in [0.5, 1.5] so each output coordinate
    // contributes at unit scale.
    Tensor<double> probe = f(leaf);
    Rng rng(projection_seed);
    std::vector<double> wdata(static_cast<size_t>(probe.numel()));
    for (auto& v : wdata) {
        const double mag = 0.5 + rng.uniform();
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    Tensor<double> w = Tensor<double>::from_data(probe.shape(), std::move(wdata));

    auto loss_fn = [&f, &leaf, &w]() { return sum(mul(f(leaf), w)); };
    return gradcheck_loss(loss_fn, {leaf}, step, tol, coords);
}

}  // namespace msfum
