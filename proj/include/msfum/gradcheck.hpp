#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msfum/tensor.hpp"

namespace msfum {

struct GradcheckReport {
    double max_rel_err = 0.0;
    bool pass = true;
    int64_t checked = 0;
    std::string worst;
};

// Central-difference comparison of analytic gradients. Deliberately only
// defined for checking precision (double); 32-bit differences are too noisy
// for the tolerances used here.
//
// loss_fn must rebuild the graph from the current values of `wrt` on every
// call. Coordinates are sampled per tensor, largest analytic magnitude
// first, plus a stride-spread sample for coverage.
GradcheckReport gradcheck_loss(const std::function<Tensor<double>()>& loss_fn,
                               const std::vector<Tensor<double>>& wrt, double step, double tol,
                               int64_t coords_per_tensor = 24);

// Map-under-projection form: reduces f(x) to a scalar through a fixed
// seeded projection with weights bounded away from zero, then checks
// d(loss)/dx.
GradcheckReport gradcheck(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                          const Tensor<double>& x, double step, double tol,
                          uint64_t projection_seed = 17, int64_t coords = 48);

}  // namespace msfum
