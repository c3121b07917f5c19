#pragma once

#include <string>
#include <vector>

#include "msfum/gradcheck.hpp"

namespace msfum {

struct SuiteEntry {
    std::string name;
    double tol = 0.0;
    GradcheckReport report;
};

// Central-difference checks (checking precision, step 1e-5) over every
// differentiable primitive and block, up to the full network with L1 loss.
std::vector<SuiteEntry> run_gradcheck_suite();

}  // namespace msfum
