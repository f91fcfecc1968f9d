#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vse/gradcheck.hpp"

namespace vse {

struct GradientCase {
    std::string name;
    GradCheckResult result;
    bool passed = false;
};

struct GradientSuiteReport {
    std::vector<GradientCase> cases;
    double tolerance = 0;
    double max_rel_error = 0;
    bool passed() const;
};

struct GradientSuiteOptions {
    std::uint64_t seed = 2024;
    double step = 1e-5;
    double tolerance = 1e-4;
};

// Double-precision finite-difference check of every differentiable op, the encoders, the
// losses, and total_loss on a small random model (d = 16, d_a = 8, r = 3, l = 9, n = 5, N = 4).
GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& options = {});

}  // namespace vse
