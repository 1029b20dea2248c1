#pragma once

#include <string>
#include <vector>

#include "biatt/model.hpp"

namespace biatt {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    int checked = 0;
};

// Central finite differences (eps) of the MSE loss against the reverse-mode
// gradients, over every parameter element of a model with the given dims.
GradCheckReport gradient_check(const ModelDims& dims, const AttentionConfig& att, int frames,
                               std::uint64_t seed, double eps = 1e-4);

// The built-in verification suite behind the `selftest` subcommand: gradient
// finite differences, softmax/attention structure, STFT round trip, and the
// filter-bank oracle.
std::vector<CheckResult> run_selftest();

}  // namespace biatt
