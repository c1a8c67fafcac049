#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctxnav/tensor.hpp"

namespace ctxnav {

// Central finite-difference verification of reverse-mode gradients.  The
// analytic side runs backward() once; the numeric side re-evaluates `f` with
// each parameter element nudged by +/-eps.  Relative error uses a small
// absolute floor so near-zero gradient pairs do not blow up the ratio.

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    size_t elements = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;

    bool pass(double tol) const { return worst < tol; }
};

constexpr double kGradCheckFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
    double denom = std::abs(analytic) + std::abs(numeric);
    return std::abs(analytic - numeric) / (denom > kGradCheckFloor ? denom : kGradCheckFloor);
}

// `f` must rebuild the scalar loss from the *current* values of `params`
// (perturbations are written in place).  Parameter slots are temporarily
// reassigned for the duration of the check and restored afterwards.
GradCheckReport gradient_check(const std::function<Tensor()>& f,
                               std::span<const std::pair<std::string, Tensor>> params,
                               double eps, double tol);

}  // namespace ctxnav
