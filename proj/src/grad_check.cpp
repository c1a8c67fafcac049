#include "ctxnav/grad_check.hpp"

#include <cmath>

namespace ctxnav {

GradCheckReport gradient_check(const std::function<Tensor()>& f,
                               std::span<const std::pair<std::string, Tensor>> params,
                               double eps, double tol) {
    (void)tol;  // recorded by the caller via pass(); kept in the signature for symmetry

    std::vector<int> saved_slots;
    saved_slots.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        saved_slots.push_back(params[i].second.param_slot());
        const_cast<Tensor&>(params[i].second).set_param_slot(static_cast<int>(i));
    }

    GradCheckReport report;
    GradSink sink;
    {
        Tensor loss = f();
        backward(loss, sink);
    }
    for (size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor& p = params[pi].second;
        auto values = const_cast<Tensor&>(p).data();
        GradCheckEntry entry;
        entry.name = params[pi].first;
        entry.elements = values.size();
        const std::vector<double>& analytic = sink.buf(static_cast<int>(pi));
        NoGradGuard no_grad;
        for (size_t i = 0; i < values.size(); ++i) {
            double saved = values[i];
            values[i] = saved + eps;
            double up = f().item();
            values[i] = saved - eps;
            double down = f().item();
            values[i] = saved;
            double numeric = (up - down) / (2.0 * eps);
            double a = analytic.empty() ? 0.0 : analytic[i];
            entry.max_rel_err = std::max(entry.max_rel_err, relative_error(a, numeric));
        }
        report.worst = std::max(report.worst, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = const_cast<Tensor&>(params[i].second);
        p.impl()->param_slot = saved_slots[i];
        if (saved_slots[i] < 0) p.set_requires_grad(true);  // keep leaves trainable
    }
    return report;
}

}  // namespace ctxnav
