#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "azmi/param_store.hpp"

namespace azmi::nn {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;
    bool pass = true;
};

/// Compare the analytic gradients already stored in `params` against
/// central finite differences of `loss` (step h, 64-bit precision).
///
/// The caller runs its forward+backward once to populate the gradient
/// buffers, then hands the pure forward closure here. The closure must be
/// deterministic (fixed noise draws).
inline GradCheckReport grad_check(const std::function<double(ParamStore<double>&)>& loss,
                                  ParamStore<double>& params, double tolerance,
                                  double h = 1e-5) {
    GradCheckReport report;
    for (auto& p : params) {
        GradCheckEntry entry{p.name, 0.0, true};
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double lp = loss(params);
            p.value[i] = saved - h;
            const double lm = loss(params);
            p.value[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = p.grad[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(fd - an) / denom);
        }
        entry.pass = entry.max_rel_err < tolerance;
        report.worst = std::max(report.worst, entry.max_rel_err);
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace azmi::nn
