#pragma once

#include <cmath>
#include <vector>

#include "azmi/param_store.hpp"

namespace azmi::nn {

/// ADAM optimizer state: first/second moment accumulators per parameter.
template <typename T>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    long t = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;

    void ensure_shapes(const ParamStore<T>& params) {
        if (!m.empty()) return;
        for (const auto& p : params) {
            m.emplace_back(p.value.shape());
            v.emplace_back(p.value.shape());
        }
    }
};

/// One bias-corrected ADAM update. Gradients are left untouched; the
/// caller zeroes them between steps.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
    state.ensure_shapes(params);
    require(state.m.size() == params.count(), "adam: state/param count mismatch");
    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    std::size_t pi = 0;
    for (auto& p : params) {
        require(state.m[pi].shape() == p.value.shape(),
                "adam: accumulator shape mismatch for " + p.name);
        T* theta = p.value.data();
        const T* g = p.grad.data();
        T* m = state.m[pi].data();
        T* v = state.v[pi].data();
        const std::size_t n = p.value.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = static_cast<double>(g[i]);
            if (!std::isfinite(gi))
                throw NumericalError("adam: non-finite gradient in parameter '" + p.name +
                                     "' at index " + std::to_string(i));
            const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / c1;
            const double vhat = vi / c2;
            theta[i] = static_cast<T>(theta[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
        ++pi;
    }
}

}  // namespace azmi::nn
