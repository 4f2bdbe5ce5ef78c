#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "azmi/common.hpp"
#include "azmi/rng.hpp"
#include "azmi/tensor.hpp"

namespace azmi::nn {

/// One trainable array plus its gradient buffer of identical shape.
template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
};

/// Named, shaped collection of trainable arrays.
///
/// Layers register parameters at construction; registration order is the
/// canonical order for checkpoints and optimizer state. Handles returned
/// by add() stay valid for the life of the store.
template <typename T>
class ParamStore {
public:
    using Handle = std::size_t;

    Handle add(const std::string& name, Shape shape) {
        require(!index_.contains(name), "duplicate parameter name: " + name);
        index_[name] = params_.size();
        params_.push_back(Param<T>{name, Tensor<T>(shape), Tensor<T>(shape)});
        return params_.size() - 1;
    }

    Param<T>& at(Handle h) { return params_[h]; }
    const Param<T>& at(Handle h) const { return params_[h]; }

    Param<T>& by_name(const std::string& name) {
        auto it = index_.find(name);
        require(it != index_.end(), "unknown parameter: " + name);
        return params_[it->second];
    }

    std::size_t count() const { return params_.size(); }
    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grads() {
        for (auto& p : params_) p.grad.fill(T{0});
    }

    bool values_finite() const {
        for (const auto& p : params_)
            if (!p.value.all_finite()) return false;
        return true;
    }

    /// Snapshot of all values, in registration order.
    std::vector<Tensor<T>> snapshot() const {
        std::vector<Tensor<T>> out;
        out.reserve(params_.size());
        for (const auto& p : params_) out.push_back(p.value);
        return out;
    }

    void restore(const std::vector<Tensor<T>>& snap) {
        require(snap.size() == params_.size(), "snapshot size mismatch");
        for (std::size_t i = 0; i < snap.size(); ++i) {
            require(snap[i].shape() == params_[i].value.shape(),
                    "snapshot shape mismatch for " + params_[i].name);
            params_[i].value = snap[i];
        }
    }

private:
    std::vector<Param<T>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform Glorot-style fan-based initialization, seeded.
template <typename T>
void glorot_init(Param<T>& p, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : p.value.vec()) v = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace azmi::nn
