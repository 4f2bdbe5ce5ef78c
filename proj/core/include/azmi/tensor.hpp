#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "azmi/common.hpp"

namespace azmi::nn {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        require(d > 0, "tensor shape dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

/// Dense N-dimensional array, row-major.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
    Tensor(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        require(data_.size() == shape_numel(shape_),
                "tensor data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_str(shape_));
    }

    const Shape& shape() const { return shape_; }
    int dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    /// Reinterpret the buffer under a new shape of equal element count.
    Tensor reshaped(Shape s) const {
        require(shape_numel(s) == data_.size(),
                "reshape " + shape_str(shape_) + " -> " + shape_str(s) +
                    " changes element count");
        Tensor out;
        out.shape_ = std::move(s);
        out.data_ = data_;
        return out;
    }

    void reshape_in_place(Shape s) {
        require(shape_numel(s) == data_.size(),
                "reshape " + shape_str(shape_) + " -> " + shape_str(s) +
                    " changes element count");
        shape_ = std::move(s);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (const T& v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Concatenate two tensors along the last axis; leading axes must agree.
template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.rank() == b.rank() && a.rank() >= 1, "concat: rank mismatch");
    for (std::size_t i = 0; i + 1 < a.rank(); ++i)
        require(a.shape()[i] == b.shape()[i], "concat: leading dims differ");
    Shape out_shape = a.shape();
    const int ca = a.shape().back(), cb = b.shape().back();
    out_shape.back() = ca + cb;
    Tensor<T> out(out_shape);
    const std::size_t rows = a.size() / ca;
    for (std::size_t r = 0; r < rows; ++r) {
        T* dst = out.data() + r * (ca + cb);
        std::copy(a.data() + r * ca, a.data() + (r + 1) * ca, dst);
        std::copy(b.data() + r * cb, b.data() + (r + 1) * cb, dst + ca);
    }
    return out;
}

/// Split an upstream gradient of a concat_last back into the two parts.
template <typename T>
void split_last(const Tensor<T>& up, int ca, int cb, Tensor<T>& da, Tensor<T>& db) {
    require(up.shape().back() == ca + cb, "split: channel count mismatch");
    Shape sa = up.shape(), sb = up.shape();
    sa.back() = ca;
    sb.back() = cb;
    da = Tensor<T>(sa);
    db = Tensor<T>(sb);
    const std::size_t rows = up.size() / (ca + cb);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* src = up.data() + r * (ca + cb);
        std::copy(src, src + ca, da.data() + r * ca);
        std::copy(src + ca, src + ca + cb, db.data() + r * cb);
    }
}

}  // namespace azmi::nn
