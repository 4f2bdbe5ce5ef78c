#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <string>

#include "azmi/param_store.hpp"
#include "azmi/tensor.hpp"

namespace azmi::nn {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

/// Fully connected layer: out = in * W + b, in [n, d_in] -> [n, d_out].
template <typename T>
class Dense {
public:
    Dense(ParamStore<T>& store, const std::string& name, int d_in, int d_out)
        : d_in_(d_in), d_out_(d_out) {
        require(d_in > 0 && d_out > 0, name + ": dense dims must be positive");
        w_ = store.add(name + ".W", {d_in, d_out});
        b_ = store.add(name + ".b", {d_out});
    }

    void init(ParamStore<T>& store, Rng& rng) {
        glorot_init(store.at(w_), d_in_, d_out_, rng);
    }

    Tensor<T> forward(ParamStore<T>& store, const Tensor<T>& in) {
        require(in.rank() == 2 && in.dim(1) == d_in_,
                "dense: input " + shape_str(in.shape()) + " expects [n," +
                    std::to_string(d_in_) + "]");
        in_cache_ = in;
        const int n = in.dim(0);
        Tensor<T> out({n, d_out_});
        ConstMatMap<T> X(in.data(), n, d_in_);
        ConstMatMap<T> W(store.at(w_).value.data(), d_in_, d_out_);
        ConstVecMap<T> b(store.at(b_).value.data(), d_out_);
        MatMap<T> O(out.data(), n, d_out_);
        O.noalias() = X * W;
        O.rowwise() += b;
        return out;
    }

    /// Accumulates dW, db into the store; returns d(input).
    Tensor<T> backward(ParamStore<T>& store, const Tensor<T>& up) {
        require(up.rank() == 2 && up.dim(1) == d_out_ && up.dim(0) == in_cache_.dim(0),
                "dense: upstream shape mismatch");
        const int n = up.dim(0);
        ConstMatMap<T> dO(up.data(), n, d_out_);
        ConstMatMap<T> X(in_cache_.data(), n, d_in_);
        ConstMatMap<T> W(store.at(w_).value.data(), d_in_, d_out_);
        MatMap<T> dW(store.at(w_).grad.data(), d_in_, d_out_);
        MatMap<T> db(store.at(b_).grad.data(), 1, d_out_);
        dW.noalias() += X.transpose() * dO;
        db.noalias() += dO.colwise().sum();
        Tensor<T> din({n, d_in_});
        MatMap<T> dX(din.data(), n, d_in_);
        dX.noalias() = dO * W.transpose();
        return din;
    }

    int d_in() const { return d_in_; }
    int d_out() const { return d_out_; }

private:
    int d_in_, d_out_;
    typename ParamStore<T>::Handle w_{}, b_{};
    Tensor<T> in_cache_;
};

/// Strided 2D convolution, kernel 2x2, stride 2 (non-overlapping patches).
/// in [n, h, w, c_in] -> [n, h/2, w/2, c_out], kernel [2, 2, c_in, c_out].
template <typename T>
class Conv2d {
public:
    Conv2d(ParamStore<T>& store, const std::string& name, int h, int w, int c_in, int c_out)
        : h_(h), w_(w), c_in_(c_in), c_out_(c_out) {
        require(h >= 2 && w >= 2 && h % 2 == 0 && w % 2 == 0,
                name + ": spatial dims must be even, got " + std::to_string(h) + "x" +
                    std::to_string(w));
        require(c_in > 0 && c_out > 0, name + ": channel counts must be positive");
        k_ = store.add(name + ".K", {2, 2, c_in, c_out});
        b_ = store.add(name + ".b", {c_out});
    }

    void init(ParamStore<T>& store, Rng& rng) {
        glorot_init(store.at(k_), 4 * c_in_, 4 * c_out_, rng);
    }

    Tensor<T> forward(ParamStore<T>& store, const Tensor<T>& in) {
        check_input(in);
        const int n = in.dim(0), oh = h_ / 2, ow = w_ / 2;
        const std::size_t rows = static_cast<std::size_t>(n) * oh * ow;
        patches_ = Tensor<T>({static_cast<int>(rows), 4 * c_in_});
        im2col(in, patches_);
        n_cache_ = n;

        Tensor<T> out({n, oh, ow, c_out_});
        ConstMatMap<T> P(patches_.data(), rows, 4 * c_in_);
        ConstMatMap<T> K(store.at(k_).value.data(), 4 * c_in_, c_out_);
        ConstVecMap<T> b(store.at(b_).value.data(), c_out_);
        MatMap<T> O(out.data(), rows, c_out_);
        O.noalias() = P * K;
        O.rowwise() += b;
        return out;
    }

    Tensor<T> backward(ParamStore<T>& store, const Tensor<T>& up) {
        const int n = n_cache_, oh = h_ / 2, ow = w_ / 2;
        require(up.shape() == Shape{n, oh, ow, c_out_}, "conv2d: upstream shape mismatch");
        const std::size_t rows = static_cast<std::size_t>(n) * oh * ow;
        ConstMatMap<T> dO(up.data(), rows, c_out_);
        ConstMatMap<T> P(patches_.data(), rows, 4 * c_in_);
        ConstMatMap<T> K(store.at(k_).value.data(), 4 * c_in_, c_out_);
        MatMap<T> dK(store.at(k_).grad.data(), 4 * c_in_, c_out_);
        MatMap<T> db(store.at(b_).grad.data(), 1, c_out_);
        dK.noalias() += P.transpose() * dO;
        db.noalias() += dO.colwise().sum();

        Tensor<T> dpatch({static_cast<int>(rows), 4 * c_in_});
        MatMap<T> dP(dpatch.data(), rows, 4 * c_in_);
        dP.noalias() = dO * K.transpose();
        Tensor<T> din({n, h_, w_, c_in_});
        col2im(dpatch, din);
        return din;
    }

    int out_h() const { return h_ / 2; }
    int out_w() const { return w_ / 2; }
    int c_out() const { return c_out_; }

private:
    void check_input(const Tensor<T>& in) const {
        require(in.rank() == 4 && in.dim(1) == h_ && in.dim(2) == w_ && in.dim(3) == c_in_,
                "conv2d: input " + shape_str(in.shape()) + " expects [n," + std::to_string(h_) +
                    "," + std::to_string(w_) + "," + std::to_string(c_in_) + "]");
    }

    // P[(n,a,b), (di,dj,ci)] = in[n, 2a+di, 2b+dj, ci]; each input element
    // lands in exactly one patch slot, so col2im is the inverse permutation.
    void im2col(const Tensor<T>& in, Tensor<T>& patches) const {
        const int n = in.dim(0), oh = h_ / 2, ow = w_ / 2;
        const T* src = in.data();
        T* dst = patches.data();
        for (int img = 0; img < n; ++img)
            for (int a = 0; a < oh; ++a)
                for (int b = 0; b < ow; ++b) {
                    T* row = dst + (((static_cast<std::size_t>(img) * oh + a) * ow + b)) *
                                       (4 * c_in_);
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj) {
                            const T* cell =
                                src + ((static_cast<std::size_t>(img) * h_ + (2 * a + di)) * w_ +
                                       (2 * b + dj)) *
                                          c_in_;
                            std::copy(cell, cell + c_in_, row + (di * 2 + dj) * c_in_);
                        }
                }
    }

    void col2im(const Tensor<T>& patches, Tensor<T>& out) const {
        const int n = out.dim(0), oh = h_ / 2, ow = w_ / 2;
        const T* src = patches.data();
        T* dst = out.data();
        for (int img = 0; img < n; ++img)
            for (int a = 0; a < oh; ++a)
                for (int b = 0; b < ow; ++b) {
                    const T* row = src + (((static_cast<std::size_t>(img) * oh + a) * ow + b)) *
                                             (4 * c_in_);
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj) {
                            T* cell =
                                dst + ((static_cast<std::size_t>(img) * h_ + (2 * a + di)) * w_ +
                                       (2 * b + dj)) *
                                          c_in_;
                            std::copy(row + (di * 2 + dj) * c_in_,
                                      row + (di * 2 + dj + 1) * c_in_, cell);
                        }
                }
    }

    int h_, w_, c_in_, c_out_;
    typename ParamStore<T>::Handle k_{}, b_{};
    Tensor<T> patches_;
    int n_cache_ = 0;
};

/// Transposed 2D convolution, kernel 2x2, stride 2: exact spatial doubling.
/// in [n, h, w, c_in] -> [n, 2h, 2w, c_out], kernel [2, 2, c_out, c_in].
///
/// With a shared kernel tensor K[2,2,X,Y], this layer (mapping Y -> X
/// channels) is the linear adjoint of Conv2d (mapping X -> Y).
template <typename T>
class TransposedConv2d {
public:
    TransposedConv2d(ParamStore<T>& store, const std::string& name, int h, int w, int c_in,
                     int c_out)
        : h_(h), w_(w), c_in_(c_in), c_out_(c_out) {
        require(h > 0 && w > 0 && c_in > 0 && c_out > 0, name + ": dims must be positive");
        k_ = store.add(name + ".K", {2, 2, c_out, c_in});
        b_ = store.add(name + ".b", {c_out});
    }

    void init(ParamStore<T>& store, Rng& rng) {
        glorot_init(store.at(k_), 4 * c_in_, 4 * c_out_, rng);
    }

    Tensor<T> forward(ParamStore<T>& store, const Tensor<T>& in) {
        require(in.rank() == 4 && in.dim(1) == h_ && in.dim(2) == w_ && in.dim(3) == c_in_,
                "conv2d_transpose: input " + shape_str(in.shape()) + " expects [n," +
                    std::to_string(h_) + "," + std::to_string(w_) + "," + std::to_string(c_in_) +
                    "]");
        in_cache_ = in;
        const int n = in.dim(0);
        const std::size_t rows = static_cast<std::size_t>(n) * h_ * w_;

        // U[(n,a,b), (di,dj,o)] = sum_i in[n,a,b,i] * K[di,dj,o,i]
        Tensor<T> u({static_cast<int>(rows), 4 * c_out_});
        ConstMatMap<T> V(in.data(), rows, c_in_);
        ConstMatMap<T> K(store.at(k_).value.data(), 4 * c_out_, c_in_);
        MatMap<T> U(u.data(), rows, 4 * c_out_);
        U.noalias() = V * K.transpose();

        Tensor<T> out({n, 2 * h_, 2 * w_, c_out_});
        scatter(u, out);
        const T* bias = store.at(b_).value.data();
        T* o = out.data();
        const std::size_t cells = out.size() / c_out_;
        for (std::size_t c = 0; c < cells; ++c)
            for (int ch = 0; ch < c_out_; ++ch) o[c * c_out_ + ch] += bias[ch];
        return out;
    }

    Tensor<T> backward(ParamStore<T>& store, const Tensor<T>& up) {
        const int n = in_cache_.dim(0);
        require(up.shape() == Shape{n, 2 * h_, 2 * w_, c_out_},
                "conv2d_transpose: upstream shape mismatch");
        const std::size_t rows = static_cast<std::size_t>(n) * h_ * w_;

        Tensor<T> du({static_cast<int>(rows), 4 * c_out_});
        gather(up, du);

        ConstMatMap<T> dU(du.data(), rows, 4 * c_out_);
        ConstMatMap<T> V(in_cache_.data(), rows, c_in_);
        ConstMatMap<T> K(store.at(k_).value.data(), 4 * c_out_, c_in_);
        MatMap<T> dK(store.at(k_).grad.data(), 4 * c_out_, c_in_);
        dK.noalias() += dU.transpose() * V;

        T* db = store.at(b_).grad.data();
        const T* u = up.data();
        const std::size_t cells = up.size() / c_out_;
        for (std::size_t c = 0; c < cells; ++c)
            for (int ch = 0; ch < c_out_; ++ch) db[ch] += u[c * c_out_ + ch];

        Tensor<T> din({n, h_, w_, c_in_});
        MatMap<T> dV(din.data(), rows, c_in_);
        dV.noalias() = dU * K;
        return din;
    }

    int out_h() const { return 2 * h_; }
    int out_w() const { return 2 * w_; }
    int c_out() const { return c_out_; }

private:
    // out[n, 2a+di, 2b+dj, o] = U[(n,a,b), (di,dj,o)]
    void scatter(const Tensor<T>& u, Tensor<T>& out) const {
        const int n = out.dim(0), H = 2 * h_, W = 2 * w_;
        const T* src = u.data();
        T* dst = out.data();
        for (int img = 0; img < n; ++img)
            for (int a = 0; a < h_; ++a)
                for (int b = 0; b < w_; ++b) {
                    const T* row =
                        src + ((static_cast<std::size_t>(img) * h_ + a) * w_ + b) * (4 * c_out_);
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj) {
                            T* cell = dst + ((static_cast<std::size_t>(img) * H + (2 * a + di)) *
                                                 W +
                                             (2 * b + dj)) *
                                                c_out_;
                            std::copy(row + (di * 2 + dj) * c_out_,
                                      row + (di * 2 + dj + 1) * c_out_, cell);
                        }
                }
    }

    void gather(const Tensor<T>& big, Tensor<T>& u) const {
        const int n = big.dim(0), H = 2 * h_, W = 2 * w_;
        const T* src = big.data();
        T* dst = u.data();
        for (int img = 0; img < n; ++img)
            for (int a = 0; a < h_; ++a)
                for (int b = 0; b < w_; ++b) {
                    T* row =
                        dst + ((static_cast<std::size_t>(img) * h_ + a) * w_ + b) * (4 * c_out_);
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj) {
                            const T* cell =
                                src + ((static_cast<std::size_t>(img) * H + (2 * a + di)) * W +
                                       (2 * b + dj)) *
                                          c_out_;
                            std::copy(cell, cell + c_out_, row + (di * 2 + dj) * c_out_);
                        }
                }
    }

    int h_, w_, c_in_, c_out_;
    typename ParamStore<T>::Handle k_{}, b_{};
    Tensor<T> in_cache_;
};

/// 1x1 convolution: per-pixel linear map across channels. Shape-preserving
/// output stage of the reconstruction decoder (stride-1 kernel-1 transposed
/// conv and 1x1 conv coincide).
template <typename T>
class PointwiseConv {
public:
    PointwiseConv(ParamStore<T>& store, const std::string& name, int c_in, int c_out)
        : c_in_(c_in), c_out_(c_out) {
        require(c_in > 0 && c_out > 0, name + ": channel counts must be positive");
        w_ = store.add(name + ".W", {c_in, c_out});
        b_ = store.add(name + ".b", {c_out});
    }

    void init(ParamStore<T>& store, Rng& rng) {
        glorot_init(store.at(w_), c_in_, c_out_, rng);
    }

    Tensor<T> forward(ParamStore<T>& store, const Tensor<T>& in) {
        require(in.rank() == 4 && in.dim(3) == c_in_,
                "pointwise: input " + shape_str(in.shape()) + " expects trailing channel " +
                    std::to_string(c_in_));
        in_cache_ = in;
        const std::size_t rows = in.size() / c_in_;
        Shape os = in.shape();
        os.back() = c_out_;
        Tensor<T> out(os);
        ConstMatMap<T> X(in.data(), rows, c_in_);
        ConstMatMap<T> W(store.at(w_).value.data(), c_in_, c_out_);
        ConstVecMap<T> b(store.at(b_).value.data(), c_out_);
        MatMap<T> O(out.data(), rows, c_out_);
        O.noalias() = X * W;
        O.rowwise() += b;
        return out;
    }

    Tensor<T> backward(ParamStore<T>& store, const Tensor<T>& up) {
        require(up.shape().back() == c_out_, "pointwise: upstream shape mismatch");
        const std::size_t rows = up.size() / c_out_;
        require(rows == in_cache_.size() / static_cast<std::size_t>(c_in_),
                "pointwise: upstream row count mismatch");
        ConstMatMap<T> dO(up.data(), rows, c_out_);
        ConstMatMap<T> X(in_cache_.data(), rows, c_in_);
        ConstMatMap<T> W(store.at(w_).value.data(), c_in_, c_out_);
        MatMap<T> dW(store.at(w_).grad.data(), c_in_, c_out_);
        MatMap<T> db(store.at(b_).grad.data(), 1, c_out_);
        dW.noalias() += X.transpose() * dO;
        db.noalias() += dO.colwise().sum();
        Tensor<T> din(in_cache_.shape());
        MatMap<T> dX(din.data(), rows, c_in_);
        dX.noalias() = dO * W.transpose();
        return din;
    }

private:
    int c_in_, c_out_;
    typename ParamStore<T>::Handle w_{}, b_{};
    Tensor<T> in_cache_;
};

/// Elementwise max(0, x). Subgradient 0 at the kink.
template <typename T>
class Relu {
public:
    Tensor<T> forward(const Tensor<T>& in) {
        mask_.assign(in.size(), 0);
        min_abs_in_ = std::numeric_limits<T>::infinity();
        Tensor<T> out(in.shape());
        for (std::size_t i = 0; i < in.size(); ++i) {
            min_abs_in_ = std::min(min_abs_in_, std::abs(in[i]));
            if (in[i] > T{0}) {
                out[i] = in[i];
                mask_[i] = 1;
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& up) {
        require(up.size() == mask_.size(), "relu: upstream size mismatch");
        Tensor<T> din(up.shape());
        for (std::size_t i = 0; i < up.size(); ++i) din[i] = mask_[i] ? up[i] : T{0};
        return din;
    }

    /// Distance of the last forward's inputs to the kink. Finite-difference
    /// gradient checks resample inputs until this margin exceeds the step.
    T kink_margin() const { return min_abs_in_; }

private:
    std::vector<unsigned char> mask_;
    T min_abs_in_ = std::numeric_limits<T>::infinity();
};

/// Row softmax over the last axis, stabilized by max subtraction.
template <typename T>
class Softmax {
public:
    Tensor<T> forward(const Tensor<T>& in) {
        require(in.rank() >= 1, "softmax: rank must be >= 1");
        const int r = in.shape().back();
        const std::size_t rows = in.size() / r;
        Tensor<T> out(in.shape());
        for (std::size_t row = 0; row < rows; ++row) {
            const T* x = in.data() + row * r;
            T* y = out.data() + row * r;
            T mx = x[0];
            for (int j = 1; j < r; ++j) mx = std::max(mx, x[j]);
            T sum{0};
            for (int j = 0; j < r; ++j) {
                y[j] = std::exp(x[j] - mx);
                sum += y[j];
            }
            for (int j = 0; j < r; ++j) y[j] /= sum;
        }
        out_cache_ = out;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& up) {
        require(up.shape() == out_cache_.shape(), "softmax: upstream shape mismatch");
        const int r = up.shape().back();
        const std::size_t rows = up.size() / r;
        Tensor<T> din(up.shape());
        for (std::size_t row = 0; row < rows; ++row) {
            const T* dy = up.data() + row * r;
            const T* y = out_cache_.data() + row * r;
            T* dx = din.data() + row * r;
            T dot{0};
            for (int j = 0; j < r; ++j) dot += dy[j] * y[j];
            for (int j = 0; j < r; ++j) dx[j] = y[j] * (dy[j] - dot);
        }
        return din;
    }

    const Tensor<T>& cached_output() const { return out_cache_; }

private:
    Tensor<T> out_cache_;
};

}  // namespace azmi::nn
