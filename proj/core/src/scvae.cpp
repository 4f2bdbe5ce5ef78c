#include "azmi/scvae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace azmi::scvae {
namespace {

template <typename T>
void check_term_finite(const std::vector<double>& per_instance, const char* term) {
    for (std::size_t i = 0; i < per_instance.size(); ++i)
        if (!std::isfinite(per_instance[i]))
            throw NumericalError(std::string("elbo_loss: non-finite ") + term +
                                 " term at batch index " + std::to_string(i));
}

}  // namespace

template <typename T>
LossBreakdown elbo_loss(ScvaeModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                        const Tensor<T>& m, const HyperParams& hyper,
                        const std::vector<Tensor<T>>& eps, bool grads) {
    const int n = x.dim(0);
    const int J = model.config.latent_dim;
    const int L = static_cast<int>(eps.size());
    require(n >= 1, "elbo_loss: batch must be non-empty");
    require(L == hyper.mc_samples, "elbo_loss: need L = " + std::to_string(hyper.mc_samples) +
                                       " eps draws, got " + std::to_string(L));
    for (const auto& e : eps)
        require(e.shape() == Shape{n, J}, "elbo_loss: eps draw shape mismatch");

    LatentBatch<T> lat = model.encoder.forward(model.store, x, y);
    const std::size_t cells = static_cast<std::size_t>(model.config.grid_h) *
                              model.config.grid_w;
    const int r = model.config.n_classes;

    // Closed-form KL per instance.
    std::vector<double> kl_i(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < J; ++j) {
            const double lv = lat.log_var[static_cast<std::size_t>(i) * J + j];
            const double mu = lat.mu[static_cast<std::size_t>(i) * J + j];
            acc += std::exp(lv) + mu * mu - 1.0 - lv;
        }
        kl_i[i] = acc / 2.0;
    }
    check_term_finite<T>(kl_i, "kl");

    Tensor<T> dmu({n, J}), dlv({n, J});
    std::vector<double> recon_i(n, 0.0), class_i(n, 0.0);
    const double inv_nl = 1.0 / (static_cast<double>(n) * L);

    for (int l = 0; l < L; ++l) {
        Tensor<T> z({n, J});
        for (std::size_t k = 0; k < z.size(); ++k)
            z[k] = lat.mu[k] + std::exp(lat.log_var[k] / T{2}) * eps[l][k];

        Tensor<T> xh = model.decoder_x.forward(model.store, z, m);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            const T* a = xh.data() + i * cells;
            const T* b = x.data() + i * cells;
            for (std::size_t c = 0; c < cells; ++c) {
                const double d = static_cast<double>(a[c]) - static_cast<double>(b[c]);
                acc += d * d;
            }
            recon_i[i] += acc / (2.0 * L);
        }

        Tensor<T> yh = model.decoder_y.forward(model.store, z, m);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            const T* yi = y.data() + static_cast<std::size_t>(i) * r;
            const T* yhi = yh.data() + static_cast<std::size_t>(i) * r;
            for (int j = 0; j < r; ++j)
                if (yi[j] > T{0})
                    acc -= static_cast<double>(yi[j]) *
                           std::log(std::max(static_cast<double>(yhi[j]), 1e-30));
            class_i[i] += acc / L;
        }

        if (grads) {
            Tensor<T> dxh(xh.shape());
            for (std::size_t k = 0; k < dxh.size(); ++k)
                dxh[k] = static_cast<T>((xh[k] - x[k]) * inv_nl);
            auto [dz_x, dm_x] = model.decoder_x.backward(model.store, dxh);

            // Fused softmax + cross-entropy gradient on the logits.
            Tensor<T> dlogits(yh.shape());
            for (std::size_t k = 0; k < dlogits.size(); ++k)
                dlogits[k] = static_cast<T>((yh[k] - y[k]) * hyper.alpha * inv_nl);
            auto [dz_y, dm_y] = model.decoder_y.backward_from_logits(model.store, dlogits);

            for (std::size_t k = 0; k < dmu.size(); ++k) {
                const T dz = dz_x[k] + dz_y[k];
                dmu[k] += dz;
                dlv[k] += dz * eps[l][k] * std::exp(lat.log_var[k] / T{2}) / T{2};
            }
        }
    }
    check_term_finite<T>(recon_i, "reconstruction");
    check_term_finite<T>(class_i, "classification");

    LossBreakdown out;
    out.recon = std::accumulate(recon_i.begin(), recon_i.end(), 0.0) / n;
    out.class_term = std::accumulate(class_i.begin(), class_i.end(), 0.0) / n;
    out.kl = std::accumulate(kl_i.begin(), kl_i.end(), 0.0) / n;
    out.total = out.recon + hyper.alpha * out.class_term + hyper.beta * out.kl;
    if (!std::isfinite(out.total))
        throw NumericalError("elbo_loss: non-finite total loss");

    if (grads) {
        const T kl_scale = static_cast<T>(hyper.beta / n);
        for (std::size_t k = 0; k < dmu.size(); ++k) {
            dmu[k] += kl_scale * lat.mu[k];
            dlv[k] += kl_scale * (std::exp(lat.log_var[k]) - T{1}) / T{2};
        }
        model.encoder.backward(model.store, dmu, dlv);
    }
    return out;
}

template LossBreakdown elbo_loss(ScvaeModel<float>&, const Tensor<float>&, const Tensor<float>&,
                                 const Tensor<float>&, const HyperParams&,
                                 const std::vector<Tensor<float>>&, bool);
template LossBreakdown elbo_loss(ScvaeModel<double>&, const Tensor<double>&,
                                 const Tensor<double>&, const Tensor<double>&,
                                 const HyperParams&, const std::vector<Tensor<double>>&, bool);

template <typename T>
void pack_batch(const std::vector<data::Instance>& instances,
                const std::vector<std::size_t>& idx, int grid_h, int grid_w, int r, int m_len,
                Tensor<T>& x, Tensor<T>& y, Tensor<T>& m) {
    const int n = static_cast<int>(idx.size());
    const std::size_t cells = static_cast<std::size_t>(grid_h) * grid_w;
    x = Tensor<T>({n, grid_h, grid_w});
    y = Tensor<T>({n, r});
    m = Tensor<T>({n, m_len});
    for (int i = 0; i < n; ++i) {
        const data::Instance& inst = instances[idx[i]];
        require(inst.x.size() == cells && static_cast<int>(inst.y.size()) == r &&
                    static_cast<int>(inst.m.size()) == m_len,
                "pack_batch: instance shape mismatch");
        for (std::size_t c = 0; c < cells; ++c)
            x[i * cells + c] = static_cast<T>(inst.x[c]);
        for (int j = 0; j < r; ++j)
            y[static_cast<std::size_t>(i) * r + j] = static_cast<T>(inst.y[j]);
        for (int j = 0; j < m_len; ++j)
            m[static_cast<std::size_t>(i) * m_len + j] = static_cast<T>(inst.m[j]);
    }
}

template void pack_batch(const std::vector<data::Instance>&, const std::vector<std::size_t>&,
                         int, int, int, int, Tensor<float>&, Tensor<float>&, Tensor<float>&);
template void pack_batch(const std::vector<data::Instance>&, const std::vector<std::size_t>&,
                         int, int, int, int, Tensor<double>&, Tensor<double>&, Tensor<double>&);

namespace {

/// Forward-only loss over a full instance list, in fixed order, chunked to
/// the batch size. eps_full holds L tensors sized [n_total, J].
LossBreakdown eval_loss(ScvaeModel<float>& model, const std::vector<data::Instance>& instances,
                        const HyperParams& hyper,
                        const std::vector<Tensor<float>>& eps_full) {
    const auto& cfg = model.config;
    const std::size_t n = instances.size();
    LossBreakdown agg;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < n; start += hyper.batch_size) {
        const std::size_t end = std::min(n, start + hyper.batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tensor<float> x, y, m;
        pack_batch(instances, idx, cfg.grid_h, cfg.grid_w, cfg.n_classes, cfg.n_wells, x, y, m);
        std::vector<Tensor<float>> eps(eps_full.size());
        const int bs = static_cast<int>(end - start);
        for (std::size_t l = 0; l < eps_full.size(); ++l) {
            eps[l] = Tensor<float>({bs, cfg.latent_dim});
            std::copy(eps_full[l].data() + start * cfg.latent_dim,
                      eps_full[l].data() + end * cfg.latent_dim, eps[l].data());
        }
        const LossBreakdown lb = elbo_loss(model, x, y, m, hyper, eps, /*grads=*/false);
        const double w = static_cast<double>(bs) / static_cast<double>(n);
        agg.total += lb.total * w;
        agg.recon += lb.recon * w;
        agg.class_term += lb.class_term * w;
        agg.kl += lb.kl * w;
    }
    return agg;
}

}  // namespace

TrainResult train_scvae(ScvaeModel<float>& model, const data::DatasetSplit& split,
                        const HyperParams& hyper) {
    hyper.validate();
    const auto& cfg = model.config;
    require(hyper.latent_dim == cfg.latent_dim, "train: latent_dim disagrees with the model");
    require(!split.train.empty(), "train: empty training set");
    require(!split.val.empty(), "train: empty validation set");
    require(static_cast<std::size_t>(hyper.batch_size) <= split.train.size(),
            "train: batch_size " + std::to_string(hyper.batch_size) +
                " exceeds training-set size " + std::to_string(split.train.size()));

    Rng train_rng = Rng::substream(hyper.seed, "train");
    Rng val_rng = Rng::substream(hyper.seed, "val-eps");

    // Validation noise is drawn once and reused every epoch, so the early
    // stopping comparison is deterministic.
    std::vector<Tensor<float>> val_eps(hyper.mc_samples);
    for (auto& e : val_eps) {
        e = Tensor<float>({static_cast<int>(split.val.size()), cfg.latent_dim});
        for (auto& v : e.vec()) v = static_cast<float>(val_rng.normal());
    }

    TrainResult result;
    nn::AdamState<float>& adam = result.adam;
    adam.lr = hyper.lr;
    adam.beta1 = hyper.adam_beta1;
    adam.beta2 = hyper.adam_beta2;
    adam.eps = hyper.adam_eps;

    std::vector<Tensor<float>> best_snapshot;
    double best_val = std::numeric_limits<double>::infinity();
    int wait = 0;

    std::vector<std::size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        train_rng.shuffle(order);
        LossBreakdown train_agg;
        try {
            for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
                const std::size_t end = std::min(order.size(), start + hyper.batch_size);
                const std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
                Tensor<float> x, y, m;
                pack_batch(split.train, idx, cfg.grid_h, cfg.grid_w, cfg.n_classes, cfg.n_wells,
                           x, y, m);
                std::vector<Tensor<float>> eps(hyper.mc_samples);
                for (auto& e : eps) {
                    e = Tensor<float>({static_cast<int>(idx.size()), cfg.latent_dim});
                    for (auto& v : e.vec()) v = static_cast<float>(train_rng.normal());
                }
                model.store.zero_grads();
                const LossBreakdown lb = elbo_loss(model, x, y, m, hyper, eps);
                nn::adam_step(model.store, adam);
                const double w =
                    static_cast<double>(idx.size()) / static_cast<double>(order.size());
                train_agg.total += lb.total * w;
                train_agg.recon += lb.recon * w;
                train_agg.class_term += lb.class_term * w;
                train_agg.kl += lb.kl * w;
            }
        } catch (const NumericalError& e) {
            result.diverged = true;
            result.divergence_msg = e.what();
            break;
        }

        const LossBreakdown val = eval_loss(model, split.val, hyper, val_eps);
        result.history.push_back({train_agg, val});

        if (val.total < best_val) {
            best_val = val.total;
            best_snapshot = model.store.snapshot();
            result.best_epoch = epoch;
            wait = 0;
        } else {
            ++wait;
        }
        if (wait >= hyper.patience) break;
    }

    if (!best_snapshot.empty()) model.store.restore(best_snapshot);
    result.best_val = best_val;
    return result;
}

}  // namespace azmi::scvae
