#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "azmi/adam.hpp"
#include "azmi/layers.hpp"
#include "azmi/param_store.hpp"
#include "azmi/pipeline.hpp"
#include "azmi/rng.hpp"

namespace azmi::scvae {

using nn::Shape;
using nn::Tensor;

/// Architecture description; the spatial chain is fixed to two stride-2
/// stages, so grid dims must be divisible by 4.
struct ModelConfig {
    int grid_h = 160;
    int grid_w = 160;
    int n_classes = 4;
    int n_wells = 5;
    int latent_dim = 2;
    int conv1_filters = 32;
    int conv2_filters = 64;
    int enc_dense = 16;
    int cls_h1 = 128;
    int cls_h2 = 64;
    int cls_h3 = 32;

    void validate() const {
        require(grid_h >= 4 && grid_w >= 4 && grid_h % 4 == 0 && grid_w % 4 == 0,
                "model grid dims must be multiples of 4");
        require(n_classes >= 1 && n_wells >= 1 && latent_dim >= 1,
                "model dims must be positive");
        require(conv1_filters >= 1 && conv2_filters >= 1 && enc_dense >= 1 && cls_h1 >= 1 &&
                    cls_h2 >= 1 && cls_h3 >= 1,
                "model layer widths must be positive");
    }
    int cells() const { return grid_h * grid_w; }
    int bottleneck() const { return (grid_h / 4) * (grid_w / 4) * conv2_filters; }
};

/// Training hyper-parameters and loss scales.
struct HyperParams {
    int latent_dim = 2;
    double alpha = 1.0;       // classification-term scale
    double beta = 1.0;        // KL-term scale
    int mc_samples = 1;       // L
    int batch_size = 128;     // R
    int patience = 200;       // epochs without validation improvement
    int max_epochs = 1000;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-7;

    void validate() const {
        require(latent_dim >= 1, "latent_dim must be >= 1");
        require(alpha >= 0.0, "alpha must be >= 0");
        require(beta > 0.0, "beta must be > 0");
        require(mc_samples >= 1, "mc_samples must be >= 1");
        require(batch_size >= 1, "batch_size must be >= 1");
        require(patience >= 1, "patience must be >= 1");
        require(max_epochs >= 1, "max_epochs must be >= 1");
        require(lr > 0.0 || lr == 0.0, "learning rate must be finite");
    }
};

/// Diagonal Gaussian over the latent space, one row per batch instance.
template <typename T>
struct LatentBatch {
    Tensor<T> mu;       // [n, J]
    Tensor<T> log_var;  // [n, J]
};

/// Per-instance view of the variational posterior.
template <typename T>
struct LatentPosterior {
    std::vector<T> mu;
    std::vector<T> log_var;
};

/// Per-batch loss terms under the minimization sign convention:
/// total = recon + alpha * class_term + beta * kl.
struct LossBreakdown {
    double total = 0.0;
    double recon = 0.0;
    double class_term = 0.0;
    double kl = 0.0;
};

/// Gaussian reconstruction term for one instance: 1/2 ||x - xhat||^2
/// (unit-variance log-likelihood up to constants).
template <typename T>
double reconstruction_term(const Tensor<T>& x, const Tensor<T>& xhat) {
    require(x.shape() == xhat.shape(), "reconstruction_term: shape mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = static_cast<double>(xhat[k]) - static_cast<double>(x[k]);
        acc += d * d;
    }
    return acc / 2.0;
}

/// Categorical term for one instance: -sum_j y_j ln yhat_j.
template <typename T>
double cross_entropy_term(const std::vector<T>& y, const std::vector<T>& yhat) {
    require(y.size() == yhat.size(), "cross_entropy_term: length mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j)
        if (y[j] > T{0})
            acc -= static_cast<double>(y[j]) *
                   std::log(std::max(static_cast<double>(yhat[j]), 1e-30));
    return acc;
}

/// z = mu + exp(log_var / 2) .* eps
template <typename T>
std::vector<T> reparameterize(const LatentPosterior<T>& post, const std::vector<T>& eps) {
    require(post.mu.size() == post.log_var.size() && post.mu.size() == eps.size(),
            "reparameterize: dimension mismatch");
    std::vector<T> z(post.mu.size());
    for (std::size_t j = 0; j < z.size(); ++j)
        z[j] = post.mu[j] + std::exp(post.log_var[j] / T{2}) * eps[j];
    return z;
}

/// Closed-form KL divergence from N(mu, diag(sigma^2)) to N(0, I):
/// 1/2 sum_j (sigma_j^2 + mu_j^2 - 1 - log sigma_j^2).
template <typename T>
T kl_closed_form(const LatentPosterior<T>& post) {
    require(post.mu.size() == post.log_var.size(), "kl: dimension mismatch");
    T acc{0};
    for (std::size_t j = 0; j < post.mu.size(); ++j) {
        const T var = std::exp(post.log_var[j]);
        acc += var + post.mu[j] * post.mu[j] - T{1} - post.log_var[j];
    }
    return acc / T{2};
}

/// Shared encoder: the class vector is embedded to the grid, concatenated
/// with the field as a second channel, reduced by two stride-2 convs and a
/// dense layer, then projected to the latent mean and log-variance.
template <typename T>
class EncoderNet {
public:
    EncoderNet(nn::ParamStore<T>& store, const ModelConfig& cfg)
        : cfg_(cfg),
          embed_(store, "enc.embed", cfg.n_classes, cfg.cells()),
          conv1_(store, "enc.conv1", cfg.grid_h, cfg.grid_w, 2, cfg.conv1_filters),
          conv2_(store, "enc.conv2", cfg.grid_h / 2, cfg.grid_w / 2, cfg.conv1_filters,
                 cfg.conv2_filters),
          shared_(store, "enc.shared", cfg.bottleneck(), cfg.enc_dense),
          mu_head_(store, "enc.mu", cfg.enc_dense, cfg.latent_dim),
          lv_head_(store, "enc.logvar", cfg.enc_dense, cfg.latent_dim) {}

    void init(nn::ParamStore<T>& store, Rng& rng) {
        embed_.init(store, rng);
        conv1_.init(store, rng);
        conv2_.init(store, rng);
        shared_.init(store, rng);
        mu_head_.init(store, rng);
        lv_head_.init(store, rng);
    }

    /// x [n, h, w], y [n, r] -> (mu, log_var) each [n, J].
    LatentBatch<T> forward(nn::ParamStore<T>& store, const Tensor<T>& x, const Tensor<T>& y) {
        require(x.rank() == 3 && x.dim(1) == cfg_.grid_h && x.dim(2) == cfg_.grid_w,
                "encode: x " + nn::shape_str(x.shape()) + " expects [n," +
                    std::to_string(cfg_.grid_h) + "," + std::to_string(cfg_.grid_w) + "]");
        require(y.rank() == 2 && y.dim(1) == cfg_.n_classes && y.dim(0) == x.dim(0),
                "encode: y shape mismatch");
        const int n = x.dim(0);
        Tensor<T> emb = embed_act_.forward(embed_.forward(store, y));
        emb.reshape_in_place({n, cfg_.grid_h, cfg_.grid_w, 1});
        Tensor<T> x4 = x.reshaped({n, cfg_.grid_h, cfg_.grid_w, 1});
        Tensor<T> cat = nn::concat_last(x4, emb);
        Tensor<T> h1 = act1_.forward(conv1_.forward(store, cat));
        Tensor<T> h2 = act2_.forward(conv2_.forward(store, h1));
        h2.reshape_in_place({n, cfg_.bottleneck()});
        Tensor<T> s = act3_.forward(shared_.forward(store, h2));
        return {mu_head_.forward(store, s), lv_head_.forward(store, s)};
    }

    /// Smallest |pre-activation| seen by this net's ReLUs in the last
    /// forward pass.
    T kink_margin() const {
        return std::min({embed_act_.kink_margin(), act1_.kink_margin(), act2_.kink_margin(),
                         act3_.kink_margin()});
    }

    /// Returns (dx [n,h,w], dy [n,r]).
    std::pair<Tensor<T>, Tensor<T>> backward(nn::ParamStore<T>& store, const Tensor<T>& dmu,
                                             const Tensor<T>& dlv) {
        Tensor<T> ds = mu_head_.backward(store, dmu);
        const Tensor<T> ds2 = lv_head_.backward(store, dlv);
        for (std::size_t i = 0; i < ds.size(); ++i) ds[i] += ds2[i];
        Tensor<T> df = shared_.backward(store, act3_.backward(ds));
        const int n = df.dim(0);
        df.reshape_in_place({n, cfg_.grid_h / 4, cfg_.grid_w / 4, cfg_.conv2_filters});
        Tensor<T> dh1 = conv2_.backward(store, act2_.backward(df));
        Tensor<T> dcat = conv1_.backward(store, act1_.backward(dh1));
        Tensor<T> dx4, demb;
        nn::split_last(dcat, 1, 1, dx4, demb);
        demb.reshape_in_place({n, cfg_.cells()});
        Tensor<T> dy = embed_.backward(store, embed_act_.backward(demb));
        return {dx4.reshaped({n, cfg_.grid_h, cfg_.grid_w}), std::move(dy)};
    }

private:
    ModelConfig cfg_;
    nn::Dense<T> embed_;
    nn::Relu<T> embed_act_;
    nn::Conv2d<T> conv1_;
    nn::Relu<T> act1_;
    nn::Conv2d<T> conv2_;
    nn::Relu<T> act2_;
    nn::Dense<T> shared_;
    nn::Relu<T> act3_;
    nn::Dense<T> mu_head_;
    nn::Dense<T> lv_head_;
};

/// Reconstruction decoder: (z, m) -> dense to the conv bottleneck, two
/// stride-2 transposed convs back to the full grid, linear 1-channel output.
template <typename T>
class DecoderXNet {
public:
    DecoderXNet(nn::ParamStore<T>& store, const ModelConfig& cfg)
        : cfg_(cfg),
          fc_(store, "decx.fc", cfg.latent_dim + cfg.n_wells, cfg.bottleneck()),
          tconv1_(store, "decx.tconv1", cfg.grid_h / 4, cfg.grid_w / 4, cfg.conv2_filters,
                  cfg.conv2_filters),
          tconv2_(store, "decx.tconv2", cfg.grid_h / 2, cfg.grid_w / 2, cfg.conv2_filters,
                  cfg.conv1_filters),
          out_(store, "decx.out", cfg.conv1_filters, 1) {}

    void init(nn::ParamStore<T>& store, Rng& rng) {
        fc_.init(store, rng);
        tconv1_.init(store, rng);
        tconv2_.init(store, rng);
        out_.init(store, rng);
    }

    /// z [n, J], m [n, M] -> xhat [n, h, w].
    Tensor<T> forward(nn::ParamStore<T>& store, const Tensor<T>& z, const Tensor<T>& m) {
        require(z.rank() == 2 && z.dim(1) == cfg_.latent_dim, "decode_x: z shape mismatch");
        require(m.rank() == 2 && m.dim(1) == cfg_.n_wells && m.dim(0) == z.dim(0),
                "decode_x: m shape mismatch");
        const int n = z.dim(0);
        Tensor<T> u = fc_act_.forward(fc_.forward(store, nn::concat_last(z, m)));
        u.reshape_in_place({n, cfg_.grid_h / 4, cfg_.grid_w / 4, cfg_.conv2_filters});
        Tensor<T> v = act1_.forward(tconv1_.forward(store, u));
        Tensor<T> g = act2_.forward(tconv2_.forward(store, v));
        Tensor<T> xh = out_.forward(store, g);
        return xh.reshaped({n, cfg_.grid_h, cfg_.grid_w});
    }

    T kink_margin() const {
        return std::min({fc_act_.kink_margin(), act1_.kink_margin(), act2_.kink_margin()});
    }

    /// Returns (dz [n,J], dm [n,M]).
    std::pair<Tensor<T>, Tensor<T>> backward(nn::ParamStore<T>& store, const Tensor<T>& dxh) {
        const int n = dxh.dim(0);
        Tensor<T> dg = out_.backward(store, dxh.reshaped({n, cfg_.grid_h, cfg_.grid_w, 1}));
        Tensor<T> dv = tconv2_.backward(store, act2_.backward(dg));
        Tensor<T> du = tconv1_.backward(store, act1_.backward(dv));
        du.reshape_in_place({n, cfg_.bottleneck()});
        Tensor<T> dzm = fc_.backward(store, fc_act_.backward(du));
        Tensor<T> dz, dm;
        nn::split_last(dzm, cfg_.latent_dim, cfg_.n_wells, dz, dm);
        return {std::move(dz), std::move(dm)};
    }

private:
    ModelConfig cfg_;
    nn::Dense<T> fc_;
    nn::Relu<T> fc_act_;
    nn::TransposedConv2d<T> tconv1_;
    nn::Relu<T> act1_;
    nn::TransposedConv2d<T> tconv2_;
    nn::Relu<T> act2_;
    nn::PointwiseConv<T> out_;
};

/// Classification decoder: (z, m) -> three ReLU dense layers -> softmax.
template <typename T>
class DecoderYNet {
public:
    DecoderYNet(nn::ParamStore<T>& store, const ModelConfig& cfg)
        : cfg_(cfg),
          d1_(store, "decy.fc1", cfg.latent_dim + cfg.n_wells, cfg.cls_h1),
          d2_(store, "decy.fc2", cfg.cls_h1, cfg.cls_h2),
          d3_(store, "decy.fc3", cfg.cls_h2, cfg.cls_h3),
          d4_(store, "decy.out", cfg.cls_h3, cfg.n_classes) {}

    void init(nn::ParamStore<T>& store, Rng& rng) {
        d1_.init(store, rng);
        d2_.init(store, rng);
        d3_.init(store, rng);
        d4_.init(store, rng);
    }

    /// z [n, J], m [n, M] -> probabilities [n, r] on the simplex.
    Tensor<T> forward(nn::ParamStore<T>& store, const Tensor<T>& z, const Tensor<T>& m) {
        require(z.rank() == 2 && z.dim(1) == cfg_.latent_dim, "decode_y: z shape mismatch");
        require(m.rank() == 2 && m.dim(1) == cfg_.n_wells && m.dim(0) == z.dim(0),
                "decode_y: m shape mismatch");
        Tensor<T> h = a1_.forward(d1_.forward(store, nn::concat_last(z, m)));
        h = a2_.forward(d2_.forward(store, h));
        h = a3_.forward(d3_.forward(store, h));
        return softmax_.forward(d4_.forward(store, h));
    }

    T kink_margin() const {
        return std::min({a1_.kink_margin(), a2_.kink_margin(), a3_.kink_margin()});
    }

    /// Backward from a gradient on the softmax *logits* (the categorical
    /// cross-entropy gradient (yhat - y) enters here). Returns (dz, dm).
    std::pair<Tensor<T>, Tensor<T>> backward_from_logits(nn::ParamStore<T>& store,
                                                         const Tensor<T>& dlogits) {
        Tensor<T> dh = d4_.backward(store, dlogits);
        dh = d3_.backward(store, a3_.backward(dh));
        dh = d2_.backward(store, a2_.backward(dh));
        Tensor<T> dzm = d1_.backward(store, a1_.backward(dh));
        Tensor<T> dz, dm;
        nn::split_last(dzm, cfg_.latent_dim, cfg_.n_wells, dz, dm);
        return {std::move(dz), std::move(dm)};
    }

    /// Backward from a gradient on the probabilities (general path).
    std::pair<Tensor<T>, Tensor<T>> backward(nn::ParamStore<T>& store, const Tensor<T>& dprobs) {
        return backward_from_logits(store, softmax_.backward(dprobs));
    }

private:
    ModelConfig cfg_;
    nn::Dense<T> d1_;
    nn::Relu<T> a1_;
    nn::Dense<T> d2_;
    nn::Relu<T> a2_;
    nn::Dense<T> d3_;
    nn::Relu<T> a3_;
    nn::Dense<T> d4_;
    nn::Softmax<T> softmax_;
};

/// The full multi-task model: one shared encoder, two decoders, one
/// parameter store. Freshly constructed models hold all-zero parameters;
/// call init_params for the seeded fan-based initialization.
template <typename T>
class ScvaeModel {
public:
    explicit ScvaeModel(const ModelConfig& cfg)
        : config(validated(cfg)), encoder(store, cfg), decoder_x(store, cfg),
          decoder_y(store, cfg) {}

    void init_params(Rng& rng) {
        encoder.init(store, rng);
        decoder_x.init(store, rng);
        decoder_y.init(store, rng);
    }

    /// Single-instance encode: returns the per-instance posterior.
    LatentPosterior<T> encode(const Tensor<T>& x, const std::vector<T>& y) {
        Tensor<T> xb = x.reshaped({1, config.grid_h, config.grid_w});
        Tensor<T> yb({1, config.n_classes}, y);
        LatentBatch<T> lat = encoder.forward(store, xb, yb);
        return {lat.mu.vec(), lat.log_var.vec()};
    }

    /// Single-instance decoders.
    Tensor<T> decode_x(const std::vector<T>& z, const std::vector<T>& m) {
        Tensor<T> zb({1, config.latent_dim}, z);
        Tensor<T> mb({1, config.n_wells}, m);
        return decoder_x.forward(store, zb, mb).reshaped({config.grid_h, config.grid_w});
    }
    std::vector<T> decode_y(const std::vector<T>& z, const std::vector<T>& m) {
        Tensor<T> zb({1, config.latent_dim}, z);
        Tensor<T> mb({1, config.n_wells}, m);
        return decoder_y.forward(store, zb, mb).vec();
    }

    /// Smallest |ReLU pre-activation| across all three nets in their last
    /// forward passes (gradient-check input screening).
    T kink_margin() const {
        return std::min(
            {encoder.kink_margin(), decoder_x.kink_margin(), decoder_y.kink_margin()});
    }

    ModelConfig config;
    nn::ParamStore<T> store;
    EncoderNet<T> encoder;
    DecoderXNet<T> decoder_x;
    DecoderYNet<T> decoder_y;

private:
    static const ModelConfig& validated(const ModelConfig& cfg) {
        cfg.validate();
        return cfg;
    }
};

/// Batched ELBO objective (minimization sign). Accumulates parameter
/// gradients unless grads == false. eps holds L noise tensors [n, J].
/// Throws NumericalError with the offending term on non-finite loss.
template <typename T>
LossBreakdown elbo_loss(ScvaeModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                        const Tensor<T>& m, const HyperParams& hyper,
                        const std::vector<Tensor<T>>& eps, bool grads = true);

/// Epoch-level loss history entry.
struct EpochStats {
    LossBreakdown train;
    LossBreakdown val;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;        // 0-based index into history
    double best_val = 0.0;
    bool diverged = false;
    std::string divergence_msg;
    nn::AdamState<float> adam;  // final optimizer state, for resumable runs
};

/// Minibatch ADAM training with early stopping on the validation total;
/// the best-validation parameters are restored into the model before
/// returning. Deterministic for a fixed hyper.seed.
TrainResult train_scvae(ScvaeModel<float>& model, const data::DatasetSplit& split,
                        const HyperParams& hyper);

/// Pack instances (by index) into batch tensors.
template <typename T>
void pack_batch(const std::vector<data::Instance>& instances,
                const std::vector<std::size_t>& idx, int grid_h, int grid_w, int r, int m_len,
                Tensor<T>& x, Tensor<T>& y, Tensor<T>& m);

extern template LossBreakdown elbo_loss(ScvaeModel<float>&, const Tensor<float>&,
                                        const Tensor<float>&, const Tensor<float>&,
                                        const HyperParams&, const std::vector<Tensor<float>>&,
                                        bool);
extern template LossBreakdown elbo_loss(ScvaeModel<double>&, const Tensor<double>&,
                                        const Tensor<double>&, const Tensor<double>&,
                                        const HyperParams&, const std::vector<Tensor<double>>&,
                                        bool);
extern template void pack_batch(const std::vector<data::Instance>&,
                                const std::vector<std::size_t>&, int, int, int, int,
                                Tensor<float>&, Tensor<float>&, Tensor<float>&);
extern template void pack_batch(const std::vector<data::Instance>&,
                                const std::vector<std::size_t>&, int, int, int, int,
                                Tensor<double>&, Tensor<double>&, Tensor<double>&);

}  // namespace azmi::scvae
