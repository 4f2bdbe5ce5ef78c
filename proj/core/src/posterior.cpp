#include "azmi/posterior.hpp"

#include <cmath>

#include "azmi/rng.hpp"

namespace azmi::post {
namespace {

using scvae::ScvaeModel;
using scvae::Tensor;

/// Prior draws z ~ N(0, I), one row per MC sample.
Tensor<float> draw_prior(int n_mc, int latent_dim, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, "mc");
    Tensor<float> z({n_mc, latent_dim});
    for (auto& v : z.vec()) v = static_cast<float>(rng.normal());
    return z;
}

void check_model(const ScvaeModel<float>& model, const std::vector<float>& m) {
    require(model.store.values_finite(),
            "posterior: model parameters contain non-finite values");
    require(static_cast<int>(m.size()) == model.config.n_wells,
            "posterior: m has length " + std::to_string(m.size()) + ", model expects " +
                std::to_string(model.config.n_wells));
}

Tensor<float> tile_measurements(const std::vector<float>& m, int n_mc) {
    Tensor<float> mb({n_mc, static_cast<int>(m.size())});
    for (int i = 0; i < n_mc; ++i)
        std::copy(m.begin(), m.end(), mb.data() + static_cast<std::size_t>(i) * m.size());
    return mb;
}

}  // namespace

std::vector<nn::TensorF> sample_posterior_x(ScvaeModel<float>& model,
                                            const std::vector<float>& m,
                                            const PosteriorConfig& cfg) {
    cfg.validate();
    check_model(model, m);
    const Tensor<float> z = draw_prior(cfg.n_mc, model.config.latent_dim, cfg.seed);
    const Tensor<float> mb = tile_measurements(m, cfg.n_mc);
    Tensor<float> fields = model.decoder_x.forward(model.store, z, mb);
    std::vector<nn::TensorF> out;
    out.reserve(cfg.n_mc);
    const std::size_t cells = static_cast<std::size_t>(model.config.grid_h) *
                              model.config.grid_w;
    for (int j = 0; j < cfg.n_mc; ++j) {
        nn::TensorF f({model.config.grid_h, model.config.grid_w});
        std::copy(fields.data() + j * cells, fields.data() + (j + 1) * cells, f.data());
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<std::vector<float>> sample_posterior_y(ScvaeModel<float>& model,
                                                   const std::vector<float>& m,
                                                   const PosteriorConfig& cfg) {
    cfg.validate();
    check_model(model, m);
    const Tensor<float> z = draw_prior(cfg.n_mc, model.config.latent_dim, cfg.seed);
    const Tensor<float> mb = tile_measurements(m, cfg.n_mc);
    Tensor<float> probs = model.decoder_y.forward(model.store, z, mb);
    const int r = model.config.n_classes;
    std::vector<std::vector<float>> out(cfg.n_mc, std::vector<float>(r));
    for (int j = 0; j < cfg.n_mc; ++j)
        std::copy(probs.data() + static_cast<std::size_t>(j) * r,
                  probs.data() + static_cast<std::size_t>(j + 1) * r, out[j].begin());
    return out;
}

PosteriorSummary summarize(const std::vector<std::vector<double>>& samples,
                           const PosteriorConfig& cfg) {
    require(!samples.empty(), "summarize: empty sample list");
    const std::size_t n = samples.size();
    const std::size_t d = samples[0].size();
    for (const auto& s : samples)
        require(s.size() == d, "summarize: inconsistent sample dimensions");

    PosteriorSummary out;
    out.dim = d;
    out.n_samples = n;
    out.mean.assign(d, 0.0);
    for (const auto& s : samples)
        for (std::size_t k = 0; k < d; ++k) out.mean[k] += s[k];
    for (auto& v : out.mean) v /= static_cast<double>(n);

    if (n >= 2) {
        if (cfg.store_full_cov) {
            out.cov.emplace(d * d, 0.0);
            auto& cov = *out.cov;
            for (const auto& s : samples)
                for (std::size_t i = 0; i < d; ++i) {
                    const double di = s[i] - out.mean[i];
                    for (std::size_t j = 0; j <= i; ++j)
                        cov[i * d + j] += di * (s[j] - out.mean[j]);
                }
            const double norm = 1.0 / static_cast<double>(n - 1);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j <= i; ++j) {
                    cov[i * d + j] *= norm;
                    cov[j * d + i] = cov[i * d + j];
                }
            out.std_dev.resize(d);
            for (std::size_t k = 0; k < d; ++k)
                out.std_dev[k] = std::sqrt(std::max(0.0, cov[k * d + k]));
        } else {
            out.std_dev.assign(d, 0.0);
            for (const auto& s : samples)
                for (std::size_t k = 0; k < d; ++k) {
                    const double dk = s[k] - out.mean[k];
                    out.std_dev[k] += dk * dk;
                }
            const double norm = 1.0 / static_cast<double>(n - 1);
            for (auto& v : out.std_dev) v = std::sqrt(std::max(0.0, v * norm));
        }
    }
    if (cfg.keep_samples) out.samples = samples;
    return out;
}

int classify(const std::vector<double>& y_mean) {
    require(!y_mean.empty(), "classify: empty probability vector");
    double sum = 0.0;
    for (double v : y_mean) {
        require(std::isfinite(v), "classify: non-finite probability");
        sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-4,
            "classify: input is not a probability vector (sum = " + std::to_string(sum) + ")");
    std::size_t best = 0;
    for (std::size_t j = 1; j < y_mean.size(); ++j)
        if (y_mean[j] > y_mean[best]) best = j;
    return static_cast<int>(best) + 1;
}

nn::TensorF abs_error_map(const nn::TensorF& x_true, const nn::TensorF& x_mean) {
    require(x_true.shape() == x_mean.shape(), "abs_error_map: shape mismatch");
    nn::TensorF out(x_true.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::abs(x_true[i] - x_mean[i]);
    return out;
}

}  // namespace azmi::post
