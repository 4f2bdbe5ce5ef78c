#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "azmi/scvae.hpp"

namespace azmi::post {

struct PosteriorConfig {
    int n_mc = 100;
    std::uint64_t seed = 0;
    bool store_full_cov = false;  // fields default to diagonal/std only
    bool keep_samples = false;

    void validate() const {
        require(n_mc >= 1, "n_mc must be >= 1");
        require(!store_full_cov || n_mc >= 2, "covariance needs n_mc >= 2");
    }
};

/// Monte Carlo summary of a posterior predictive sample set.
struct PosteriorSummary {
    std::size_t dim = 0;
    std::size_t n_samples = 0;
    std::vector<double> mean;
    std::vector<double> std_dev;                       // empty when n_samples < 2
    std::optional<std::vector<double>> cov;            // row-major dim x dim
    std::optional<std::vector<std::vector<double>>> samples;
};

/// Draw n_mc latent samples from the prior N(0, I) and decode each with
/// the measurements m. Deterministic per cfg.seed; rejects non-finite
/// (corrupted) parameters.
std::vector<nn::TensorF> sample_posterior_x(scvae::ScvaeModel<float>& model,
                                            const std::vector<float>& m,
                                            const PosteriorConfig& cfg);
std::vector<std::vector<float>> sample_posterior_y(scvae::ScvaeModel<float>& model,
                                                   const std::vector<float>& m,
                                                   const PosteriorConfig& cfg);

/// Empirical mean, 1/(n-1) covariance diagonal (or full matrix), and std.
PosteriorSummary summarize(const std::vector<std::vector<double>>& samples,
                           const PosteriorConfig& cfg);

/// Argmax class (1-based); ties break toward the lowest index. The input
/// must lie on the probability simplex within 1e-4 on the sum.
int classify(const std::vector<double>& y_mean);

/// Elementwise |x_true - x_mean|.
nn::TensorF abs_error_map(const nn::TensorF& x_true, const nn::TensorF& x_mean);

}  // namespace azmi::post
