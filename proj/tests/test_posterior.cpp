/// Posterior tests: the hand-computed two-sample summary, permutation
/// invariance, PSD covariance, argmax tie rules, seeded reproducibility of
/// the prior-draw samplers, and MC convergence of the posterior mean.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "azmi/posterior.hpp"

using namespace azmi;
using namespace azmi::post;

namespace {

scvae::ModelConfig small_config() {
    scvae::ModelConfig cfg;
    cfg.grid_h = 16;
    cfg.grid_w = 16;
    cfg.n_classes = 4;
    cfg.n_wells = 3;
    cfg.latent_dim = 2;
    cfg.conv1_filters = 4;
    cfg.conv2_filters = 8;
    cfg.enc_dense = 8;
    cfg.cls_h1 = 16;
    cfg.cls_h2 = 8;
    cfg.cls_h3 = 8;
    return cfg;
}

}  // namespace

TEST_CASE("summarize reproduces the hand-computed two-sample case") {
    PosteriorConfig cfg;
    cfg.n_mc = 2;
    cfg.store_full_cov = true;
    const auto s = summarize({{0.0, 0.0}, {2.0, 2.0}}, cfg);
    CHECK(s.mean == std::vector<double>{1.0, 1.0});
    REQUIRE(s.cov.has_value());
    CHECK((*s.cov) == std::vector<double>{2.0, 2.0, 2.0, 2.0});
    CHECK(s.std_dev[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(s.std_dev[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("summarize: repeated samples give zero std; single sample gives none") {
    PosteriorConfig cfg;
    const auto s = summarize({{1.5, -2.0}, {1.5, -2.0}, {1.5, -2.0}}, cfg);
    CHECK(s.std_dev == std::vector<double>{0.0, 0.0});

    const auto single = summarize({{1.5, -2.0}}, cfg);
    CHECK(single.mean == std::vector<double>{1.5, -2.0});
    CHECK(single.std_dev.empty());
    CHECK_FALSE(single.cov.has_value());
}

TEST_CASE("summarize std equals sqrt of the covariance diagonal") {
    Rng rng(3);
    PosteriorConfig cfg;
    cfg.store_full_cov = true;
    std::vector<std::vector<double>> samples(25, std::vector<double>(4));
    for (auto& s : samples)
        for (auto& v : s) v = rng.normal();
    const auto sum = summarize(samples, cfg);
    REQUIRE(sum.cov.has_value());
    for (int k = 0; k < 4; ++k)
        CHECK(sum.std_dev[k] == doctest::Approx(std::sqrt((*sum.cov)[k * 4 + k])).epsilon(1e-12));
}

TEST_CASE("summarize is permutation-invariant") {
    Rng rng(5);
    std::vector<std::vector<double>> samples(17, std::vector<double>(3));
    for (auto& s : samples)
        for (auto& v : s) v = rng.normal();
    PosteriorConfig cfg;
    cfg.store_full_cov = true;
    const auto a = summarize(samples, cfg);
    auto shuffled = samples;
    rng.shuffle(shuffled);
    const auto b = summarize(shuffled, cfg);
    for (std::size_t k = 0; k < a.mean.size(); ++k) {
        CHECK(a.mean[k] == doctest::Approx(b.mean[k]).epsilon(1e-12));
        CHECK(a.std_dev[k] == doctest::Approx(b.std_dev[k]).epsilon(1e-12));
    }
}

TEST_CASE("covariance of class-vector samples is PSD within 1e-8") {
    Rng rng(7);
    scvae::ScvaeModel<float> model(small_config());
    model.init_params(rng);
    PosteriorConfig cfg;
    cfg.n_mc = 60;
    cfg.seed = 99;
    cfg.store_full_cov = true;
    const auto draws = sample_posterior_y(model, {0.5f, -0.3f, 0.8f}, cfg);
    std::vector<std::vector<double>> samples(draws.size());
    for (std::size_t j = 0; j < draws.size(); ++j)
        samples[j].assign(draws[j].begin(), draws[j].end());
    const auto s = summarize(samples, cfg);
    REQUIRE(s.cov.has_value());
    Eigen::MatrixXd cov(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) cov(i, j) = (*s.cov)[i * 4 + j];
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (int i = 0; i < 4; ++i) CHECK(es.eigenvalues()[i] >= -1e-8);
}

TEST_CASE("classify follows argmax with lowest-index tie-breaking") {
    CHECK(classify({0.1, 0.2, 0.3, 0.4}) == 4);
    CHECK(classify({0.5, 0.5}) == 1);
    CHECK(classify({0.25, 0.25, 0.25, 0.25}) == 1);
    CHECK(classify({0.2, 0.4, 0.4}) == 2);
    CHECK_THROWS_AS(classify({0.5, 0.6}), DataError);
    CHECK_THROWS_AS(classify({}), DataError);
}

TEST_CASE("abs_error_map basics and elementwise oracle") {
    nn::TensorF a({2, 2}, {1.0f, -2.0f, 3.0f, 0.0f});
    nn::TensorF b({2, 2}, {0.5f, -1.0f, 4.0f, 0.0f});
    const auto map = abs_error_map(a, b);
    for (std::size_t k = 0; k < map.size(); ++k)
        CHECK(map[k] == std::abs(a[k] - b[k]));

    const auto zero = abs_error_map(a, a);
    for (auto v : zero.vec()) CHECK(v == 0.0f);

    nn::TensorF zeros({2, 2});
    const auto mag = abs_error_map(zeros, b);
    for (std::size_t k = 0; k < mag.size(); ++k) CHECK(mag[k] == std::abs(b[k]));

    nn::TensorF wrong({2, 3});
    CHECK_THROWS_AS(abs_error_map(a, wrong), DataError);
}

TEST_CASE("default posterior config draws 100 samples") {
    CHECK(PosteriorConfig{}.n_mc == 100);
}

TEST_CASE("zero-parameter decoders: identical field draws, uniform class draws") {
    scvae::ScvaeModel<float> model(small_config());
    PosteriorConfig cfg;
    cfg.n_mc = 10;
    cfg.seed = 1;
    const auto fields = sample_posterior_x(model, {0.1f, 0.2f, 0.3f}, cfg);
    REQUIRE(fields.size() == 10);
    for (const auto& f : fields)
        CHECK(f.vec() == fields[0].vec());

    const auto probs = sample_posterior_y(model, {0.1f, 0.2f, 0.3f}, cfg);
    for (const auto& p : probs)
        for (auto v : p) CHECK(v == doctest::Approx(0.25f).epsilon(1e-6));
}

TEST_CASE("samplers are bit-reproducible per seed and reject NaN parameters") {
    Rng rng(11);
    scvae::ScvaeModel<float> model(small_config());
    model.init_params(rng);
    PosteriorConfig cfg;
    cfg.n_mc = 8;
    cfg.seed = 31;
    const auto a = sample_posterior_x(model, {0.5f, 0.1f, -0.2f}, cfg);
    const auto b = sample_posterior_x(model, {0.5f, 0.1f, -0.2f}, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j].vec() == b[j].vec());

    const auto ya = sample_posterior_y(model, {0.5f, 0.1f, -0.2f}, cfg);
    const auto yb = sample_posterior_y(model, {0.5f, 0.1f, -0.2f}, cfg);
    CHECK(ya == yb);

    model.store.by_name("decx.fc.W").value[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(sample_posterior_x(model, {0.5f, 0.1f, -0.2f}, cfg), DataError);
}

TEST_CASE("posterior-y mean lies on the simplex within 1e-6") {
    Rng rng(13);
    scvae::ScvaeModel<float> model(small_config());
    model.init_params(rng);
    PosteriorConfig cfg;
    cfg.n_mc = 50;
    cfg.seed = 7;
    const auto draws = sample_posterior_y(model, {1.0f, -0.5f, 0.25f}, cfg);
    std::vector<double> mean(4, 0.0);
    for (const auto& d : draws)
        for (int c = 0; c < 4; ++c) mean[c] += d[c];
    double sum = 0.0;
    for (auto& v : mean) {
        v /= static_cast<double>(draws.size());
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
}

TEST_CASE("posterior mean converges: 1e4 draws within 3 standard errors of 1e5 draws") {
    Rng rng(17);
    scvae::ScvaeModel<float> model(small_config());
    model.init_params(rng);
    const std::vector<float> m{0.4f, -0.1f, 0.3f};

    std::vector<std::size_t> probes;
    for (int p = 0; p < 10; ++p) probes.push_back(static_cast<std::size_t>(p) * 25 + 3);

    PosteriorConfig small;
    small.n_mc = 10000;
    small.seed = 101;
    const auto draws_small = sample_posterior_x(model, m, small);
    std::vector<double> mean_s(10, 0.0);
    for (const auto& f : draws_small)
        for (int p = 0; p < 10; ++p) mean_s[p] += f[probes[p]];
    for (auto& v : mean_s) v /= small.n_mc;

    // 1e5 reference draws, pooled in chunks to bound peak memory.
    std::vector<double> sum_b(10, 0.0), sumsq_b(10, 0.0);
    const int chunks = 10, per_chunk = 10000;
    for (int chunk = 0; chunk < chunks; ++chunk) {
        PosteriorConfig big;
        big.n_mc = per_chunk;
        big.seed = 202 + chunk;
        for (const auto& f : sample_posterior_x(model, m, big))
            for (int p = 0; p < 10; ++p) {
                sum_b[p] += f[probes[p]];
                sumsq_b[p] += static_cast<double>(f[probes[p]]) * f[probes[p]];
            }
    }
    const double n_big = static_cast<double>(chunks) * per_chunk;
    for (int p = 0; p < 10; ++p) {
        const double mean_b = sum_b[p] / n_big;
        const double var_b = (sumsq_b[p] - n_big * mean_b * mean_b) / (n_big - 1);
        const double se_small = std::sqrt(std::max(0.0, var_b) / small.n_mc);
        CHECK(std::abs(mean_s[p] - mean_b) <= 3.0 * se_small + 1e-12);
    }
}
