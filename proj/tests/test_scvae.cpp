/// SCVAE tests: closed-form KL against a sampling oracle, the
/// reparameterization identity, architecture shape chain, ELBO term
/// assembly against per-instance oracles, full-model gradient checks on a
/// toy configuration, and the training loop's early-stopping contract.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "azmi/grad_check.hpp"
#include "azmi/scvae.hpp"

using namespace azmi;
using namespace azmi::scvae;

namespace {

ModelConfig toy_config(int grid = 8, int latent = 2, int wells = 2, int classes = 2) {
    ModelConfig cfg;
    cfg.grid_h = grid;
    cfg.grid_w = grid;
    cfg.n_classes = classes;
    cfg.n_wells = wells;
    cfg.latent_dim = latent;
    cfg.conv1_filters = 4;
    cfg.conv2_filters = 8;
    cfg.enc_dense = 8;
    cfg.cls_h1 = 8;
    cfg.cls_h2 = 8;
    cfg.cls_h3 = 4;
    return cfg;
}

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double scale = 1.0) {
    for (auto& v : t.vec()) v = static_cast<T>(scale * rng.normal());
}

/// Simplex rows that avoid exact zeros so ReLU/log paths stay smooth.
template <typename T>
void fill_soft_labels(Tensor<T>& y, Rng& rng) {
    const int r = y.shape().back();
    const std::size_t rows = y.size() / r;
    for (std::size_t i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < r; ++j) {
            const double e = std::exp(rng.normal());
            y[i * r + j] = static_cast<T>(e);
            sum += e;
        }
        for (int j = 0; j < r; ++j) y[i * r + j] = static_cast<T>(y[i * r + j] / sum);
    }
}

data::DatasetSplit tiny_split(const ModelConfig& cfg, int n_train, int n_val, Rng& rng) {
    data::DatasetSplit split;
    auto make = [&](int step) {
        data::Instance inst;
        inst.x = nn::TensorF({cfg.grid_h, cfg.grid_w});
        for (auto& v : inst.x.vec()) v = static_cast<float>(0.5 * rng.normal());
        inst.y = data::one_hot(1 + static_cast<int>(rng.uniform_index(cfg.n_classes)),
                               cfg.n_classes);
        inst.m.resize(cfg.n_wells);
        for (auto& v : inst.m) v = static_cast<float>(rng.normal());
        inst.step = step;
        return inst;
    };
    for (int i = 0; i < n_train; ++i) split.train.push_back(make(i));
    for (int i = 0; i < n_val; ++i) split.val.push_back(make(1000 + i));
    return split;
}

}  // namespace

TEST_CASE("mis-sized wiring is rejected at construction time") {
    ModelConfig bad = toy_config();
    bad.grid_h = 10;  // two stride-2 stages need multiples of 4
    CHECK_THROWS_AS(ScvaeModel<float>{bad}, DataError);
    ModelConfig bad2 = toy_config();
    bad2.latent_dim = 0;
    CHECK_THROWS_AS(ScvaeModel<float>{bad2}, DataError);
}

TEST_CASE("kl_closed_form hand values") {
    CHECK(kl_closed_form(LatentPosterior<double>{{0, 0}, {0, 0}}) == 0.0);
    CHECK(kl_closed_form(LatentPosterior<double>{{1, 1}, {0, 0}}) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kl_closed_form is non-negative, zero only at the prior") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        LatentPosterior<double> post;
        for (int j = 0; j < 3; ++j) {
            post.mu.push_back(rng.uniform(-2, 2));
            post.log_var.push_back(rng.uniform(-2, 2));
        }
        const double kl = kl_closed_form(post);
        CHECK(kl >= 0.0);
    }
}

TEST_CASE("kl_closed_form agrees with a 1e6-sample MC estimate within 1%") {
    Rng rng(11);
    for (int config = 0; config < 3; ++config) {
        LatentPosterior<double> post;
        for (int j = 0; j < 2; ++j) {
            post.mu.push_back(rng.uniform(0.5, 2.0) * (rng.uniform() < 0.5 ? -1 : 1));
            post.log_var.push_back(rng.uniform(-2.0, 2.0));
        }
        const double exact = kl_closed_form(post);
        // E_q[ln q - ln p] via draws x = mu + sigma * eps:
        // ln q - ln p = (x^2 - eps^2 - log_var) / 2 summed over dims.
        double acc = 0.0;
        const int n = 1000000;
        for (int s = 0; s < n; ++s) {
            double term = 0.0;
            for (std::size_t j = 0; j < post.mu.size(); ++j) {
                const double eps = rng.normal();
                const double x = post.mu[j] + std::exp(post.log_var[j] / 2) * eps;
                term += x * x - eps * eps - post.log_var[j];
            }
            acc += term / 2.0;
        }
        const double mc = acc / n;
        CHECK(std::abs(mc - exact) <= 0.01 * std::abs(exact));
    }
}

TEST_CASE("reparameterize: eps = 0 recovers mu; hand case") {
    LatentPosterior<double> post{{0.7, -1.1}, {0.3, -0.2}};
    CHECK(reparameterize(post, {0.0, 0.0}) == std::vector<double>{0.7, -1.1});

    LatentPosterior<double> p2{{0.0, 0.0}, {2 * std::log(2.0), 2 * std::log(2.0)}};
    const auto z = reparameterize(p2, {1.0, -1.0});
    CHECK(z[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(z[1] == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("reparameterize: 1e5 draws have sample mean within 3 standard errors of mu") {
    Rng rng(13);
    LatentPosterior<double> post{{0.4}, {0.8}};
    const double sigma = std::exp(0.4);
    const int n = 100000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += reparameterize(post, {rng.normal()})[0];
    const double mean = acc / n;
    const double se = sigma / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean - post.mu[0]) <= 3.0 * se);
}

TEST_CASE("encoder/decoder shape chain at the full 160x160 configuration") {
    ModelConfig cfg;  // defaults: 160x160, r=4, M=5, J=2, 32/64 filters
    ScvaeModel<float> model(cfg);
    nn::TensorF x({160, 160}, 0.1f);
    const auto post = model.encode(x, {0, 0, 1, 0});
    CHECK(post.mu.size() == 2);
    CHECK(post.log_var.size() == 2);

    const auto xh = model.decode_x({0.3f, -0.2f}, {0.1f, 0.2f, 0.3f, 0.4f, 0.5f});
    CHECK(xh.shape() == nn::Shape{160, 160});

    const auto yh = model.decode_y({0.3f, -0.2f}, {0.1f, 0.2f, 0.3f, 0.4f, 0.5f});
    CHECK(yh.size() == 4);
}

TEST_CASE("zero parameters: standard-normal posterior, zero field, uniform classes") {
    ScvaeModel<float> model(toy_config(8, 2, 2, 4));
    nn::TensorF x({8, 8}, 0.7f);
    const auto post = model.encode(x, {1, 0, 0, 0});
    for (auto v : post.mu) CHECK(v == 0.0f);
    for (auto v : post.log_var) CHECK(v == 0.0f);

    const auto xh = model.decode_x({0.5f, 0.5f}, {1.0f, -1.0f});
    for (auto v : xh.vec()) CHECK(v == 0.0f);

    const auto yh = model.decode_y({0.5f, 0.5f}, {1.0f, -1.0f});
    for (auto v : yh) CHECK(v == doctest::Approx(0.25f).epsilon(1e-6));
}

TEST_CASE("finite random inputs produce finite encoder outputs") {
    Rng rng(17);
    ScvaeModel<float> model(toy_config());
    model.init_params(rng);
    nn::TensorF x({8, 8});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    const auto post = model.encode(x, {0.5f, 0.5f});
    for (auto v : post.mu) CHECK(std::isfinite(v));
    for (auto v : post.log_var) CHECK(std::isfinite(v));
}

TEST_CASE("perfect-fit stub: recon, class, and kl terms are all zero") {
    nn::TensorF x({4, 4}, 1.25f);
    CHECK(reconstruction_term(x, x) == 0.0);
    const std::vector<float> y = data::one_hot(2, 4);
    CHECK(cross_entropy_term(y, y) == 0.0);
    CHECK(kl_closed_form(LatentPosterior<float>{{0, 0}, {0, 0}}) == 0.0f);
}

TEST_CASE("elbo total equals recon + alpha*class + beta*kl, and matches per-instance oracles") {
    Rng rng(19);
    const ModelConfig cfg = toy_config();
    ScvaeModel<double> model(cfg);
    model.init_params(rng);

    HyperParams hyper;
    hyper.latent_dim = cfg.latent_dim;
    hyper.alpha = 0.7;
    hyper.beta = 1.3;
    hyper.mc_samples = 2;

    const int n = 5;
    Tensor<double> x({n, 8, 8}), y({n, 2}), m({n, 2});
    fill_normal(x, rng, 0.5);
    fill_soft_labels(y, rng);
    fill_normal(m, rng);
    std::vector<Tensor<double>> eps(hyper.mc_samples, Tensor<double>({n, cfg.latent_dim}));
    for (auto& e : eps) fill_normal(e, rng);

    const LossBreakdown batch = elbo_loss(model, x, y, m, hyper, eps, /*grads=*/false);
    CHECK(batch.total ==
          doctest::Approx(batch.recon + hyper.alpha * batch.class_term + hyper.beta * batch.kl)
              .epsilon(1e-12));

    // Instance-by-instance oracle through the single-instance surfaces.
    double recon = 0, cls = 0, kl = 0;
    for (int i = 0; i < n; ++i) {
        Tensor<double> xi({8, 8});
        std::copy(x.data() + i * 64, x.data() + (i + 1) * 64, xi.data());
        std::vector<double> yi(y.data() + i * 2, y.data() + (i + 1) * 2);
        std::vector<double> mi(m.data() + i * 2, m.data() + (i + 1) * 2);
        ScvaeModel<double> probe(cfg);
        probe.store.restore(model.store.snapshot());
        const auto post = probe.encode(xi, yi);
        kl += kl_closed_form(post);
        for (int l = 0; l < hyper.mc_samples; ++l) {
            std::vector<double> eps_i(eps[l].data() + i * cfg.latent_dim,
                                      eps[l].data() + (i + 1) * cfg.latent_dim);
            const auto z = reparameterize(post, eps_i);
            recon += reconstruction_term(xi, probe.decode_x(z, mi)) / hyper.mc_samples;
            cls += cross_entropy_term(yi, probe.decode_y(z, mi)) / hyper.mc_samples;
        }
    }
    CHECK(batch.recon == doctest::Approx(recon / n).epsilon(1e-6));
    CHECK(batch.class_term == doctest::Approx(cls / n).epsilon(1e-6));
    CHECK(batch.kl == doctest::Approx(kl / n).epsilon(1e-6));
}

TEST_CASE("elbo gradients pass the finite-difference check on the 8x8 toy config") {
    Rng rng(23);
    const ModelConfig cfg = toy_config();
    ScvaeModel<double> model(cfg);
    model.init_params(rng);

    HyperParams hyper;
    hyper.latent_dim = cfg.latent_dim;
    hyper.alpha = 0.8;
    hyper.beta = 1.1;
    hyper.mc_samples = 1;

    const int n = 3;
    Tensor<double> x({n, 8, 8}), y({n, 2}), m({n, 2});
    std::vector<Tensor<double>> eps(1, Tensor<double>({n, cfg.latent_dim}));
    // Keep the check away from ReLU kinks: redraw until every
    // pre-activation clears the finite-difference step.
    double margin = 0.0;
    for (int attempt = 0; attempt < 50 && margin <= 1e-4; ++attempt) {
        fill_normal(x, rng, 0.5);
        fill_soft_labels(y, rng);
        fill_normal(m, rng);
        fill_normal(eps[0], rng);
        elbo_loss(model, x, y, m, hyper, eps, /*grads=*/false);
        margin = model.kink_margin();
    }
    REQUIRE(margin > 1e-4);

    model.store.zero_grads();
    elbo_loss(model, x, y, m, hyper, eps, /*grads=*/true);
    const auto report = nn::grad_check(
        [&](nn::ParamStore<double>&) {
            return elbo_loss(model, x, y, m, hyper, eps, /*grads=*/false).total;
        },
        model.store, 1e-3);
    for (const auto& entry : report.entries) {
        CAPTURE(entry.name);
        CHECK(entry.max_rel_err < 1e-3);
    }
    CHECK(report.pass);
}

TEST_CASE("alpha = 0 sends zero gradient into the classification decoder") {
    Rng rng(29);
    const ModelConfig cfg = toy_config();
    ScvaeModel<double> model(cfg);
    model.init_params(rng);

    HyperParams hyper;
    hyper.latent_dim = cfg.latent_dim;
    hyper.alpha = 0.0;
    hyper.mc_samples = 1;

    const int n = 4;
    Tensor<double> x({n, 8, 8}), y({n, 2}), m({n, 2});
    fill_normal(x, rng, 0.5);
    fill_soft_labels(y, rng);
    fill_normal(m, rng);
    std::vector<Tensor<double>> eps(1, Tensor<double>({n, cfg.latent_dim}));
    fill_normal(eps[0], rng);

    model.store.zero_grads();
    elbo_loss(model, x, y, m, hyper, eps, /*grads=*/true);
    for (const auto& p : model.store) {
        if (p.name.rfind("decy.", 0) != 0) continue;
        for (auto g : p.grad.vec()) CHECK(g == 0.0);
    }
}

TEST_CASE("elbo rejects a wrong number of eps draws") {
    const ModelConfig cfg = toy_config();
    ScvaeModel<double> model(cfg);
    HyperParams hyper;
    hyper.latent_dim = cfg.latent_dim;
    hyper.mc_samples = 2;
    Tensor<double> x({1, 8, 8}), y({1, 2}, {1, 0}), m({1, 2});
    std::vector<Tensor<double>> eps(1, Tensor<double>({1, 2}));
    CHECK_THROWS_AS(elbo_loss(model, x, y, m, hyper, eps, false), DataError);
}

TEST_CASE("training with lr = 0 and patience 1 stops after 2 epochs") {
    Rng rng(31);
    const ModelConfig cfg = toy_config();
    ScvaeModel<float> model(cfg);
    Rng init = Rng::substream(5, "init");
    model.init_params(init);

    HyperParams hyper;
    hyper.latent_dim = cfg.latent_dim;
    hyper.batch_size = 4;
    hyper.patience = 1;
    hyper.max_epochs = 10;
    hyper.lr = 0.0;
    hyper.seed = 5;

    const auto split = tiny_split(cfg, 8, 4, rng);
    const auto result = train_scvae(model, split, hyper);
    CHECK(result.history.size() == 2);
    CHECK(result.best_epoch == 0);
}

TEST_CASE("training is reproducible and restores the best-validation parameters") {
    const ModelConfig cfg = toy_config();
    HyperParams hyper;
    hyper.latent_dim = cfg.latent_dim;
    hyper.batch_size = 8;
    hyper.patience = 50;
    hyper.max_epochs = 12;
    hyper.lr = 2e-3;
    hyper.seed = 42;

    auto run = [&] {
        Rng data_rng(33);
        const auto split = tiny_split(cfg, 24, 8, data_rng);
        ScvaeModel<float> model(cfg);
        Rng init = Rng::substream(hyper.seed, "init");
        model.init_params(init);
        auto result = train_scvae(model, split, hyper);
        return std::make_pair(std::move(result), model.store.snapshot());
    };
    const auto [ra, pa] = run();
    const auto [rb, pb] = run();

    REQUIRE(ra.history.size() == rb.history.size());
    for (std::size_t e = 0; e < ra.history.size(); ++e) {
        CHECK(ra.history[e].train.total == rb.history[e].train.total);
        CHECK(ra.history[e].val.total == rb.history[e].val.total);
    }
    for (std::size_t p = 0; p < pa.size(); ++p) CHECK(pa[p] == pb[p]);

    // Early stopping restores best, not last.
    double min_val = std::numeric_limits<double>::infinity();
    int argmin = -1;
    for (std::size_t e = 0; e < ra.history.size(); ++e)
        if (ra.history[e].val.total < min_val) {
            min_val = ra.history[e].val.total;
            argmin = static_cast<int>(e);
        }
    CHECK(ra.best_epoch == argmin);
    CHECK(ra.best_val == min_val);
}

TEST_CASE("batch_size larger than the training set is rejected") {
    Rng rng(37);
    const ModelConfig cfg = toy_config();
    ScvaeModel<float> model(cfg);
    HyperParams hyper;
    hyper.latent_dim = cfg.latent_dim;
    hyper.batch_size = 100;
    const auto split = tiny_split(cfg, 8, 4, rng);
    CHECK_THROWS_AS(train_scvae(model, split, hyper), DataError);
}

TEST_CASE("divergent training aborts with the best checkpoint preserved") {
    Rng rng(41);
    const ModelConfig cfg = toy_config();
    ScvaeModel<float> model(cfg);
    Rng init = Rng::substream(43, "init");
    model.init_params(init);

    HyperParams hyper;
    hyper.latent_dim = cfg.latent_dim;
    hyper.batch_size = 8;
    hyper.patience = 10;
    hyper.max_epochs = 50;
    hyper.lr = 1e25;  // forces non-finite loss within a few steps
    hyper.seed = 43;

    const auto split = tiny_split(cfg, 16, 4, rng);
    const auto result = train_scvae(model, split, hyper);
    CHECK(result.diverged);
    CHECK(!result.divergence_msg.empty());
    CHECK(model.store.values_finite());
}
