#include "azmi/leaksim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "azmi/rng.hpp"

namespace azmi::sim {
namespace {

// Separable Gaussian smoothing with reflected boundaries.
std::vector<double> smooth(const std::vector<double>& in, int h, int w, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;

    auto reflect = [](int i, int n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
        return i;
    };

    std::vector<double> tmp(in.size()), out(in.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * in[static_cast<std::size_t>(r) * w + reflect(c + k, w)];
            tmp[static_cast<std::size_t>(r) * w + c] = acc;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<std::size_t>(reflect(r + k, h)) * w + c];
            out[static_cast<std::size_t>(r) * w + c] = acc;
        }
    return out;
}

// Standardize to zero mean, unit variance (no-op on a constant field).
void standardize(std::vector<double>& f) {
    const double n = static_cast<double>(f.size());
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / n;
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    var /= n;
    const double sd = std::sqrt(var);
    if (sd <= 0.0) return;
    for (double& v : f) v = (v - mean) / sd;
}

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

std::size_t PermeabilityModel::active_count() const {
    std::size_t n = 0;
    for (auto a : active) n += (a != 0);
    return n;
}

PermeabilityModel generate_heterogeneity(std::uint64_t seed, int grid_h, int grid_w,
                                         double corr_len, double log_mean, double log_std,
                                         double shale_fraction) {
    require(grid_h >= 4 && grid_w >= 4, "generate_heterogeneity: grid must be at least 4x4");
    require(corr_len > 0.0, "generate_heterogeneity: corr_len must be positive");
    require(log_std >= 0.0, "generate_heterogeneity: log_std must be non-negative");
    require(shale_fraction >= 0.0 && shale_fraction < 1.0,
            "generate_heterogeneity: shale_fraction must lie in [0, 1)");

    const std::size_t n = static_cast<std::size_t>(grid_h) * grid_w;
    Rng perm_rng = Rng::substream(seed, "perm");
    Rng shale_rng = Rng::substream(seed, "shale");

    std::vector<double> noise(n);
    for (double& v : noise) v = perm_rng.normal();
    std::vector<double> field = smooth(noise, grid_h, grid_w, corr_len);
    standardize(field);

    PermeabilityModel model;
    model.grid_h = grid_h;
    model.grid_w = grid_w;
    model.permeability.resize(n);
    model.porosity.resize(n);
    model.active.assign(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        model.permeability[i] = std::exp(log_mean + log_std * field[i]);
        model.porosity[i] = 0.05 + 0.30 / (1.0 + std::exp(-field[i]));
    }

    if (shale_fraction > 0.0) {
        std::vector<double> shale_noise(n);
        for (double& v : shale_noise) v = shale_rng.normal();
        std::vector<double> shale_field = smooth(shale_noise, grid_h, grid_w, corr_len);
        standardize(shale_field);

        const std::size_t k = static_cast<std::size_t>(shale_fraction * static_cast<double>(n));
        if (k > 0) {
            std::vector<double> sorted = shale_field;
            std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
            const double threshold = sorted[k - 1];
            std::size_t masked = 0;
            for (std::size_t i = 0; i < n && masked < k; ++i) {
                if (shale_field[i] <= threshold) {
                    model.active[i] = 0;
                    ++masked;
                }
            }
        }
    }
    return model;
}

double stability_dt(const PermeabilityModel& model, double diffusivity_scale,
                    double cell_size) {
    require(diffusivity_scale > 0.0, "stability_dt: diffusivity_scale must be positive");
    require(cell_size > 0.0, "stability_dt: cell_size must be positive");
    double d_max = 0.0;
    const std::size_t n = model.permeability.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!model.active[i]) continue;
        d_max = std::max(d_max, diffusivity_scale * model.permeability[i] / model.porosity[i]);
    }
    if (d_max <= 0.0) return std::numeric_limits<double>::infinity();
    return cell_size * cell_size / (4.0 * d_max);
}

PressureSeries simulate_scenario(const PermeabilityModel& model, const ScenarioSpec& spec,
                                 const SimOptions& opt) {
    const int h = model.grid_h, w = model.grid_w;
    require(h > 0 && w > 0, "simulate_scenario: empty model");
    require(spec.n_steps >= 2, "simulate_scenario: n_steps must be >= 2");
    require(spec.dt > 0.0 && std::isfinite(spec.dt), "simulate_scenario: dt must be positive");
    require(std::isfinite(spec.rate_value), "simulate_scenario: rate_value must be finite");
    require(model.in_bounds(spec.leak_cell), "simulate_scenario: leak cell out of bounds");
    require(model.is_active(spec.leak_cell),
            "simulate_scenario: leak cell (" + std::to_string(spec.leak_cell.row) + "," +
                std::to_string(spec.leak_cell.col) + ") is inactive");
    for (const auto& well : spec.wells)
        require(model.is_active(well), "simulate_scenario: well (" + std::to_string(well.row) +
                                           "," + std::to_string(well.col) +
                                           ") must lie on an active cell");

    const double bound = stability_dt(model, spec.diffusivity_scale, opt.cell_size);
    int substeps = opt.substeps;
    if (substeps == 0)
        substeps = std::max(1, static_cast<int>(std::ceil(spec.dt / (0.9 * bound))));
    require(substeps >= 1, "simulate_scenario: substeps must be >= 1 (or 0 for auto)");
    const double sub_dt = spec.dt / substeps;
    require(sub_dt <= bound * (1.0 + 1e-12),
            "simulate_scenario: dt = " + std::to_string(sub_dt) +
                " exceeds the stability bound " + std::to_string(bound));

    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<double> diffusivity(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (model.active[i])
            diffusivity[i] = spec.diffusivity_scale * model.permeability[i] / model.porosity[i];

    // Face transmissibilities (sub_dt * D_face / cell^2), zero across
    // inactive cells and domain boundaries (no-flux).
    const double scale = sub_dt / (opt.cell_size * opt.cell_size);
    std::vector<double> coef_right(n, 0.0), coef_down(n, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * w + c;
            if (!model.active[i]) continue;
            if (c + 1 < w && model.active[i + 1])
                coef_right[i] = scale * harmonic(diffusivity[i], diffusivity[i + 1]);
            if (r + 1 < h && model.active[i + w])
                coef_down[i] = scale * harmonic(diffusivity[i], diffusivity[i + w]);
        }

    PressureSeries series;
    series.spec = spec;
    series.grid_h = h;
    series.grid_w = w;
    series.p0 = opt.p0;
    series.cell_size = opt.cell_size;
    series.frames.reserve(spec.n_steps);

    std::vector<double> p(n, opt.p0), next(n);
    series.frames.push_back(p);

    const std::size_t leak = model.idx(spec.leak_cell.row, spec.leak_cell.col);
    for (int step = 1; step < spec.n_steps; ++step) {
        for (int sub = 0; sub < substeps; ++sub) {
            next = p;
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    const std::size_t i = static_cast<std::size_t>(r) * w + c;
                    if (c + 1 < w && coef_right[i] != 0.0) {
                        const double f = coef_right[i] * (p[i + 1] - p[i]);
                        next[i] += f;
                        next[i + 1] -= f;
                    }
                    if (r + 1 < h && coef_down[i] != 0.0) {
                        const double f = coef_down[i] * (p[i + w] - p[i]);
                        next[i] += f;
                        next[i + w] -= f;
                    }
                }
            next[leak] += sub_dt * spec.rate_value;
            p.swap(next);
        }
        series.frames.push_back(p);
    }
    return series;
}

}  // namespace azmi::sim
