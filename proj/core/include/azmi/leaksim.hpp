#pragma once

#include <cstdint>
#include <vector>

#include "azmi/common.hpp"

namespace azmi::sim {

/// Heterogeneous single-layer model: per-cell permeability/porosity plus an
/// active mask. Inactive (shale) cells carry no flow and never change
/// pressure.
struct PermeabilityModel {
    int grid_h = 0;
    int grid_w = 0;
    std::vector<double> permeability;  // mD, > 0 on active cells
    std::vector<double> porosity;      // in (0,1) on active cells
    std::vector<std::uint8_t> active;  // 0 = nullified shale cell

    std::size_t idx(int r, int c) const {
        return static_cast<std::size_t>(r) * grid_w + c;
    }
    bool in_bounds(const GridCell& s) const {
        return s.row >= 0 && s.row < grid_h && s.col >= 0 && s.col < grid_w;
    }
    bool is_active(const GridCell& s) const {
        return in_bounds(s) && active[idx(s.row, s.col)] != 0;
    }
    std::size_t active_count() const;
};

/// One leak scenario: source location/strength, run length, well layout.
struct ScenarioSpec {
    GridCell leak_cell;
    int rate_class = 1;          // j in {1..r}
    double rate_value = 1.0;     // volumetric source strength per day
    int n_steps = 2;             // stored frames, including the initial state
    double dt = 1.0;             // days per frame
    double diffusivity_scale = 1.0;
    std::vector<GridCell> wells;
    std::uint64_t seed = 0;
};

/// Time-ordered pressure fields for one scenario. frames[k] is the state
/// after k explicit steps; frames[0] is the initial constant field p0.
/// Inactive cells hold p0 (the sentinel) for the entire series.
struct PressureSeries {
    ScenarioSpec spec;
    int grid_h = 0;
    int grid_w = 0;
    double p0 = 0.0;
    double cell_size = 1.0;
    std::vector<std::vector<double>> frames;
};

/// Smoothed log-normal permeability field with contiguous shale blobs.
/// Deterministic for a given seed. log_std = 0 yields uniform
/// exp(log_mean) on active cells; roughly shale_fraction of cells is
/// masked inactive.
PermeabilityModel generate_heterogeneity(std::uint64_t seed, int grid_h, int grid_w,
                                         double corr_len, double log_mean, double log_std,
                                         double shale_fraction);

/// Largest stable dt for the explicit five-point scheme:
/// dt <= cell_size^2 / (4 * D_max), D = diffusivity_scale * k / phi.
/// Returns +inf when the model has no diffusive cell.
double stability_dt(const PermeabilityModel& model, double diffusivity_scale,
                    double cell_size);

struct SimOptions {
    double cell_size = 1.0;
    double p0 = 1000.0;  // baseline AZMI pressure, psi
    int substeps = 1;    // internal sub-steps per stored frame; 0 = auto
};

/// Explicit finite-difference solution of dp/dt = div(D grad p) + q at the
/// leak cell, no-flux outer boundaries and no-flux at inactive cells,
/// harmonic face diffusivities. One frame is stored per spec.dt, integrated
/// with opt.substeps internal sub-steps (auto-selected from the stability
/// bound when 0). Rejects unstable effective steps and leaks placed on
/// inactive cells.
PressureSeries simulate_scenario(const PermeabilityModel& model, const ScenarioSpec& spec,
                                 const SimOptions& opt = {});

}  // namespace azmi::sim
