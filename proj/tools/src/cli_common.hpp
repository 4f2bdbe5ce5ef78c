#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "azmi/common.hpp"
#include "azmi/leaksim.hpp"

namespace azmi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// Exit codes: 0 success, 2 usage, 3 data/format, 4 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Environment override for the artifact root: relative output paths are
/// resolved under $AZMI_ROOT when it is set.
fs::path resolve_artifact_path(const std::string& path);

/// Deterministic named substream seed off a master seed.
std::uint64_t derive_seed(std::uint64_t master, const std::string& name);

/// Every run directory carries the resolved configuration.
void write_run_json(const fs::path& dir, const json& config);

void write_text_file(const fs::path& path, const std::string& text);

std::vector<float> read_floats_text(const fs::path& path);

/// Wells file: one "row col" pair per line, '#' starts a comment.
std::vector<GridCell> read_wells_file(const fs::path& path);

void write_f32_file(const fs::path& path, const std::vector<float>& data);
std::vector<float> read_f32_file(const fs::path& path, std::size_t expected);

/// 8-bit binary PGM, min-max normalized; the scale is kept in a comment.
void write_pgm(const fs::path& path, const std::vector<float>& field, int h, int w);

// ---------------------------------------------------------------------------
// Raw pressure-series directory format (simulate output / preprocess input)
// ---------------------------------------------------------------------------

struct SeriesScenario {
    int id = 0;
    std::string file;
    GridCell leak;
    int rate_class = 1;
    double rate_value = 1.0;
    int n_steps = 0;
};

struct SeriesManifest {
    int format_version = 1;
    int grid_h = 0;
    int grid_w = 0;
    double dt = 1.0;
    double cell_size = 1.0;
    double p0 = 0.0;
    double diffusivity_scale = 1.0;
    std::uint64_t seed = 0;
    int n_classes = 0;
    std::vector<double> class_rates;
    std::vector<GridCell> wells;  // raw-grid coordinates
    json hetero;                  // generator parameters, provenance only
    std::vector<SeriesScenario> scenarios;
};

void write_series_manifest(const fs::path& dir, const SeriesManifest& man);
SeriesManifest read_series_manifest(const fs::path& dir);

/// One scenario payload: n_steps frames of grid_h*grid_w little-endian f32.
void write_series_frames(const fs::path& dir, const SeriesScenario& sc,
                         const sim::PressureSeries& series);
std::vector<std::vector<float>> read_series_frames(const fs::path& dir,
                                                   const SeriesScenario& sc, int grid_h,
                                                   int grid_w);

void write_active_mask(const fs::path& dir, const std::vector<std::uint8_t>& active);
std::vector<std::uint8_t> read_active_mask(const fs::path& dir, std::size_t cells);

}  // namespace azmi::cli
