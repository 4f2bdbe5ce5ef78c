#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "azmi/pipeline.hpp"

namespace azmi::data {

/// Descriptor of one simulated scenario, carried through the dataset
/// manifest so every artifact directory is self-describing.
struct ScenarioInfo {
    int id = 0;
    GridCell leak;
    int rate_class = 1;
    double rate_value = 1.0;
    int n_steps = 0;
    double dt = 1.0;
};

struct DatasetMeta {
    int format_version = 1;
    int grid_h = 0;
    int grid_w = 0;
    int n_classes = 0;
    WellSet wells;                    // on the processed grid
    std::vector<double> class_rates;  // source strength per class, index 0 = class 1
    std::vector<ScenarioInfo> scenarios;
    double threshold = 5.0;
};

struct Dataset {
    DatasetMeta meta;
    DatasetSplit split;
};

/// Persist a dataset directory: manifest.json plus per-split payloads
/// <split>.x.f32, <split>.m.f32, <split>.y.u8, <split>.src.u32 (little
/// endian, row-major per instance). Files are written to a temp name and
/// renamed, so readers never observe partial payloads.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Load a dataset directory; the float payload round-trips bit-exactly.
/// Throws DataError on malformed manifests, unknown format versions, or
/// manifest/payload size mismatches.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace azmi::data
