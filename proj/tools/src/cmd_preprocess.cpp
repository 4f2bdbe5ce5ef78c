#include <iostream>

#include "azmi/dataset_io.hpp"
#include "azmi/pipeline.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

namespace azmi::cli {
namespace {

/// The every-third rule keeps raw cells whose indices are multiples of 3,
/// so raw well coordinates map onto the processed grid by division.
GridCell map_well_to_processed(const GridCell& raw) {
    require(raw.row % 3 == 0 && raw.col % 3 == 0,
            "well (" + std::to_string(raw.row) + "," + std::to_string(raw.col) +
                ") does not sit on the every-third downsample lattice");
    return {raw.row / 3, raw.col / 3};
}

}  // namespace

int cmd_preprocess(const PreprocessArgs& args) {
    const fs::path in = resolve_artifact_path(args.in);
    const fs::path out = resolve_artifact_path(args.out);
    require(args.split.size() == 3, "--split expects three fractions");
    const SeriesManifest man = read_series_manifest(in);

    bool do_downsample;
    if (args.downsample == "on") {
        do_downsample = true;
    } else if (args.downsample == "off") {
        do_downsample = false;
    } else if (args.downsample == "auto") {
        // Grids already compatible with the two stride-2 stages pass through.
        do_downsample = (man.grid_h % 4 != 0 || man.grid_w % 4 != 0);
    } else {
        throw DataError("--downsample must be auto, on, or off");
    }

    // Processed-grid well coordinates: explicit file wins, otherwise the
    // series wells (mapped through the downsample rule when active).
    data::WellSet wells;
    if (!args.wells_file.empty()) {
        wells.coords = read_wells_file(resolve_artifact_path(args.wells_file));
    } else {
        require(!man.wells.empty(), "series manifest lists no wells; pass --wells FILE");
        for (const auto& w : man.wells)
            wells.coords.push_back(do_downsample ? map_well_to_processed(w) : w);
    }

    int grid_h = 0, grid_w = 0;
    std::vector<data::Instance> instances;
    for (const auto& sc : man.scenarios) {
        const auto frames = read_series_frames(in, sc, man.grid_h, man.grid_w);
        require(frames.size() >= 2, sc.file + ": need at least 2 frames");

        // Downsample each frame first, then difference successive frames.
        std::vector<nn::TensorF> proc;
        proc.reserve(frames.size());
        for (const auto& frame : frames) {
            nn::TensorF raw({man.grid_h, man.grid_w});
            std::copy(frame.begin(), frame.end(), raw.data());
            proc.push_back(do_downsample ? data::downsample(raw) : std::move(raw));
        }
        if (grid_h == 0) {
            grid_h = proc[0].dim(0);
            grid_w = proc[0].dim(1);
            wells.validate(grid_h, grid_w);
        }

        const std::vector<float> y = data::one_hot(sc.rate_class, man.n_classes);
        for (std::size_t t = 0; t + 1 < proc.size(); ++t) {
            data::Instance inst;
            inst.x = nn::TensorF({grid_h, grid_w});
            for (std::size_t k = 0; k < inst.x.size(); ++k)
                inst.x[k] = proc[t + 1][k] - proc[t][k];
            inst.y = y;
            inst.m = data::sample_wells(inst.x, wells);
            inst.scenario_id = sc.id;
            inst.step = static_cast<std::int32_t>(t);
            instances.push_back(std::move(inst));
        }
    }

    const std::size_t before = instances.size();
    instances = data::filter_extremes(std::move(instances), args.threshold);
    const std::size_t kept = instances.size();

    data::Dataset ds;
    ds.meta.grid_h = grid_h;
    ds.meta.grid_w = grid_w;
    ds.meta.n_classes = man.n_classes;
    ds.meta.wells = wells;
    ds.meta.class_rates = man.class_rates;
    ds.meta.threshold = args.threshold;
    for (const auto& sc : man.scenarios)
        ds.meta.scenarios.push_back(
            {sc.id, sc.leak, sc.rate_class, sc.rate_value, sc.n_steps, man.dt});
    ds.split = data::split(std::move(instances),
                           {args.split[0], args.split[1], args.split[2]}, args.seed);
    data::write_dataset(ds, out);

    write_run_json(out, {{"command", "preprocess"},
                         {"in", in.string()},
                         {"out", out.string()},
                         {"threshold", args.threshold},
                         {"downsample", do_downsample},
                         {"split", args.split},
                         {"seed", args.seed},
                         {"instances_before_filter", before},
                         {"instances_kept", kept},
                         {"sizes",
                          {{"train", ds.split.train.size()},
                           {"val", ds.split.val.size()},
                           {"test", ds.split.test.size()}}}});
    std::cout << "preprocess: " << before << " instances -> " << kept << " after |x| <= "
              << args.threshold << " filter; split " << ds.split.train.size() << "/"
              << ds.split.val.size() << "/" << ds.split.test.size() << " into " << out.string()
              << "\n";
    return kExitOk;
}

}  // namespace azmi::cli
