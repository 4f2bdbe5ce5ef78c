#include <iostream>

#include "cli_common.hpp"
#include "commands.hpp"

namespace azmi::cli {
namespace {

struct Preset {
    json sim_spec;  // scenarios-file content
    std::vector<int> grid;
    std::string downsample;
    double threshold = 5.0;
    std::vector<double> split{0.64, 0.16, 0.20};
    TrainArgs train;  // defaults; data/out/seed filled per run
    int n_mc = 100;
};

/// CI-scale run: 32x32 grid, 2 leak locations x 4 rate classes x 200 daily
/// steps, 3 monitoring wells.
Preset desk_preset() {
    Preset p;
    json scenarios = json::array();
    const std::vector<std::pair<int, int>> leaks = {{12, 12}, {20, 20}};
    for (const auto& [lr, lc] : leaks)
        for (int cls = 1; cls <= 4; ++cls)
            scenarios.push_back(
                {{"leak", {lr, lc}}, {"rate_class", cls}, {"n_steps", 200}});
    p.sim_spec = {{"grid", {32, 32}},
                  {"dt", 1.0},
                  {"cell_size", 1.0},
                  {"p0", 1000.0},
                  {"diffusivity_scale", 0.012},
                  {"corr_len", 4.0},
                  {"log_mean", 0.0},
                  {"log_std", 0.5},
                  {"shale_fraction", 0.0},
                  {"n_classes", 4},
                  {"class_rates", {4.0, 8.0, 12.0, 16.0}},
                  {"wells", {{13, 13}, {19, 19}, {16, 16}}},
                  {"scenarios", scenarios}};
    p.grid = {32, 32};
    p.downsample = "off";
    p.train.latent = 2;
    p.train.batch = 128;
    p.train.patience = 50;
    p.train.max_epochs = 150;
    p.train.lr = 1e-3;
    return p;
}

/// Full paper geometry: 478x486 raw grid downsampled to 160x160, the five
/// monitoring wells and four leaky-well locations (raw coordinates are 3x
/// the 160x160 indices), 4 rate classes x 1001 daily frames. Heavy: ~15 GB
/// of raw series and hours of training.
Preset paper_shape_preset() {
    Preset p;
    json scenarios = json::array();
    const std::vector<std::pair<int, int>> leaks = {
        {309, 210}, {288, 270}, {375, 306}, {327, 246}};
    for (const auto& [lr, lc] : leaks)
        for (int cls = 1; cls <= 4; ++cls)
            scenarios.push_back(
                {{"leak", {lr, lc}}, {"rate_class", cls}, {"n_steps", 1001}});
    p.sim_spec = {{"grid", {478, 486}},
                  {"dt", 1.0},
                  {"cell_size", 1.0},
                  {"p0", 1000.0},
                  {"diffusivity_scale", 0.12},
                  {"corr_len", 6.0},
                  {"log_mean", 0.0},
                  {"log_std", 0.8},
                  {"shale_fraction", 0.15},
                  {"substeps", 0},
                  {"well_snap_stride", 3},
                  {"n_classes", 4},
                  {"class_rates", {40.0, 80.0, 120.0, 160.0}},
                  {"wells", {{351, 174}, {291, 291}, {321, 261}, {261, 150}, {174, 249}}},
                  {"scenarios", scenarios}};
    p.grid = {478, 486};
    p.downsample = "on";
    p.train.latent = 2;
    p.train.batch = 128;
    p.train.patience = 200;
    p.train.max_epochs = 4000;
    p.train.lr = 1e-3;
    return p;
}

}  // namespace

int cmd_pipeline(const PipelineArgs& args) {
    Preset preset;
    if (args.preset == "desk")
        preset = desk_preset();
    else if (args.preset == "paper-shape")
        preset = paper_shape_preset();
    else
        throw DataError("unknown preset '" + args.preset + "' (expected desk or paper-shape)");

    if (args.max_epochs >= 0) preset.train.max_epochs = args.max_epochs;
    if (args.patience >= 0) preset.train.patience = args.patience;
    if (args.batch >= 0) preset.train.batch = args.batch;
    if (args.latent >= 0) preset.train.latent = args.latent;
    if (args.alpha >= 0.0) preset.train.alpha = args.alpha;
    if (args.beta >= 0.0) preset.train.beta = args.beta;
    if (args.lr >= 0.0) preset.train.lr = args.lr;
    if (args.n_mc >= 0) preset.n_mc = args.n_mc;
    if (args.threshold >= 0.0) preset.threshold = args.threshold;

    const fs::path out = resolve_artifact_path(args.out);
    fs::create_directories(out);
    const std::uint64_t mc_seed =
        args.mc_seed ? *args.mc_seed : derive_seed(args.seed, "mc");

    // All stage seeds are named substreams of the master seed.
    write_text_file(out / "scenarios.json", preset.sim_spec.dump(2) + "\n");

    SimulateArgs sim;
    sim.grid = preset.grid;
    sim.seed = derive_seed(args.seed, "sim");
    sim.scenarios_file = (out / "scenarios.json").string();
    sim.out = (out / "series").string();
    sim.jobs = args.jobs;
    int rc = cmd_simulate(sim);
    if (rc != kExitOk) return rc;

    PreprocessArgs pre;
    pre.in = sim.out;
    pre.out = (out / "dataset").string();
    pre.threshold = preset.threshold;
    pre.split = preset.split;
    pre.seed = derive_seed(args.seed, "split");
    pre.downsample = preset.downsample;
    rc = cmd_preprocess(pre);
    if (rc != kExitOk) return rc;

    TrainArgs train = preset.train;
    train.data = pre.out;
    train.out = (out / "model").string();
    train.seed = derive_seed(args.seed, "train");
    rc = cmd_train(train);
    if (rc != kExitOk) return rc;

    EvaluateArgs ev;
    ev.model = train.out;
    ev.data = pre.out;
    ev.split = "test";
    ev.n_mc = preset.n_mc;
    ev.seed = mc_seed;
    ev.out = (out / "eval").string();
    rc = cmd_evaluate(ev);
    if (rc != kExitOk) return rc;

    write_run_json(out, {{"command", "pipeline"},
                         {"preset", args.preset},
                         {"seed", args.seed},
                         {"mc_seed", mc_seed},
                         {"out", out.string()},
                         {"stages",
                          {{"series", sim.out},
                           {"dataset", pre.out},
                           {"model", train.out},
                           {"eval", ev.out}}},
                         {"threshold", preset.threshold},
                         {"split", preset.split},
                         {"n_mc", preset.n_mc},
                         {"train",
                          {{"latent", train.latent},
                           {"alpha", train.alpha},
                           {"beta", train.beta},
                           {"batch", train.batch},
                           {"patience", train.patience},
                           {"max_epochs", train.max_epochs},
                           {"lr", train.lr}}}});
    std::cout << "pipeline: complete run directory at " << out.string() << "\n";
    return kExitOk;
}

}  // namespace azmi::cli
