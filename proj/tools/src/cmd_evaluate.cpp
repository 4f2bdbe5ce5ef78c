#include <iomanip>
#include <iostream>
#include <sstream>

#include "azmi/checkpoint.hpp"
#include "azmi/dataset_io.hpp"
#include "azmi/metrics.hpp"
#include "azmi/posterior.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

namespace azmi::cli {
namespace {

const std::vector<data::Instance>& pick_split(const data::Dataset& ds,
                                              const std::string& name) {
    if (name == "train") return ds.split.train;
    if (name == "val") return ds.split.val;
    if (name == "test") return ds.split.test;
    throw DataError("unknown split '" + name + "' (expected train, val, or test)");
}

std::string roc_csv(const eval::RocCurve& c) {
    std::ostringstream os;
    os << "fpr,tpr_mean,tpr_std\n" << std::setprecision(10);
    for (std::size_t i = 0; i < c.fpr.size(); ++i)
        os << c.fpr[i] << ',' << c.tpr_mean[i] << ',' << c.tpr_std[i] << '\n';
    return os.str();
}

}  // namespace

int cmd_evaluate(const EvaluateArgs& args) {
    const fs::path model_dir = resolve_artifact_path(args.model);
    const fs::path data_dir = resolve_artifact_path(args.data);
    const fs::path out = resolve_artifact_path(args.out);
    require(args.n_mc >= 2, "--n-mc must be >= 2");

    const data::Dataset ds = data::read_dataset(data_dir);
    const auto& instances = pick_split(ds, args.split);
    require(!instances.empty(), "split '" + args.split + "' is empty");

    scvae::ModelConfig cfg = scvae::read_model_config(model_dir);
    require(cfg.grid_h == ds.meta.grid_h && cfg.grid_w == ds.meta.grid_w &&
                cfg.n_classes == ds.meta.n_classes &&
                cfg.n_wells == static_cast<int>(ds.meta.wells.count()),
            "model and dataset disagree on grid/classes/wells");
    scvae::ScvaeModel<float> model(cfg);
    scvae::load_model_params(model_dir, model);

    const std::size_t n = instances.size();
    std::vector<nn::TensorF> pred_means, truths;
    pred_means.reserve(n);
    truths.reserve(n);
    std::vector<int> true_labels(n), pred_labels(n);
    std::vector<std::vector<std::vector<double>>> score_samples(n);

    post::PosteriorConfig pcfg;
    pcfg.n_mc = args.n_mc;
    for (std::size_t i = 0; i < n; ++i) {
        const data::Instance& inst = instances[i];
        pcfg.seed = derive_seed(args.seed, "inst-" + std::to_string(i));

        const auto fields = post::sample_posterior_x(model, inst.m, pcfg);
        nn::TensorF mean({cfg.grid_h, cfg.grid_w});
        for (const auto& f : fields)
            for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += f[k];
        for (auto& v : mean.vec()) v /= static_cast<float>(args.n_mc);
        pred_means.push_back(std::move(mean));
        truths.push_back(inst.x);

        const auto draws = post::sample_posterior_y(model, inst.m, pcfg);
        auto& per_inst = score_samples[i];
        per_inst.resize(draws.size());
        std::vector<double> y_mean(cfg.n_classes, 0.0);
        for (std::size_t j = 0; j < draws.size(); ++j) {
            per_inst[j].assign(draws[j].begin(), draws[j].end());
            for (int c = 0; c < cfg.n_classes; ++c) y_mean[c] += draws[j][c];
        }
        for (auto& v : y_mean) v /= static_cast<double>(draws.size());
        pred_labels[i] = post::classify(y_mean);
        true_labels[i] = static_cast<int>(std::max_element(inst.y.begin(), inst.y.end()) -
                                          inst.y.begin()) +
                         1;
    }

    const eval::RelL2 rel = eval::relative_l2(pred_means, truths);
    const eval::ConfusionMatrix cm = eval::confusion(true_labels, pred_labels, cfg.n_classes);
    const auto grid = eval::default_threshold_grid();
    const auto curves = eval::roc_ovr(score_samples, true_labels, grid, cfg.n_classes);
    const eval::RocCurve macro = eval::macro_average(curves);

    fs::create_directories(out);
    json confusion = json::array();
    for (int t = 0; t < cfg.n_classes; ++t) {
        json row = json::array();
        for (int p = 0; p < cfg.n_classes; ++p) row.push_back(cm.at(t, p));
        confusion.push_back(row);
    }
    json per_class_auc = json::array();
    for (const auto& c : curves)
        per_class_auc.push_back(c.defined ? json(c.auc) : json(nullptr));
    const json report = {{"split", args.split},
                         {"n_instances", n},
                         {"n_mc", args.n_mc},
                         {"seed", args.seed},
                         {"relative_l2", rel.mean},
                         {"relative_l2_used", rel.used},
                         {"relative_l2_excluded", rel.excluded},
                         {"accuracy", cm.accuracy()},
                         {"confusion", confusion},
                         {"per_class_auc", per_class_auc},
                         {"macro_auc", macro.defined ? json(macro.auc) : json(nullptr)}};
    write_text_file(out / "report.json", report.dump(2) + "\n");
    for (int c = 0; c < cfg.n_classes; ++c)
        if (curves[c].defined)
            write_text_file(out / ("roc_class" + std::to_string(c + 1) + ".csv"),
                            roc_csv(curves[c]));
    if (macro.defined) write_text_file(out / "roc_macro.csv", roc_csv(macro));
    write_run_json(out, {{"command", "evaluate"},
                         {"model", model_dir.string()},
                         {"data", data_dir.string()},
                         {"split", args.split},
                         {"n_mc", args.n_mc},
                         {"seed", args.seed},
                         {"out", out.string()}});

    std::cout << "evaluate: split=" << args.split << " rel_l2=" << rel.mean
              << " accuracy=" << cm.accuracy() << " macro_auc="
              << (macro.defined ? std::to_string(macro.auc) : std::string("n/a")) << " -> "
              << (out / "report.json").string() << "\n";
    return kExitOk;
}

}  // namespace azmi::cli
