#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "azmi/common.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

namespace {

using namespace azmi;
using namespace azmi::cli;

int dispatch(CLI::App& app, int argc, char** argv, const std::function<int()>& chosen) {
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    try {
        return chosen();
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "azmi: synthetic AZMI leak scenarios, preprocessing, multi-task SCVAE training,\n"
        "posterior-predictive reconstruction/classification, and evaluation.\n"
        "Relative output paths resolve under $AZMI_ROOT when it is set."};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key = value file mirroring the flags; "
                                   "command-line flags override file values");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.get_formatter()->column_width(30);

    int rc_target = 0;
    std::function<int()> action;

    // --- simulate ---------------------------------------------------------
    SimulateArgs sim;
    auto* c_sim = app.add_subcommand(
        "simulate", "Generate synthetic AZMI pressure time series per leak scenario");
    c_sim->add_option("--grid", sim.grid, "Grid dims H W")->expected(2);
    c_sim->add_option("--seed", sim.seed, "Master seed for heterogeneity");
    c_sim->add_option("--scenarios", sim.scenarios_file,
                      "JSON scenario list (leak cells, classes, steps)")
        ->required();
    c_sim->add_option("--out", sim.out, "Output series directory")->required();
    c_sim->add_option("--jobs", sim.jobs, "Concurrent scenario simulations (0 = all cores)");
    c_sim->callback([&] { action = [&sim] { return cmd_simulate(sim); }; });

    // --- preprocess -------------------------------------------------------
    PreprocessArgs pre;
    auto* c_pre = app.add_subcommand(
        "preprocess", "Series -> filtered incremental-field dataset with train/val/test split");
    c_pre->add_option("--in", pre.in, "Series directory (simulate output)")->required();
    c_pre->add_option("--out", pre.out, "Dataset directory")->required();
    c_pre->add_option("--threshold", pre.threshold, "Drop instances with max |x| above (psi)")
        ->capture_default_str();
    c_pre->add_option("--wells", pre.wells_file,
                      "Wells file ('row col' per line, processed-grid coordinates)");
    c_pre->add_option("--split", pre.split, "Train/val/test fractions")
        ->expected(3)
        ->capture_default_str();
    c_pre->add_option("--seed", pre.seed, "Split shuffle seed");
    c_pre->add_option("--downsample", pre.downsample, "auto | on | off")
        ->capture_default_str();
    c_pre->callback([&] { action = [&pre] { return cmd_preprocess(pre); }; });

    // --- train ------------------------------------------------------------
    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train the multi-task SCVAE on a dataset");
    c_tr->add_option("--data", tr.data, "Dataset directory")->required();
    c_tr->add_option("--out", tr.out, "Checkpoint directory")->required();
    c_tr->add_option("--latent", tr.latent, "Latent dimension J")->capture_default_str();
    c_tr->add_option("--alpha", tr.alpha, "Classification-term scale")->capture_default_str();
    c_tr->add_option("--beta", tr.beta, "KL-term scale")->capture_default_str();
    c_tr->add_option("--batch", tr.batch, "Minibatch size R")->capture_default_str();
    c_tr->add_option("--patience", tr.patience, "Early-stopping patience (epochs)")
        ->capture_default_str();
    c_tr->add_option("--max-epochs", tr.max_epochs, "Epoch cap")->capture_default_str();
    c_tr->add_option("--seed", tr.seed, "Training seed (init/shuffle/noise substreams)");
    c_tr->add_option("--lr", tr.lr, "ADAM learning rate")->capture_default_str();
    c_tr->add_option("--mc-samples", tr.mc_samples, "Reparameterization draws L per instance")
        ->capture_default_str();
    c_tr->add_option("--conv1-filters", tr.conv1_filters, "Encoder conv-1 filters")
        ->capture_default_str();
    c_tr->add_option("--conv2-filters", tr.conv2_filters, "Encoder conv-2 filters")
        ->capture_default_str();
    c_tr->add_option("--enc-dense", tr.enc_dense, "Encoder shared dense width")
        ->capture_default_str();
    c_tr->add_option("--cls-h1", tr.cls_h1, "Classifier hidden width 1")->capture_default_str();
    c_tr->add_option("--cls-h2", tr.cls_h2, "Classifier hidden width 2")->capture_default_str();
    c_tr->add_option("--cls-h3", tr.cls_h3, "Classifier hidden width 3")->capture_default_str();
    c_tr->callback([&] { action = [&tr] { return cmd_train(tr); }; });

    // --- evaluate ----------------------------------------------------------
    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand(
        "evaluate", "Relative L2, accuracy, confusion matrix, ROC with MC bands");
    c_ev->add_option("--model", ev.model, "Checkpoint directory")->required();
    c_ev->add_option("--data", ev.data, "Dataset directory")->required();
    c_ev->add_option("--split", ev.split, "train | val | test")->capture_default_str();
    c_ev->add_option("--n-mc", ev.n_mc, "Posterior draws per instance")->capture_default_str();
    c_ev->add_option("--seed", ev.seed, "MC seed");
    c_ev->add_option("--out", ev.out, "Report directory")->required();
    c_ev->callback([&] { action = [&ev] { return cmd_evaluate(ev); }; });

    // --- reconstruct --------------------------------------------------------
    ReconstructArgs rec;
    auto* c_rec = app.add_subcommand(
        "reconstruct", "Posterior-predictive field reconstruction from measurements");
    c_rec->add_option("--model", rec.model, "Checkpoint directory")->required();
    c_rec->add_option("--m", rec.m_file, "Measurement file (M values)");
    c_rec->add_option("--instance", rec.instance, "Instance index into --data/--split");
    c_rec->add_option("--data", rec.data, "Dataset directory (with --instance)");
    c_rec->add_option("--split", rec.split, "train | val | test")->capture_default_str();
    c_rec->add_option("--n-mc", rec.n_mc, "Posterior draws")->capture_default_str();
    c_rec->add_option("--seed", rec.seed, "MC seed");
    c_rec->add_option("--out", rec.out, "Output directory")->required();
    c_rec->add_flag("--samples", rec.keep_samples, "Also write raw draws (samples.f32)");
    c_rec->callback([&] { action = [&rec] { return cmd_reconstruct(rec); }; });

    // --- classify -----------------------------------------------------------
    ClassifyArgs cls;
    auto* c_cls = app.add_subcommand(
        "classify", "Posterior-predictive leak-rate classification from measurements");
    c_cls->add_option("--model", cls.model, "Checkpoint directory")->required();
    c_cls->add_option("--m", cls.m_file, "Measurement file (M values)");
    c_cls->add_option("--instance", cls.instance, "Instance index into --data/--split");
    c_cls->add_option("--data", cls.data, "Dataset directory (with --instance)");
    c_cls->add_option("--split", cls.split, "train | val | test")->capture_default_str();
    c_cls->add_option("--n-mc", cls.n_mc, "Posterior draws")->capture_default_str();
    c_cls->add_option("--seed", cls.seed, "MC seed");
    c_cls->add_option("--out", cls.out, "Output directory")->required();
    c_cls->callback([&] { action = [&cls] { return cmd_classify(cls); }; });

    // --- pipeline -----------------------------------------------------------
    PipelineArgs pl;
    auto* c_pl = app.add_subcommand(
        "pipeline", "simulate -> preprocess -> train -> evaluate under one seed");
    c_pl->add_option("--preset", pl.preset, "desk | paper-shape")->capture_default_str();
    c_pl->add_option("--seed", pl.seed, "Master seed; stages use named substreams");
    c_pl->add_option("--mc-seed", pl.mc_seed,
                     "Override the posterior-sampling substream seed");
    c_pl->add_option("--out", pl.out, "Run directory")->required();
    c_pl->add_option("--max-epochs", pl.max_epochs, "Override preset epoch cap");
    c_pl->add_option("--patience", pl.patience, "Override preset patience");
    c_pl->add_option("--batch", pl.batch, "Override preset batch size");
    c_pl->add_option("--latent", pl.latent, "Override preset latent dim");
    c_pl->add_option("--alpha", pl.alpha, "Override preset alpha");
    c_pl->add_option("--beta", pl.beta, "Override preset beta");
    c_pl->add_option("--lr", pl.lr, "Override preset learning rate");
    c_pl->add_option("--n-mc", pl.n_mc, "Override preset posterior draws");
    c_pl->add_option("--threshold", pl.threshold, "Override preset filter threshold");
    c_pl->add_option("--jobs", pl.jobs, "Concurrent scenario simulations");
    c_pl->callback([&] { action = [&pl] { return cmd_pipeline(pl); }; });

    const int rc = dispatch(app, argc, argv, [&] {
        require(static_cast<bool>(action), "no subcommand selected");
        return action();
    });
    (void)rc_target;
    return rc;
}
