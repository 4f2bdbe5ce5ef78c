#include <iomanip>
#include <iostream>
#include <sstream>

#include "azmi/checkpoint.hpp"
#include "azmi/dataset_io.hpp"
#include "azmi/scvae.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

namespace azmi::cli {
namespace {

std::string history_csv(const std::vector<scvae::EpochStats>& history) {
    std::ostringstream os;
    os << "epoch,train_total,train_recon,train_class,train_kl,"
          "val_total,val_recon,val_class,val_kl\n";
    os << std::setprecision(10);
    for (std::size_t e = 0; e < history.size(); ++e) {
        const auto& h = history[e];
        os << e + 1 << ',' << h.train.total << ',' << h.train.recon << ','
           << h.train.class_term << ',' << h.train.kl << ',' << h.val.total << ','
           << h.val.recon << ',' << h.val.class_term << ',' << h.val.kl << '\n';
    }
    return os.str();
}

}  // namespace

int cmd_train(const TrainArgs& args) {
    const fs::path data_dir = resolve_artifact_path(args.data);
    const fs::path out = resolve_artifact_path(args.out);
    const data::Dataset ds = data::read_dataset(data_dir);

    scvae::ModelConfig cfg;
    cfg.grid_h = ds.meta.grid_h;
    cfg.grid_w = ds.meta.grid_w;
    cfg.n_classes = ds.meta.n_classes;
    cfg.n_wells = static_cast<int>(ds.meta.wells.count());
    cfg.latent_dim = args.latent;
    cfg.conv1_filters = args.conv1_filters;
    cfg.conv2_filters = args.conv2_filters;
    cfg.enc_dense = args.enc_dense;
    cfg.cls_h1 = args.cls_h1;
    cfg.cls_h2 = args.cls_h2;
    cfg.cls_h3 = args.cls_h3;

    scvae::HyperParams hyper;
    hyper.latent_dim = args.latent;
    hyper.alpha = args.alpha;
    hyper.beta = args.beta;
    hyper.mc_samples = args.mc_samples;
    hyper.batch_size = args.batch;
    hyper.patience = args.patience;
    hyper.max_epochs = args.max_epochs;
    hyper.seed = args.seed;
    hyper.lr = args.lr;

    scvae::ScvaeModel<float> model(cfg);
    Rng init_rng = Rng::substream(args.seed, "init");
    model.init_params(init_rng);

    const scvae::TrainResult result = scvae::train_scvae(model, ds.split, hyper);

    fs::create_directories(out);
    scvae::save_model(out, model, hyper, &result.adam);
    write_text_file(out / "history.csv", history_csv(result.history));
    write_run_json(out, {{"command", "train"},
                         {"data", data_dir.string()},
                         {"out", out.string()},
                         {"latent", args.latent},
                         {"alpha", args.alpha},
                         {"beta", args.beta},
                         {"batch", args.batch},
                         {"patience", args.patience},
                         {"max_epochs", args.max_epochs},
                         {"seed", args.seed},
                         {"lr", args.lr},
                         {"mc_samples", args.mc_samples},
                         {"epochs_run", result.history.size()},
                         {"best_epoch", result.best_epoch + 1},
                         {"best_val", result.best_val},
                         {"diverged", result.diverged}});

    if (result.diverged) {
        std::cerr << "train: diverged (" << result.divergence_msg
                  << "); best checkpoint preserved in " << out.string() << "\n";
        return kExitNumerical;
    }
    std::cout << "train: " << result.history.size() << " epochs, best validation total "
              << result.best_val << " at epoch " << result.best_epoch + 1 << "; checkpoint in "
              << out.string() << "\n";
    return kExitOk;
}

}  // namespace azmi::cli
