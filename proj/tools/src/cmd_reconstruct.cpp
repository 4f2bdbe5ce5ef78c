#include <algorithm>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "azmi/checkpoint.hpp"
#include "azmi/dataset_io.hpp"
#include "azmi/posterior.hpp"
#include "cli_common.hpp"
#include "commands.hpp"

namespace azmi::cli {
namespace {

struct Target {
    std::vector<float> m;
    std::optional<nn::TensorF> truth;
};

Target load_target(const std::string& m_file, int instance, const std::string& data,
                   const std::string& split_name, int n_wells) {
    Target t;
    if (!m_file.empty()) {
        require(instance < 0, "--m and --instance are mutually exclusive");
        t.m = read_floats_text(resolve_artifact_path(m_file));
        require(static_cast<int>(t.m.size()) == n_wells,
                "--m file holds " + std::to_string(t.m.size()) + " values, model expects " +
                    std::to_string(n_wells));
        return t;
    }
    require(instance >= 0, "pass either --m FILE or --instance IDX");
    require(!data.empty(), "--instance requires --data DIR");
    const data::Dataset ds = data::read_dataset(resolve_artifact_path(data));
    const auto& list = split_name == "train" ? ds.split.train
                       : split_name == "val" ? ds.split.val
                                             : ds.split.test;
    require(split_name == "train" || split_name == "val" || split_name == "test",
            "unknown split '" + split_name + "'");
    require(static_cast<std::size_t>(instance) < list.size(),
            "--instance " + std::to_string(instance) + " outside split of size " +
                std::to_string(list.size()));
    t.m = list[instance].m;
    t.truth = list[instance].x;
    return t;
}

}  // namespace

int cmd_reconstruct(const ReconstructArgs& args) {
    const fs::path model_dir = resolve_artifact_path(args.model);
    const fs::path out = resolve_artifact_path(args.out);
    require(args.n_mc >= 2, "--n-mc must be >= 2");

    const scvae::ModelConfig cfg = scvae::read_model_config(model_dir);
    scvae::ScvaeModel<float> model(cfg);
    scvae::load_model_params(model_dir, model);

    const Target target = load_target(args.m_file, args.instance, args.data, args.split,
                                      cfg.n_wells);

    post::PosteriorConfig pcfg;
    pcfg.n_mc = args.n_mc;
    pcfg.seed = args.seed;
    const auto fields = post::sample_posterior_x(model, target.m, pcfg);

    std::vector<std::vector<double>> samples(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j)
        samples[j].assign(fields[j].vec().begin(), fields[j].vec().end());
    const post::PosteriorSummary summary = post::summarize(samples, pcfg);

    const int h = cfg.grid_h, w = cfg.grid_w;
    std::vector<float> mean(summary.mean.begin(), summary.mean.end());
    std::vector<float> stddev(summary.std_dev.begin(), summary.std_dev.end());

    fs::create_directories(out);
    write_f32_file(out / "mean.f32", mean);
    write_f32_file(out / "std.f32", stddev);
    write_pgm(out / "mean.pgm", mean, h, w);
    write_pgm(out / "std.pgm", stddev, h, w);

    std::optional<nn::TensorF> abs_err;
    if (target.truth) {
        nn::TensorF mean_t({h, w});
        std::copy(mean.begin(), mean.end(), mean_t.data());
        abs_err = post::abs_error_map(*target.truth, mean_t);
        write_f32_file(out / "abs_err.f32", abs_err->vec());
        write_pgm(out / "abs_err.pgm", abs_err->vec(), h, w);
        write_f32_file(out / "true.f32", target.truth->vec());
        write_pgm(out / "true.pgm", target.truth->vec(), h, w);
    }
    if (args.keep_samples) {
        std::vector<float> flat;
        flat.reserve(fields.size() * static_cast<std::size_t>(h) * w);
        for (const auto& f : fields)
            flat.insert(flat.end(), f.vec().begin(), f.vec().end());
        write_f32_file(out / "samples.f32", flat);
    }

    // Long-format CSV of the figure panels.
    std::ostringstream os;
    os << std::setprecision(8);
    os << (target.truth ? "row,col,true,mean,std,abs_err\n" : "row,col,mean,std\n");
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * w + c;
            os << r << ',' << c << ',';
            if (target.truth)
                os << (*target.truth)[k] << ',' << mean[k] << ',' << stddev[k] << ','
                   << (*abs_err)[k] << '\n';
            else
                os << mean[k] << ',' << stddev[k] << '\n';
        }
    write_text_file(out / "panels.csv", os.str());

    write_run_json(out, {{"command", "reconstruct"},
                         {"model", model_dir.string()},
                         {"m_file", args.m_file},
                         {"instance", args.instance},
                         {"data", args.data},
                         {"split", args.split},
                         {"n_mc", args.n_mc},
                         {"seed", args.seed},
                         {"out", out.string()},
                         {"samples", args.keep_samples}});
    std::cout << "reconstruct: wrote posterior mean/std" << (target.truth ? "/abs_err" : "")
              << " to " << out.string() << "\n";
    return kExitOk;
}

}  // namespace azmi::cli
