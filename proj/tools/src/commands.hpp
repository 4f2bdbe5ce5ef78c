#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace azmi::cli {

struct SimulateArgs {
    std::vector<int> grid;  // H W (optional; scenario file may carry it)
    std::uint64_t seed = 0;
    std::string scenarios_file;
    std::string out;
    int jobs = 0;  // 0 = hardware concurrency
};
int cmd_simulate(const SimulateArgs& args);

struct PreprocessArgs {
    std::string in;
    std::string out;
    double threshold = 5.0;
    std::string wells_file;  // optional; processed-grid coordinates
    std::vector<double> split{0.64, 0.16, 0.20};
    std::uint64_t seed = 0;
    std::string downsample = "auto";  // auto | on | off
};
int cmd_preprocess(const PreprocessArgs& args);

struct TrainArgs {
    std::string data;
    std::string out;
    int latent = 2;
    double alpha = 1.0;
    double beta = 1.0;
    int batch = 128;
    int patience = 200;
    int max_epochs = 1000;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    int mc_samples = 1;
    int conv1_filters = 32;
    int conv2_filters = 64;
    int enc_dense = 16;
    int cls_h1 = 128;
    int cls_h2 = 64;
    int cls_h3 = 32;
};
int cmd_train(const TrainArgs& args);

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string split = "test";
    int n_mc = 100;
    std::uint64_t seed = 0;
    std::string out;
};
int cmd_evaluate(const EvaluateArgs& args);

struct ReconstructArgs {
    std::string model;
    std::string m_file;   // either this...
    int instance = -1;    // ...or an instance index into --data/--split
    std::string data;
    std::string split = "test";
    int n_mc = 100;
    std::uint64_t seed = 0;
    std::string out;
    bool keep_samples = false;
};
int cmd_reconstruct(const ReconstructArgs& args);

struct ClassifyArgs {
    std::string model;
    std::string m_file;
    int instance = -1;
    std::string data;
    std::string split = "test";
    int n_mc = 100;
    std::uint64_t seed = 0;
    std::string out;
};
int cmd_classify(const ClassifyArgs& args);

struct PipelineArgs {
    std::string preset = "desk";  // desk | paper-shape
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> mc_seed;  // defaults to a substream of seed
    std::string out;
    // Optional overrides of preset values (<0 / empty = keep preset).
    int max_epochs = -1;
    int patience = -1;
    int batch = -1;
    int latent = -1;
    double alpha = -1.0;
    double beta = -1.0;
    double lr = -1.0;
    int n_mc = -1;
    double threshold = -1.0;
    int jobs = 0;
};
int cmd_pipeline(const PipelineArgs& args);

}  // namespace azmi::cli
