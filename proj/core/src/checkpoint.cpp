#include "azmi/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <vector>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; byte swapping not implemented");

namespace azmi::scvae {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json config_to_json(const ModelConfig& c) {
    return {{"grid_h", c.grid_h},
            {"grid_w", c.grid_w},
            {"n_classes", c.n_classes},
            {"n_wells", c.n_wells},
            {"latent_dim", c.latent_dim},
            {"conv1_filters", c.conv1_filters},
            {"conv2_filters", c.conv2_filters},
            {"enc_dense", c.enc_dense},
            {"cls_h1", c.cls_h1},
            {"cls_h2", c.cls_h2},
            {"cls_h3", c.cls_h3}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.grid_h = j.at("grid_h").get<int>();
    c.grid_w = j.at("grid_w").get<int>();
    c.n_classes = j.at("n_classes").get<int>();
    c.n_wells = j.at("n_wells").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.conv1_filters = j.at("conv1_filters").get<int>();
    c.conv2_filters = j.at("conv2_filters").get<int>();
    c.enc_dense = j.at("enc_dense").get<int>();
    c.cls_h1 = j.at("cls_h1").get<int>();
    c.cls_h2 = j.at("cls_h2").get<int>();
    c.cls_h3 = j.at("cls_h3").get<int>();
    return c;
}

json hyper_to_json(const HyperParams& h) {
    return {{"latent_dim", h.latent_dim}, {"alpha", h.alpha},
            {"beta", h.beta},             {"mc_samples", h.mc_samples},
            {"batch_size", h.batch_size}, {"patience", h.patience},
            {"max_epochs", h.max_epochs}, {"seed", h.seed},
            {"lr", h.lr},                 {"adam_beta1", h.adam_beta1},
            {"adam_beta2", h.adam_beta2}, {"adam_eps", h.adam_eps}};
}

HyperParams hyper_from_json(const json& j) {
    HyperParams h;
    h.latent_dim = j.at("latent_dim").get<int>();
    h.alpha = j.at("alpha").get<double>();
    h.beta = j.at("beta").get<double>();
    h.mc_samples = j.at("mc_samples").get<int>();
    h.batch_size = j.at("batch_size").get<int>();
    h.patience = j.at("patience").get<int>();
    h.max_epochs = j.at("max_epochs").get<int>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.lr = j.at("lr").get<double>();
    h.adam_beta1 = j.at("adam_beta1").get<double>();
    h.adam_beta2 = j.at("adam_beta2").get<double>();
    h.adam_eps = j.at("adam_eps").get<double>();
    return h;
}

void write_floats(const fs::path& path, const std::vector<float>& buf) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot open " + tmp.string());
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        require(out.good(), "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<float> read_floats(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    require(in.good(), "cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    require(bytes == expected * sizeof(float),
            path.filename().string() + ": payload is " + std::to_string(bytes) +
                " bytes, manifest expects " + std::to_string(expected * sizeof(float)));
    std::vector<float> buf(expected);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    require(in.good(), "read failed: " + path.string());
    return buf;
}

json load_manifest(const fs::path& dir) {
    std::ifstream in(dir / "model.json");
    require(in.good(), "missing model.json in " + dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("malformed model.json: " + std::string(e.what()));
    }
    const int version = manifest.value("format_version", -1);
    require(version == kFormatVersion,
            "unknown checkpoint format_version " + std::to_string(version));
    return manifest;
}

}  // namespace

void save_model(const fs::path& dir, const ScvaeModel<float>& model, const HyperParams& hyper,
                const nn::AdamState<float>* adam) {
    fs::create_directories(dir);
    json params = json::array();
    std::vector<float> payload;
    payload.reserve(model.store.total_size());
    for (const auto& p : model.store) {
        params.push_back({{"name", p.name}, {"shape", p.value.shape()}});
        payload.insert(payload.end(), p.value.vec().begin(), p.value.vec().end());
    }
    json manifest = {{"format_version", kFormatVersion},
                     {"model_config", config_to_json(model.config)},
                     {"hyper", hyper_to_json(hyper)},
                     {"params", params},
                     {"total_size", payload.size()},
                     {"has_adam", adam != nullptr}};
    write_floats(dir / "model.f32", payload);

    if (adam) {
        std::vector<float> opt;
        opt.reserve(2 * payload.size());
        for (const auto& t : adam->m) opt.insert(opt.end(), t.vec().begin(), t.vec().end());
        for (const auto& t : adam->v) opt.insert(opt.end(), t.vec().begin(), t.vec().end());
        write_floats(dir / "adam.f32", opt);
        manifest["adam"] = {{"t", adam->t},
                            {"lr", adam->lr},
                            {"beta1", adam->beta1},
                            {"beta2", adam->beta2},
                            {"eps", adam->eps}};
    }

    const std::string text = manifest.dump(2) + "\n";
    const fs::path tmp = dir / "model.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        require(out.good(), "cannot open " + tmp.string());
        out << text;
        require(out.good(), "write failed: " + tmp.string());
    }
    fs::rename(tmp, dir / "model.json");
}

ModelConfig read_model_config(const fs::path& dir) {
    try {
        return config_from_json(load_manifest(dir).at("model_config"));
    } catch (const json::exception& e) {
        throw DataError("malformed model.json: " + std::string(e.what()));
    }
}

HyperParams read_model_hyper(const fs::path& dir) {
    try {
        return hyper_from_json(load_manifest(dir).at("hyper"));
    } catch (const json::exception& e) {
        throw DataError("malformed model.json: " + std::string(e.what()));
    }
}

void load_model_params(const fs::path& dir, ScvaeModel<float>& model,
                       nn::AdamState<float>* adam) {
    const json manifest = load_manifest(dir);
    try {
        const auto& params = manifest.at("params");
        require(params.size() == model.store.count(),
                "checkpoint parameter count mismatch: manifest has " +
                    std::to_string(params.size()) + ", model expects " +
                    std::to_string(model.store.count()));
        const std::size_t total = manifest.at("total_size").get<std::size_t>();
        const std::vector<float> payload = read_floats(dir / "model.f32", total);
        std::size_t offset = 0, pi = 0;
        for (auto& p : model.store) {
            const auto& entry = params.at(pi);
            require(entry.at("name").get<std::string>() == p.name,
                    "checkpoint parameter order mismatch at " + p.name);
            const auto shape = entry.at("shape").get<std::vector<int>>();
            require(shape == p.value.shape(), "checkpoint shape mismatch for " + p.name);
            require(offset + p.value.size() <= payload.size(),
                    "checkpoint payload shorter than manifest");
            std::copy(payload.begin() + offset, payload.begin() + offset + p.value.size(),
                      p.value.vec().begin());
            offset += p.value.size();
            ++pi;
        }
        require(offset == payload.size(), "checkpoint payload longer than manifest");

        if (adam) {
            require(manifest.value("has_adam", false),
                    "checkpoint has no optimizer state (adam.f32)");
            const auto& aj = manifest.at("adam");
            adam->t = aj.at("t").get<long>();
            adam->lr = aj.at("lr").get<double>();
            adam->beta1 = aj.at("beta1").get<double>();
            adam->beta2 = aj.at("beta2").get<double>();
            adam->eps = aj.at("eps").get<double>();
            adam->m.clear();
            adam->v.clear();
            adam->ensure_shapes(model.store);
            const std::vector<float> opt = read_floats(dir / "adam.f32", 2 * total);
            std::size_t off = 0;
            for (auto& t : adam->m) {
                std::copy(opt.begin() + off, opt.begin() + off + t.size(), t.vec().begin());
                off += t.size();
            }
            for (auto& t : adam->v) {
                std::copy(opt.begin() + off, opt.begin() + off + t.size(), t.vec().begin());
                off += t.size();
            }
        }
    } catch (const json::exception& e) {
        throw DataError("malformed model.json: " + std::string(e.what()));
    }
}

}  // namespace azmi::scvae
