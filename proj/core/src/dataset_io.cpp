#include "azmi/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "payload format is little-endian; byte swapping not implemented");

namespace azmi::data {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file_atomic(const fs::path& path, const void* data, std::size_t bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot open " + tmp.string() + " for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
        require(out.good(), "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<char> read_file(const fs::path& path, std::size_t expected_bytes) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    require(in.good(), "cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    require(bytes == expected_bytes, path.filename().string() + ": payload is " +
                                         std::to_string(bytes) + " bytes, manifest expects " +
                                         std::to_string(expected_bytes));
    std::vector<char> buf(bytes);
    in.seekg(0);
    in.read(buf.data(), static_cast<std::streamsize>(bytes));
    require(in.good(), "read failed: " + path.string());
    return buf;
}

void write_split(const fs::path& dir, const std::string& name,
                 const std::vector<Instance>& instances, const DatasetMeta& meta) {
    const std::size_t cells = static_cast<std::size_t>(meta.grid_h) * meta.grid_w;
    const std::size_t m_len = meta.wells.count();
    std::vector<float> xs, ms;
    std::vector<std::uint8_t> ys;
    std::vector<std::uint32_t> src;
    xs.reserve(instances.size() * cells);
    ms.reserve(instances.size() * m_len);
    ys.reserve(instances.size());
    src.reserve(instances.size() * 2);
    for (const auto& inst : instances) {
        require(inst.x.size() == cells, "instance field size mismatch in split " + name);
        require(inst.m.size() == m_len, "instance measurement size mismatch in split " + name);
        xs.insert(xs.end(), inst.x.vec().begin(), inst.x.vec().end());
        ms.insert(ms.end(), inst.m.begin(), inst.m.end());
        const auto mx = std::max_element(inst.y.begin(), inst.y.end());
        ys.push_back(static_cast<std::uint8_t>(mx - inst.y.begin()));
        src.push_back(static_cast<std::uint32_t>(inst.scenario_id));
        src.push_back(static_cast<std::uint32_t>(inst.step));
    }
    write_file_atomic(dir / (name + ".x.f32"), xs.data(), xs.size() * sizeof(float));
    write_file_atomic(dir / (name + ".m.f32"), ms.data(), ms.size() * sizeof(float));
    write_file_atomic(dir / (name + ".y.u8"), ys.data(), ys.size());
    write_file_atomic(dir / (name + ".src.u32"), src.data(), src.size() * sizeof(std::uint32_t));
}

std::vector<Instance> read_split(const fs::path& dir, const std::string& name,
                                 std::size_t count, const DatasetMeta& meta) {
    const std::size_t cells = static_cast<std::size_t>(meta.grid_h) * meta.grid_w;
    const std::size_t m_len = meta.wells.count();
    const auto xbuf = read_file(dir / (name + ".x.f32"), count * cells * sizeof(float));
    const auto mbuf = read_file(dir / (name + ".m.f32"), count * m_len * sizeof(float));
    const auto ybuf = read_file(dir / (name + ".y.u8"), count);
    const auto sbuf = read_file(dir / (name + ".src.u32"), count * 2 * sizeof(std::uint32_t));

    std::vector<Instance> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        Instance& inst = out[i];
        inst.x = nn::TensorF({meta.grid_h, meta.grid_w});
        std::memcpy(inst.x.data(), xbuf.data() + i * cells * sizeof(float),
                    cells * sizeof(float));
        inst.m.resize(m_len);
        std::memcpy(inst.m.data(), mbuf.data() + i * m_len * sizeof(float),
                    m_len * sizeof(float));
        const auto cls = static_cast<std::uint8_t>(ybuf[i]);
        require(cls < meta.n_classes, name + ": class index " + std::to_string(cls) +
                                          " out of range for r = " +
                                          std::to_string(meta.n_classes));
        inst.y = one_hot(cls + 1, meta.n_classes);
        std::uint32_t pair[2];
        std::memcpy(pair, sbuf.data() + i * 2 * sizeof(std::uint32_t), sizeof(pair));
        inst.scenario_id = static_cast<std::int32_t>(pair[0]);
        inst.step = static_cast<std::int32_t>(pair[1]);
    }
    return out;
}

}  // namespace

void write_dataset(const Dataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    write_split(dir, "train", ds.split.train, ds.meta);
    write_split(dir, "val", ds.split.val, ds.meta);
    write_split(dir, "test", ds.split.test, ds.meta);

    json wells = json::array();
    for (const auto& c : ds.meta.wells.coords) wells.push_back({c.row, c.col});
    json scenarios = json::array();
    for (const auto& s : ds.meta.scenarios)
        scenarios.push_back({{"id", s.id},
                             {"leak", {s.leak.row, s.leak.col}},
                             {"rate_class", s.rate_class},
                             {"rate_value", s.rate_value},
                             {"n_steps", s.n_steps},
                             {"dt", s.dt}});
    const json manifest = {
        {"format_version", ds.meta.format_version},
        {"grid_h", ds.meta.grid_h},
        {"grid_w", ds.meta.grid_w},
        {"n_classes", ds.meta.n_classes},
        {"wells", wells},
        {"splits",
         {{"train", ds.split.train.size()},
          {"val", ds.split.val.size()},
          {"test", ds.split.test.size()}}},
        {"dtype", "f32"},
        {"class_rates", ds.meta.class_rates},
        {"scenarios", scenarios},
        {"threshold", ds.meta.threshold},
        {"fractions", ds.split.fractions},
        {"split_seed", ds.split.seed},
    };
    const std::string text = manifest.dump(2) + "\n";
    write_file_atomic(dir / "manifest.json", text.data(), text.size());
}

Dataset read_dataset(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    require(in.good(), "missing manifest.json in " + dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("malformed manifest.json: " + std::string(e.what()));
    }

    Dataset ds;
    try {
        ds.meta.format_version = manifest.at("format_version").get<int>();
        require(ds.meta.format_version == 1,
                "unknown dataset format_version " + std::to_string(ds.meta.format_version));
        ds.meta.grid_h = manifest.at("grid_h").get<int>();
        ds.meta.grid_w = manifest.at("grid_w").get<int>();
        ds.meta.n_classes = manifest.at("n_classes").get<int>();
        require(manifest.at("dtype").get<std::string>() == "f32",
                "unsupported dtype " + manifest.at("dtype").get<std::string>());
        for (const auto& c : manifest.at("wells"))
            ds.meta.wells.coords.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
        ds.meta.class_rates = manifest.value("class_rates", std::vector<double>{});
        ds.meta.threshold = manifest.value("threshold", 5.0);
        for (const auto& s : manifest.value("scenarios", json::array())) {
            ScenarioInfo info;
            info.id = s.at("id").get<int>();
            info.leak = {s.at("leak").at(0).get<int>(), s.at("leak").at(1).get<int>()};
            info.rate_class = s.at("rate_class").get<int>();
            info.rate_value = s.at("rate_value").get<double>();
            info.n_steps = s.at("n_steps").get<int>();
            info.dt = s.at("dt").get<double>();
            ds.meta.scenarios.push_back(info);
        }
        const auto& fr = manifest.at("fractions");
        ds.split.fractions = {fr.at(0).get<double>(), fr.at(1).get<double>(),
                              fr.at(2).get<double>()};
        ds.split.seed = manifest.value("split_seed", std::uint64_t{0});

        const auto& splits = manifest.at("splits");
        ds.split.train = read_split(dir, "train", splits.at("train").get<std::size_t>(), ds.meta);
        ds.split.val = read_split(dir, "val", splits.at("val").get<std::size_t>(), ds.meta);
        ds.split.test = read_split(dir, "test", splits.at("test").get<std::size_t>(), ds.meta);
    } catch (const json::exception& e) {
        throw DataError("malformed manifest.json: " + std::string(e.what()));
    }
    return ds;
}

}  // namespace azmi::data
