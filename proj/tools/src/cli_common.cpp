#include "cli_common.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "azmi/rng.hpp"

namespace azmi::cli {

fs::path resolve_artifact_path(const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("AZMI_ROOT"); root && *root)
        return fs::path(root) / p;
    return p;
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& name) {
    return Rng::substream(master, name).next_u64();
}

void write_text_file(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        require(out.good(), "cannot open " + tmp.string());
        out << text;
        require(out.good(), "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_run_json(const fs::path& dir, const json& config) {
    fs::create_directories(dir);
    write_text_file(dir / "run.json", config.dump(2) + "\n");
}

std::vector<float> read_floats_text(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path.string());
    std::vector<float> out;
    std::string tok;
    while (in >> tok) {
        if (tok.front() == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        try {
            out.push_back(std::stof(tok));
        } catch (const std::exception&) {
            throw DataError(path.string() + ": cannot parse '" + tok + "' as a number");
        }
    }
    return out;
}

std::vector<GridCell> read_wells_file(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open wells file " + path.string());
    std::vector<GridCell> wells;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        int r, c;
        if (!(ls >> r)) continue;  // blank line
        require(static_cast<bool>(ls >> c), path.string() + ":" + std::to_string(lineno) +
                                                ": expected 'row col'");
        wells.push_back({r, c});
    }
    require(!wells.empty(), path.string() + ": no wells listed");
    return wells;
}

void write_f32_file(const fs::path& path, const std::vector<float>& data) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot open " + tmp.string());
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
        require(out.good(), "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<float> read_f32_file(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    require(in.good(), "cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    require(bytes == expected * sizeof(float),
            path.filename().string() + ": expected " + std::to_string(expected) +
                " floats, file holds " + std::to_string(bytes / sizeof(float)));
    std::vector<float> buf(expected);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    require(in.good(), "read failed: " + path.string());
    return buf;
}

void write_pgm(const fs::path& path, const std::vector<float>& field, int h, int w) {
    require(field.size() == static_cast<std::size_t>(h) * w, "pgm: size mismatch");
    float lo = field.empty() ? 0.0f : field[0], hi = lo;
    for (float v : field) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float span = hi - lo;
    std::ostringstream os;
    os << "P5\n# min=" << lo << " max=" << hi << "\n" << w << " " << h << "\n255\n";
    for (float v : field) {
        const float t = span > 0.0f ? (v - lo) / span : 0.0f;
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0f))));
    }
    write_text_file(path, os.str());
}

void write_series_manifest(const fs::path& dir, const SeriesManifest& man) {
    json wells = json::array();
    for (const auto& c : man.wells) wells.push_back({c.row, c.col});
    json scenarios = json::array();
    for (const auto& s : man.scenarios)
        scenarios.push_back({{"id", s.id},
                             {"file", s.file},
                             {"leak", {s.leak.row, s.leak.col}},
                             {"rate_class", s.rate_class},
                             {"rate_value", s.rate_value},
                             {"n_steps", s.n_steps}});
    const json j = {{"format_version", man.format_version},
                    {"grid_h", man.grid_h},
                    {"grid_w", man.grid_w},
                    {"dt", man.dt},
                    {"cell_size", man.cell_size},
                    {"p0", man.p0},
                    {"diffusivity_scale", man.diffusivity_scale},
                    {"seed", man.seed},
                    {"n_classes", man.n_classes},
                    {"class_rates", man.class_rates},
                    {"wells", wells},
                    {"hetero", man.hetero},
                    {"active_file", "active.u8"},
                    {"scenarios", scenarios}};
    write_text_file(dir / "series_manifest.json", j.dump(2) + "\n");
}

SeriesManifest read_series_manifest(const fs::path& dir) {
    std::ifstream in(dir / "series_manifest.json");
    require(in.good(), "missing series_manifest.json in " + dir.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed series_manifest.json: " + std::string(e.what()));
    }
    SeriesManifest man;
    try {
        man.format_version = j.at("format_version").get<int>();
        require(man.format_version == 1,
                "unknown series format_version " + std::to_string(man.format_version));
        man.grid_h = j.at("grid_h").get<int>();
        man.grid_w = j.at("grid_w").get<int>();
        man.dt = j.at("dt").get<double>();
        man.cell_size = j.at("cell_size").get<double>();
        man.p0 = j.at("p0").get<double>();
        man.diffusivity_scale = j.at("diffusivity_scale").get<double>();
        man.seed = j.at("seed").get<std::uint64_t>();
        man.n_classes = j.at("n_classes").get<int>();
        man.class_rates = j.at("class_rates").get<std::vector<double>>();
        for (const auto& c : j.at("wells"))
            man.wells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
        man.hetero = j.value("hetero", json::object());
        for (const auto& s : j.at("scenarios")) {
            SeriesScenario sc;
            sc.id = s.at("id").get<int>();
            sc.file = s.at("file").get<std::string>();
            sc.leak = {s.at("leak").at(0).get<int>(), s.at("leak").at(1).get<int>()};
            sc.rate_class = s.at("rate_class").get<int>();
            sc.rate_value = s.at("rate_value").get<double>();
            sc.n_steps = s.at("n_steps").get<int>();
            man.scenarios.push_back(sc);
        }
    } catch (const json::exception& e) {
        throw DataError("malformed series_manifest.json: " + std::string(e.what()));
    }
    return man;
}

void write_series_frames(const fs::path& dir, const SeriesScenario& sc,
                         const sim::PressureSeries& series) {
    const std::size_t cells = static_cast<std::size_t>(series.grid_h) * series.grid_w;
    std::vector<float> buf;
    buf.reserve(series.frames.size() * cells);
    for (const auto& frame : series.frames)
        for (double v : frame) buf.push_back(static_cast<float>(v));
    write_f32_file(dir / sc.file, buf);
}

std::vector<std::vector<float>> read_series_frames(const fs::path& dir,
                                                   const SeriesScenario& sc, int grid_h,
                                                   int grid_w) {
    const std::size_t cells = static_cast<std::size_t>(grid_h) * grid_w;
    const std::vector<float> buf =
        read_f32_file(dir / sc.file, cells * static_cast<std::size_t>(sc.n_steps));
    std::vector<std::vector<float>> frames(sc.n_steps, std::vector<float>(cells));
    for (int t = 0; t < sc.n_steps; ++t)
        std::copy(buf.begin() + t * cells, buf.begin() + (t + 1) * cells, frames[t].begin());
    return frames;
}

void write_active_mask(const fs::path& dir, const std::vector<std::uint8_t>& active) {
    const fs::path path = dir / "active.u8";
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot open " + tmp.string());
        out.write(reinterpret_cast<const char*>(active.data()),
                  static_cast<std::streamsize>(active.size()));
        require(out.good(), "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<std::uint8_t> read_active_mask(const fs::path& dir, std::size_t cells) {
    std::ifstream in(dir / "active.u8", std::ios::binary | std::ios::ate);
    require(in.good(), "missing active.u8 in " + dir.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    require(bytes == cells, "active.u8: expected " + std::to_string(cells) + " bytes, got " +
                                std::to_string(bytes));
    std::vector<std::uint8_t> buf(cells);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    return buf;
}

}  // namespace azmi::cli
