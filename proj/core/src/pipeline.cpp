#include "azmi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "azmi/rng.hpp"

namespace azmi::data {

void WellSet::validate(int grid_h, int grid_w) const {
    std::set<std::pair<int, int>> seen;
    for (const auto& c : coords) {
        require(c.row >= 0 && c.row < grid_h && c.col >= 0 && c.col < grid_w,
                "well (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                    ") outside the " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                    " grid");
        require(seen.insert({c.row, c.col}).second,
                "duplicate well (" + std::to_string(c.row) + "," + std::to_string(c.col) + ")");
    }
}

template <typename T>
nn::Tensor<T> downsample(const nn::Tensor<T>& field) {
    require(field.rank() == 2, "downsample: expected a 2D field");
    const int h = field.dim(0), w = field.dim(1);
    const int oh = (h + 2) / 3;
    const int ow = (w + 2) / 3 - 2;
    require(oh >= 1 && ow >= 1, "downsample: input " + std::to_string(h) + "x" +
                                    std::to_string(w) + " too small");
    nn::Tensor<T> out({oh, ow});
    for (int a = 0; a < oh; ++a)
        for (int b = 0; b < ow; ++b)
            out[static_cast<std::size_t>(a) * ow + b] =
                field[static_cast<std::size_t>(3 * a) * w + 3 * b];
    return out;
}

template nn::Tensor<float> downsample(const nn::Tensor<float>&);
template nn::Tensor<double> downsample(const nn::Tensor<double>&);

std::vector<nn::TensorD> incremental(const sim::PressureSeries& series) {
    const std::size_t n_frames = series.frames.size();
    require(n_frames >= 2, "incremental: need at least 2 frames, got " +
                               std::to_string(n_frames));
    std::vector<nn::TensorD> out;
    out.reserve(n_frames - 1);
    const std::size_t cells = static_cast<std::size_t>(series.grid_h) * series.grid_w;
    for (std::size_t t = 0; t + 1 < n_frames; ++t) {
        require(series.frames[t].size() == cells && series.frames[t + 1].size() == cells,
                "incremental: frame size mismatch");
        nn::TensorD d({series.grid_h, series.grid_w});
        for (std::size_t i = 0; i < cells; ++i)
            d[i] = series.frames[t + 1][i] - series.frames[t][i];
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Instance> filter_extremes(std::vector<Instance> instances, double threshold) {
    require(threshold > 0.0, "filter_extremes: threshold must be positive");
    std::vector<Instance> kept;
    kept.reserve(instances.size());
    for (auto& inst : instances) {
        double mx = 0.0;
        for (float v : inst.x.vec()) mx = std::max(mx, std::abs(static_cast<double>(v)));
        if (mx <= threshold) kept.push_back(std::move(inst));
    }
    return kept;
}

std::vector<float> one_hot(int class_index, int r) {
    require(r >= 1, "one_hot: r must be >= 1");
    require(class_index >= 1 && class_index <= r,
            "one_hot: class index " + std::to_string(class_index) + " outside [1, " +
                std::to_string(r) + "]");
    std::vector<float> y(static_cast<std::size_t>(r), 0.0f);
    y[static_cast<std::size_t>(class_index - 1)] = 1.0f;
    return y;
}

std::vector<float> sample_wells(const nn::TensorF& x, const WellSet& wells) {
    require(x.rank() == 2, "sample_wells: expected a 2D field");
    const int h = x.dim(0), w = x.dim(1);
    wells.validate(h, w);
    std::vector<float> m;
    m.reserve(wells.coords.size());
    for (const auto& c : wells.coords)
        m.push_back(x[static_cast<std::size_t>(c.row) * w + c.col]);
    return m;
}

DatasetSplit split(std::vector<Instance> instances, std::array<double, 3> fractions,
                   std::uint64_t seed) {
    const double sum = fractions[0] + fractions[1] + fractions[2];
    require(fractions[0] > 0.0 && fractions[1] > 0.0 && fractions[2] > 0.0,
            "split: all fractions must be positive");
    require(std::abs(sum - 1.0) <= 1e-9, "split: fractions must sum to 1");
    const std::size_t n = instances.size();
    require(n >= 3, "split: need at least 3 instances");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    // Test drawn first from all data, then validation from the remainder.
    const std::size_t n_test =
        std::min(n, static_cast<std::size_t>(std::ceil(fractions[2] * static_cast<double>(n))));
    const std::size_t n_rem = n - n_test;
    const double val_share = fractions[1] / (fractions[0] + fractions[1]);
    const std::size_t n_val = std::min(
        n_rem, static_cast<std::size_t>(std::ceil(val_share * static_cast<double>(n_rem))));

    std::vector<std::size_t> test_idx(order.begin(), order.begin() + n_test);
    std::vector<std::size_t> val_idx(order.begin() + n_test, order.begin() + n_test + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_test + n_val, order.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    DatasetSplit out;
    out.fractions = fractions;
    out.seed = seed;
    out.train.reserve(train_idx.size());
    out.val.reserve(val_idx.size());
    out.test.reserve(test_idx.size());
    for (auto i : train_idx) out.train.push_back(std::move(instances[i]));
    for (auto i : val_idx) out.val.push_back(std::move(instances[i]));
    for (auto i : test_idx) out.test.push_back(std::move(instances[i]));
    return out;
}

}  // namespace azmi::data
