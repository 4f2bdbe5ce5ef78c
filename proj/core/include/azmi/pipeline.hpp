#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "azmi/common.hpp"
#include "azmi/leaksim.hpp"
#include "azmi/tensor.hpp"

namespace azmi::data {

/// Ordered monitoring-well coordinates on the (downsampled) grid. The
/// order fixes the ordering of the measurement vector m.
struct WellSet {
    std::vector<GridCell> coords;

    void validate(int grid_h, int grid_w) const;
    std::size_t count() const { return coords.size(); }
};

/// One training triple: incremental field x, class probability vector y,
/// well measurements m = x gathered at the well coordinates.
struct Instance {
    nn::TensorF x;             // [grid_h, grid_w], psi
    std::vector<float> y;      // length r, on the probability simplex
    std::vector<float> m;      // length M
    std::int32_t scenario_id = 0;
    std::int32_t step = 0;     // increment index within the scenario

    bool operator==(const Instance&) const = default;
};

struct DatasetSplit {
    std::vector<Instance> train, val, test;
    std::array<double, 3> fractions{0.64, 0.16, 0.20};
    std::uint64_t seed = 0;
};

/// Every-third-point downsampling: keeps input[3a, 3b] and drops the two
/// trailing columns of the coarse grid, (H, W) -> (ceil(H/3), ceil(W/3)-2).
/// A 478x486 raw field maps onto the 160x160 monitoring grid.
template <typename T>
nn::Tensor<T> downsample(const nn::Tensor<T>& field);

/// Incremental pressure fields: out[t] = p[t+1] - p[t], T frames -> T-1.
std::vector<nn::TensorD> incremental(const sim::PressureSeries& series);

/// Keep exactly the instances whose max |x| over cells is <= threshold.
std::vector<Instance> filter_extremes(std::vector<Instance> instances, double threshold);

/// One-hot probability vector for 1-based class_index in [1, r].
std::vector<float> one_hot(int class_index, int r);

/// Gather x at the well coordinates (equivalent to the sampling-matrix
/// product C * vec(x), with one unit entry per row of C).
std::vector<float> sample_wells(const nn::TensorF& x, const WellSet& wells);

/// Seeded three-way split. The test fraction is drawn first from all
/// data, then the validation share is drawn from the remainder; counts
/// use the ceiling rule (15241 at 0.64/0.16/0.20 -> 9753/2439/3049).
DatasetSplit split(std::vector<Instance> instances, std::array<double, 3> fractions,
                   std::uint64_t seed);

extern template nn::Tensor<float> downsample(const nn::Tensor<float>&);
extern template nn::Tensor<double> downsample(const nn::Tensor<double>&);

}  // namespace azmi::data
