#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace azmi {

/// Data/format violations: bad shapes, malformed files, out-of-range inputs.
/// Maps to process exit code 3 at the CLI boundary.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failures: non-finite losses or gradients, divergence.
/// Maps to process exit code 4 at the CLI boundary.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// (row, col) index into a rectangular grid.
struct GridCell {
    int row = 0;
    int col = 0;
    bool operator==(const GridCell&) const = default;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DataError(msg);
}

}  // namespace azmi
