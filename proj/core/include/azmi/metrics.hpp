#pragma once

#include <cstdint>
#include <vector>

#include "azmi/tensor.hpp"

namespace azmi::eval {

/// Mean relative L2 error over instance pairs. All-zero truth fields are
/// excluded from the mean and counted in `excluded`.
struct RelL2 {
    double mean = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
};
RelL2 relative_l2(const std::vector<nn::TensorF>& predictions,
                  const std::vector<nn::TensorF>& truths);

/// r x r counts, rows = true class, columns = predicted class (1-based
/// labels on input).
struct ConfusionMatrix {
    int r = 0;
    std::vector<std::int64_t> counts;  // row-major

    std::int64_t at(int true_cls, int pred_cls) const {
        return counts[static_cast<std::size_t>(true_cls) * r + pred_cls];
    }
    std::int64_t total() const;
    std::int64_t trace() const;
    double accuracy() const;
};
ConfusionMatrix confusion(const std::vector<int>& true_labels,
                          const std::vector<int>& predicted_labels, int r);

/// One-vs-rest ROC for a single class, vertically averaged across MC
/// draws: mean/std TPR at each FPR grid point, AUC by trapezoid on the
/// mean curve. `defined` is false when the class is absent from the true
/// labels (or no negatives exist).
struct RocCurve {
    bool defined = true;
    std::vector<double> fpr;
    std::vector<double> tpr_mean;
    std::vector<double> tpr_std;
    double auc = 0.0;
};

/// score_samples[i][j] is the j-th MC probability vector for instance i;
/// every instance must carry the same number of draws. The grid (values
/// in [0, 1], endpoints included) is used both as the threshold sweep and
/// as the FPR abscissae for the across-draw averaging.
std::vector<RocCurve> roc_ovr(const std::vector<std::vector<std::vector<double>>>& score_samples,
                              const std::vector<int>& true_labels,
                              const std::vector<double>& threshold_grid, int r);

/// Mean of the defined per-class curves at each FPR grid point; AUC is the
/// mean of the defined per-class AUCs.
RocCurve macro_average(const std::vector<RocCurve>& curves);

/// Evenly spaced grid over [0, 1] with both endpoints, n_points >= 2.
std::vector<double> default_threshold_grid(int n_points = 101);

}  // namespace azmi::eval
