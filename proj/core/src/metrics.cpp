#include "azmi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace azmi::eval {

RelL2 relative_l2(const std::vector<nn::TensorF>& predictions,
                  const std::vector<nn::TensorF>& truths) {
    require(predictions.size() == truths.size(),
            "relative_l2: " + std::to_string(predictions.size()) + " predictions vs " +
                std::to_string(truths.size()) + " truths");
    RelL2 out;
    double acc = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        require(predictions[i].shape() == truths[i].shape(),
                "relative_l2: shape mismatch at instance " + std::to_string(i));
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < truths[i].size(); ++k) {
            const double d = static_cast<double>(predictions[i][k]) - truths[i][k];
            num += d * d;
            den += static_cast<double>(truths[i][k]) * truths[i][k];
        }
        if (den == 0.0) {
            ++out.excluded;
            continue;
        }
        acc += std::sqrt(num) / std::sqrt(den);
        ++out.used;
    }
    out.mean = out.used ? acc / static_cast<double>(out.used) : 0.0;
    return out;
}

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (int i = 0; i < r; ++i) t += counts[static_cast<std::size_t>(i) * r + i];
    return t;
}

double ConfusionMatrix::accuracy() const {
    const std::int64_t n = total();
    return n ? static_cast<double>(trace()) / static_cast<double>(n) : 0.0;
}

ConfusionMatrix confusion(const std::vector<int>& true_labels,
                          const std::vector<int>& predicted_labels, int r) {
    require(r >= 1, "confusion: r must be >= 1");
    require(true_labels.size() == predicted_labels.size(), "confusion: label list mismatch");
    ConfusionMatrix cm;
    cm.r = r;
    cm.counts.assign(static_cast<std::size_t>(r) * r, 0);
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int t = true_labels[i], p = predicted_labels[i];
        require(t >= 1 && t <= r, "confusion: true label " + std::to_string(t) +
                                      " outside [1, " + std::to_string(r) + "]");
        require(p >= 1 && p <= r, "confusion: predicted label " + std::to_string(p) +
                                      " outside [1, " + std::to_string(r) + "]");
        ++cm.counts[static_cast<std::size_t>(t - 1) * r + (p - 1)];
    }
    return cm;
}

std::vector<double> default_threshold_grid(int n_points) {
    require(n_points >= 2, "threshold grid needs at least 2 points");
    std::vector<double> g(n_points);
    for (int i = 0; i < n_points; ++i)
        g[i] = static_cast<double>(i) / static_cast<double>(n_points - 1);
    return g;
}

namespace {

/// TPR of the staircase (fpr_k, tpr_k ascending) at query fpr f: the
/// largest achieved TPR with FPR <= f, anchored at (0, 0).
double staircase_tpr(const std::vector<double>& fpr, const std::vector<double>& tpr, double f) {
    double best = 0.0;
    for (std::size_t k = 0; k < fpr.size(); ++k) {
        if (fpr[k] <= f + 1e-12) best = std::max(best, tpr[k]);
    }
    return best;
}

}  // namespace

std::vector<RocCurve> roc_ovr(const std::vector<std::vector<std::vector<double>>>& score_samples,
                              const std::vector<int>& true_labels,
                              const std::vector<double>& threshold_grid, int r) {
    const std::size_t n = score_samples.size();
    require(n == true_labels.size(), "roc_ovr: instance/label count mismatch");
    require(n >= 1, "roc_ovr: empty input");
    require(!threshold_grid.empty(), "roc_ovr: empty threshold grid");
    for (double t : threshold_grid)
        require(t >= 0.0 && t <= 1.0, "roc_ovr: thresholds must lie in [0, 1]");
    const std::size_t n_draws = score_samples[0].size();
    require(n_draws >= 1, "roc_ovr: need at least one MC draw per instance");
    for (const auto& inst : score_samples) {
        require(inst.size() == n_draws, "roc_ovr: inconsistent draw counts");
        for (const auto& draw : inst) {
            require(static_cast<int>(draw.size()) == r, "roc_ovr: score vector length != r");
            double sum = 0.0;
            for (double v : draw) sum += v;
            require(std::abs(sum - 1.0) <= 1e-4, "roc_ovr: scores must lie on the simplex");
        }
    }

    std::vector<double> grid = threshold_grid;
    std::sort(grid.begin(), grid.end());

    std::vector<RocCurve> curves(r);
    for (int cls = 0; cls < r; ++cls) {
        RocCurve& curve = curves[cls];
        std::size_t pos = 0;
        for (int label : true_labels) pos += (label == cls + 1);
        const std::size_t neg = n - pos;
        if (pos == 0 || neg == 0) {
            curve.defined = false;
            curve.auc = std::numeric_limits<double>::quiet_NaN();
            continue;
        }

        curve.fpr = grid;
        curve.tpr_mean.assign(grid.size(), 0.0);
        curve.tpr_std.assign(grid.size(), 0.0);
        std::vector<std::vector<double>> tpr_at(grid.size(), std::vector<double>(n_draws));

        std::vector<double> pos_scores(pos), neg_scores(neg);
        for (std::size_t j = 0; j < n_draws; ++j) {
            std::size_t ip = 0, ineg = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double s = score_samples[i][j][cls];
                if (true_labels[i] == cls + 1)
                    pos_scores[ip++] = s;
                else
                    neg_scores[ineg++] = s;
            }
            std::sort(pos_scores.begin(), pos_scores.end());
            std::sort(neg_scores.begin(), neg_scores.end());

            // Sweep thresholds descending: predict positive when score >= t.
            std::vector<double> sweep_fpr, sweep_tpr;
            sweep_fpr.reserve(grid.size());
            sweep_tpr.reserve(grid.size());
            for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
                const double t = *it;
                const auto tp = pos_scores.end() -
                                std::lower_bound(pos_scores.begin(), pos_scores.end(), t);
                const auto fp = neg_scores.end() -
                                std::lower_bound(neg_scores.begin(), neg_scores.end(), t);
                sweep_fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
                sweep_tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
            }
            for (std::size_t gi = 0; gi < grid.size(); ++gi)
                tpr_at[gi][j] = staircase_tpr(sweep_fpr, sweep_tpr, grid[gi]);
        }

        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            double mean = 0.0;
            for (double v : tpr_at[gi]) mean += v;
            mean /= static_cast<double>(n_draws);
            double var = 0.0;
            for (double v : tpr_at[gi]) var += (v - mean) * (v - mean);
            curve.tpr_mean[gi] = mean;
            curve.tpr_std[gi] =
                n_draws > 1 ? std::sqrt(var / static_cast<double>(n_draws - 1)) : 0.0;
        }

        // Trapezoid over the mean curve; the grid spans [0, 1].
        double auc = 0.0;
        for (std::size_t gi = 0; gi + 1 < grid.size(); ++gi)
            auc += (grid[gi + 1] - grid[gi]) *
                   (curve.tpr_mean[gi] + curve.tpr_mean[gi + 1]) / 2.0;
        curve.auc = auc;
    }
    return curves;
}

RocCurve macro_average(const std::vector<RocCurve>& curves) {
    RocCurve out;
    std::size_t defined = 0;
    for (const auto& c : curves) {
        if (!c.defined) continue;
        if (defined == 0) {
            out.fpr = c.fpr;
            out.tpr_mean.assign(c.tpr_mean.size(), 0.0);
            out.tpr_std.assign(c.tpr_std.size(), 0.0);
            out.auc = 0.0;
        }
        require(c.fpr == out.fpr, "macro_average: grids differ across classes");
        for (std::size_t i = 0; i < c.tpr_mean.size(); ++i) {
            out.tpr_mean[i] += c.tpr_mean[i];
            out.tpr_std[i] += c.tpr_std[i];
        }
        out.auc += c.auc;
        ++defined;
    }
    if (defined == 0) {
        out.defined = false;
        out.auc = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    for (auto& v : out.tpr_mean) v /= static_cast<double>(defined);
    for (auto& v : out.tpr_std) v /= static_cast<double>(defined);
    out.auc /= static_cast<double>(defined);
    return out;
}

}  // namespace azmi::eval
