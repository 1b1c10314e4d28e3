#pragma once

#include <string>
#include <vector>

#include "tpad/mat.hpp"
#include "tpad/model.hpp"

namespace tpad::tpeval {

// Area under the ROC curve with "higher score = anomalous" orientation:
// the probability that a positive (normal) sample scores below a negative
// one, ties counted half. Computed by a trapezoidal sweep over thresholds.
double auc(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores);

// Per-pedestrian displacement errors.
std::vector<double> ade(const TrajArray& pred, const TrajArray& gt);
std::vector<double> fde(const TrajArray& pred, const TrajArray& gt);

struct SampleSet {
    std::vector<TrajArray> samples; // Psi entries, each N x t_pred x 2
    std::string source;

    int64_t psi() const { return static_cast<int64_t>(samples.size()); }
    int64_t n() const { return samples.empty() ? 0 : samples[0].n; }
};

// N x Psi matrix; column j holds score(model, samples[j], X).
Mat score_matrix(const model::TADModel& m, const SampleSet& samples, const TrajArray& history);

struct Selection {
    std::vector<std::vector<int64_t>> indices; // per pedestrian, ascending score order

    int64_t n() const { return static_cast<int64_t>(indices.size()); }
    int64_t k() const { return indices.empty() ? 0 : static_cast<int64_t>(indices[0].size()); }
};

// Per pedestrian, the psi lowest-score sample indices; ties break toward the
// lower sample index.
Selection topk_filter(const Mat& scores, int64_t psi);
Selection full_selection(int64_t n, int64_t psi);

struct MetricReport {
    double best_ade = 0.0, average_ade = 0.0, worst_ade = 0.0;
    double best_fde = 0.0, average_fde = 0.0, worst_fde = 0.0;
};

// Best: per-pedestrian minimum over its selected samples, averaged over
// pedestrians (assembled reading). Average: per-pedestrian mean over selected
// samples, averaged. Worst: max over samples of the per-sample mean metric,
// restricted to pedestrians that selected the sample (whole-sample reading).
MetricReport aggregate(const SampleSet& samples, const TrajArray& gt, const Selection& sel);

} // namespace tpad::tpeval
