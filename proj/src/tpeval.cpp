#include "tpad/tpeval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tpad/error.hpp"

namespace tpad::tpeval {

double auc(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores) {
    check_config(!pos_scores.empty() && !neg_scores.empty(), "auc needs non-empty score lists");

    // Sweep thresholds from high to low; negatives (anomalies) above a
    // threshold are true detections, positives above it false alarms. Tied
    // scores move both rates at once, which the trapezoid credits as half.
    struct Entry {
        double score;
        int64_t pos_count = 0, neg_count = 0;
    };
    std::map<double, Entry, std::greater<double>> groups;
    for (double s : pos_scores) {
        check_config(std::isfinite(s), "auc: non-finite score");
        auto& e = groups[s];
        e.score = s;
        ++e.pos_count;
    }
    for (double s : neg_scores) {
        check_config(std::isfinite(s), "auc: non-finite score");
        auto& e = groups[s];
        e.score = s;
        ++e.neg_count;
    }

    const double np = static_cast<double>(pos_scores.size());
    const double nn = static_cast<double>(neg_scores.size());
    double tpr = 0.0, fpr = 0.0, area = 0.0;
    for (const auto& [score, e] : groups) {
        const double tpr_next = tpr + static_cast<double>(e.neg_count) / nn;
        const double fpr_next = fpr + static_cast<double>(e.pos_count) / np;
        area += (fpr_next - fpr) * 0.5 * (tpr + tpr_next);
        tpr = tpr_next;
        fpr = fpr_next;
    }
    return area;
}

std::vector<double> ade(const TrajArray& pred, const TrajArray& gt) {
    check_config(pred.n == gt.n && pred.t == gt.t && pred.k == gt.k, "ade shape mismatch");
    std::vector<double> out(static_cast<size_t>(pred.n), 0.0);
    for (int64_t i = 0; i < pred.n; ++i) {
        double acc = 0.0;
        for (int64_t f = 0; f < pred.t; ++f) {
            double dx = pred.at(i, f, 0) - gt.at(i, f, 0);
            double dy = pred.at(i, f, 1) - gt.at(i, f, 1);
            acc += std::sqrt(dx * dx + dy * dy);
        }
        out[static_cast<size_t>(i)] = acc / static_cast<double>(pred.t);
    }
    return out;
}

std::vector<double> fde(const TrajArray& pred, const TrajArray& gt) {
    check_config(pred.n == gt.n && pred.t == gt.t && pred.k == gt.k, "fde shape mismatch");
    std::vector<double> out(static_cast<size_t>(pred.n), 0.0);
    const int64_t last = pred.t - 1;
    for (int64_t i = 0; i < pred.n; ++i) {
        double dx = pred.at(i, last, 0) - gt.at(i, last, 0);
        double dy = pred.at(i, last, 1) - gt.at(i, last, 1);
        out[static_cast<size_t>(i)] = std::sqrt(dx * dx + dy * dy);
    }
    return out;
}

Mat score_matrix(const model::TADModel& m, const SampleSet& samples, const TrajArray& history) {
    check_config(samples.psi() >= 1, "score_matrix needs at least one sample");
    const int64_t n = samples.n();
    Mat scores(n, samples.psi());
#pragma omp parallel for schedule(dynamic)
    for (int64_t j = 0; j < samples.psi(); ++j) {
        auto col = m.score(samples.samples[static_cast<size_t>(j)], history);
        for (int64_t i = 0; i < n; ++i) scores.at(i, j) = col[static_cast<size_t>(i)];
    }
    return scores;
}

Selection topk_filter(const Mat& scores, int64_t psi) {
    check_config(psi >= 1 && psi <= scores.c,
                 "selection count must lie in [1, sample count]; got " + std::to_string(psi) + " of " +
                     std::to_string(scores.c));
    Selection sel;
    sel.indices.resize(static_cast<size_t>(scores.r));
    std::vector<int64_t> order(static_cast<size_t>(scores.c));
    for (int64_t i = 0; i < scores.r; ++i) {
        for (int64_t j = 0; j < scores.c; ++j) order[static_cast<size_t>(j)] = j;
        std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
            if (scores.at(i, a) != scores.at(i, b)) return scores.at(i, a) < scores.at(i, b);
            return a < b;
        });
        sel.indices[static_cast<size_t>(i)].assign(order.begin(), order.begin() + psi);
    }
    return sel;
}

Selection full_selection(int64_t n, int64_t psi) {
    Selection sel;
    sel.indices.assign(static_cast<size_t>(n), {});
    for (auto& row : sel.indices) {
        row.resize(static_cast<size_t>(psi));
        for (int64_t j = 0; j < psi; ++j) row[static_cast<size_t>(j)] = j;
    }
    return sel;
}

namespace {

MetricReport aggregate_metric(const std::vector<std::vector<double>>& per_sample_per_ped, const Selection& sel,
                              bool is_ade, MetricReport report) {
    const int64_t psi_total = static_cast<int64_t>(per_sample_per_ped.size());
    const int64_t n = static_cast<int64_t>(per_sample_per_ped[0].size());

    double best_sum = 0.0, avg_sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        double mean = 0.0;
        for (int64_t j : sel.indices[static_cast<size_t>(i)]) {
            const double v = per_sample_per_ped[static_cast<size_t>(j)][static_cast<size_t>(i)];
            best = std::min(best, v);
            mean += v;
        }
        mean /= static_cast<double>(sel.indices[static_cast<size_t>(i)].size());
        best_sum += best;
        avg_sum += mean;
    }

    // Whole-sample worst over pedestrians that kept the sample.
    double worst = 0.0;
    for (int64_t j = 0; j < psi_total; ++j) {
        double acc = 0.0;
        int64_t count = 0;
        for (int64_t i = 0; i < n; ++i) {
            const auto& row = sel.indices[static_cast<size_t>(i)];
            if (std::find(row.begin(), row.end(), j) == row.end()) continue;
            acc += per_sample_per_ped[static_cast<size_t>(j)][static_cast<size_t>(i)];
            ++count;
        }
        if (count > 0) worst = std::max(worst, acc / static_cast<double>(count));
    }

    if (is_ade) {
        report.best_ade = best_sum / static_cast<double>(n);
        report.average_ade = avg_sum / static_cast<double>(n);
        report.worst_ade = worst;
    } else {
        report.best_fde = best_sum / static_cast<double>(n);
        report.average_fde = avg_sum / static_cast<double>(n);
        report.worst_fde = worst;
    }
    return report;
}

} // namespace

MetricReport aggregate(const SampleSet& samples, const TrajArray& gt, const Selection& sel) {
    check_config(samples.psi() >= 1, "aggregate needs samples");
    check_config(sel.n() == gt.n, "selection covers a different pedestrian count");
    for (const auto& row : sel.indices) {
        check_config(!row.empty(), "empty selection row");
        for (int64_t j : row) check_config(j >= 0 && j < samples.psi(), "selection index out of range");
    }

    std::vector<std::vector<double>> ade_js(static_cast<size_t>(samples.psi()));
    std::vector<std::vector<double>> fde_js(static_cast<size_t>(samples.psi()));
    for (int64_t j = 0; j < samples.psi(); ++j) {
        ade_js[static_cast<size_t>(j)] = ade(samples.samples[static_cast<size_t>(j)], gt);
        fde_js[static_cast<size_t>(j)] = fde(samples.samples[static_cast<size_t>(j)], gt);
    }

    MetricReport report;
    report = aggregate_metric(ade_js, sel, true, report);
    report = aggregate_metric(fde_js, sel, false, report);
    return report;
}

} // namespace tpad::tpeval
