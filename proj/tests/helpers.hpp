#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "tpad/autodiff.hpp"
#include "tpad/data.hpp"
#include "tpad/mat.hpp"

namespace tpad::test {

// Central finite-difference check of d(scalar_fn)/dx against the autodiff
// gradient. scalar_fn must build a 1x1 graph from the given leaf.
inline double grad_max_rel_error(const Mat& x0, const std::function<ad::Var(const ad::Var&)>& scalar_fn,
                                 double h = 1e-5) {
    ad::Var x = ad::leaf(x0, true);
    ad::Var y = scalar_fn(x);
    ad::backward(y);
    Mat analytic = x.has_grad() ? x.grad() : Mat::zeros(x0.r, x0.c);

    double worst = 0.0;
    for (int64_t i = 0; i < x0.size(); ++i) {
        Mat xp = x0, xm = x0;
        const double step = h * std::max(1.0, std::abs(x0[i]));
        xp[i] += step;
        xm[i] -= step;
        const double fp = scalar_fn(ad::leaf(xp, false)).val()[0];
        const double fm = scalar_fn(ad::leaf(xm, false)).val()[0];
        const double fd = (fp - fm) / (2.0 * step);
        const double err = std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
        worst = std::max(worst, err);
    }
    return worst;
}

// Finite-difference check over a parameter already embedded in a graph
// builder (re-runs the whole forward for each probe).
inline double param_grad_max_rel_error(const ad::Var& param, const std::function<double()>& value_fn,
                                       const Mat& analytic, double h = 1e-5, int64_t max_probes = -1) {
    Mat& w = param.node->val;
    double worst = 0.0;
    const int64_t probes = max_probes < 0 ? w.size() : std::min<int64_t>(max_probes, w.size());
    for (int64_t i = 0; i < probes; ++i) {
        const double orig = w[i];
        const double step = h * std::max(1.0, std::abs(orig));
        w[i] = orig + step;
        const double fp = value_fn();
        w[i] = orig - step;
        const double fm = value_fn();
        w[i] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double err = std::abs(analytic[i] - fd) / std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
        worst = std::max(worst, err);
    }
    return worst;
}

inline TrajArray random_traj(int64_t n, int64_t t, Rng& rng, double scale = 1.0) {
    TrajArray a(n, t, 2);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& v : a.d) v = dist(rng);
    return a;
}

// Smooth constant-velocity window: learnable mapping from future to history.
inline data::TrajectoryWindow smooth_window(int64_t n, Rng& rng, int64_t t_obs = 8, int64_t t_pred = 12) {
    data::TrajectoryWindow w;
    w.history = TrajArray(n, t_obs, 2);
    w.future = TrajArray(n, t_pred, 2);
    w.scene = "test";
    std::uniform_real_distribution<double> upos(-5.0, 5.0), uang(0.0, 2 * M_PI), uspd(0.3, 0.7);
    for (int64_t i = 0; i < n; ++i) {
        w.ped_ids.push_back(i + 1);
        double x = upos(rng), y = upos(rng), ang = uang(rng), spd = uspd(rng);
        double vx = spd * std::cos(ang), vy = spd * std::sin(ang);
        for (int64_t f = 0; f < t_obs; ++f) {
            w.history.at(i, f, 0) = x + vx * static_cast<double>(f);
            w.history.at(i, f, 1) = y + vy * static_cast<double>(f);
        }
        for (int64_t f = 0; f < t_pred; ++f) {
            w.future.at(i, f, 0) = x + vx * static_cast<double>(t_obs + f);
            w.future.at(i, f, 1) = y + vy * static_cast<double>(t_obs + f);
        }
    }
    return w;
}

inline std::vector<data::TrajectoryWindow> smooth_windows(int64_t count, int64_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<data::TrajectoryWindow> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) out.push_back(smooth_window(n, rng));
    return out;
}

} // namespace tpad::test
