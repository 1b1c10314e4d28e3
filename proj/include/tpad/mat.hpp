#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tpad/error.hpp"

namespace tpad {

using Rng = std::mt19937_64;

// Dense row-major matrix of doubles. Vectors are represented as R x 1 (or
// 1 x C) matrices so the autodiff layer only ever deals with two axes.
struct Mat {
    int64_t r = 0, c = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(int64_t rows, int64_t cols, double fill = 0.0) : r(rows), c(cols), d(static_cast<size_t>(rows * cols), fill) {}

    int64_t size() const { return r * c; }
    double& at(int64_t i, int64_t j) { return d[static_cast<size_t>(i * c + j)]; }
    double at(int64_t i, int64_t j) const { return d[static_cast<size_t>(i * c + j)]; }
    double& operator[](int64_t i) { return d[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return d[static_cast<size_t>(i)]; }

    bool same_shape(const Mat& o) const { return r == o.r && c == o.c; }

    bool all_finite() const {
        for (double v : d)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static Mat zeros(int64_t rows, int64_t cols) { return Mat(rows, cols, 0.0); }
    static Mat full(int64_t rows, int64_t cols, double v) { return Mat(rows, cols, v); }
    static Mat identity(int64_t n) {
        Mat m(n, n);
        for (int64_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
    static Mat uniform(int64_t rows, int64_t cols, double lo, double hi, Rng& rng) {
        Mat m(rows, cols);
        std::uniform_real_distribution<double> dist(lo, hi);
        for (auto& v : m.d) v = dist(rng);
        return m;
    }
    static Mat gaussian(int64_t rows, int64_t cols, double mean, double stddev, Rng& rng) {
        Mat m(rows, cols);
        std::normal_distribution<double> dist(mean, stddev);
        for (auto& v : m.d) v = dist(rng);
        return m;
    }
    // Fan-in scaled init used by every trainable layer.
    static Mat glorot(int64_t rows, int64_t cols, Rng& rng) {
        double s = 1.0 / std::sqrt(static_cast<double>(rows > 0 ? rows : 1));
        return uniform(rows, cols, -s, s, rng);
    }
};

// N pedestrians x t frames x k coordinates, row-major (ped, frame, coord).
struct TrajArray {
    int64_t n = 0, t = 0, k = 2;
    std::vector<double> d;

    TrajArray() = default;
    TrajArray(int64_t peds, int64_t frames, int64_t coords = 2)
        : n(peds), t(frames), k(coords), d(static_cast<size_t>(peds * frames * coords), 0.0) {}

    int64_t size() const { return n * t * k; }
    double& at(int64_t i, int64_t f, int64_t c) { return d[static_cast<size_t>((i * t + f) * k + c)]; }
    double at(int64_t i, int64_t f, int64_t c) const { return d[static_cast<size_t>((i * t + f) * k + c)]; }

    bool all_finite() const {
        for (double v : d)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // n x (t*k) matrix with frame-major columns: columns [f*k, f*k+k) hold frame f.
    Mat flat() const {
        Mat m(n, t * k);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t f = 0; f < t; ++f)
                for (int64_t c = 0; c < k; ++c) m.at(i, f * k + c) = at(i, f, c);
        return m;
    }

    // One n x k matrix per frame.
    std::vector<Mat> frames() const {
        std::vector<Mat> out(static_cast<size_t>(t));
        for (int64_t f = 0; f < t; ++f) {
            Mat m(n, k);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t c = 0; c < k; ++c) m.at(i, c) = at(i, f, c);
            out[static_cast<size_t>(f)] = std::move(m);
        }
        return out;
    }

    static TrajArray from_flat(const Mat& m, int64_t t, int64_t k) {
        TrajArray a(m.r, t, k);
        check_config(m.c == t * k, "from_flat: column count does not match t*k");
        for (int64_t i = 0; i < m.r; ++i)
            for (int64_t f = 0; f < t; ++f)
                for (int64_t c = 0; c < k; ++c) a.at(i, f, c) = m.at(i, f * k + c);
        return a;
    }

    // Positions of every pedestrian at one frame, n x k.
    Mat frame(int64_t f) const {
        Mat m(n, k);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t c = 0; c < k; ++c) m.at(i, c) = at(i, f, c);
        return m;
    }
};

} // namespace tpad
