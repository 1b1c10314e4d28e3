#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "tpad/error.hpp"
#include "tpad/losses.hpp"

using namespace tpad;
using namespace tpad::ad;
using namespace tpad::losses;

namespace {

// Direct-formula oracles, written against the definitions rather than the
// graph ops they are checking.

std::vector<double> oracle_row_norm(const Mat& a, const Mat& b) {
    std::vector<double> out(static_cast<size_t>(a.r));
    for (int64_t i = 0; i < a.r; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < a.c; ++j) {
            double d = a.at(i, j) - b.at(i, j);
            acc += d * d;
        }
        out[static_cast<size_t>(i)] = std::sqrt(acc);
    }
    return out;
}

Mat student_t_rows(const Mat& h, const Mat& centers) {
    Mat b(h.r, centers.r);
    for (int64_t i = 0; i < h.r; ++i) {
        double z = 0.0;
        for (int64_t c = 0; c < centers.r; ++c) {
            double d2 = 0.0;
            for (int64_t j = 0; j < h.c; ++j) {
                double d = h.at(i, j) - centers.at(c, j);
                d2 += d * d;
            }
            b.at(i, c) = 1.0 / (1.0 + d2);
            z += b.at(i, c);
        }
        for (int64_t c = 0; c < centers.r; ++c) b.at(i, c) /= z;
    }
    return b;
}

std::vector<double> oracle_cluster(const Mat& b) {
    const int64_t n = b.r, c = b.c;
    std::vector<double> freq(static_cast<size_t>(c), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) freq[static_cast<size_t>(j)] += b.at(i, j);
    Mat d(n, c);
    for (int64_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            d.at(i, j) = b.at(i, j) * b.at(i, j) / freq[static_cast<size_t>(j)];
            z += d.at(i, j);
        }
        for (int64_t j = 0; j < c; ++j) d.at(i, j) /= z;
    }
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j)
            if (b.at(i, j) > 0.0) out[static_cast<size_t>(i)] += b.at(i, j) * std::log(b.at(i, j) / d.at(i, j));
    return out;
}

Weights weights_with(std::array<double, 8> lambda, std::array<double, 8> gamma) {
    Weights w;
    w.lambda = lambda;
    w.gamma = gamma;
    return w;
}

} // namespace

TEST_CASE("loss_out: zero case, 3-4-5 triangle, random oracle, gradient") {
    Rng rng(1);
    Mat o = Mat::uniform(2, 16, -2, 2, rng);
    Var zero = loss_out(constant(o), constant(o));
    for (double v : zero.val().d) CHECK(v == 0.0);

    Mat a(1, 2), b(1, 2);
    a.at(0, 0) = 3.0;
    a.at(0, 1) = 4.0;
    CHECK(loss_out(constant(a), constant(b)).val()[0] == doctest::Approx(5.0).epsilon(1e-12));

    Mat p = Mat::uniform(2, 16, -2, 2, rng);
    auto got = loss_out(constant(o), constant(p)).val();
    auto want = oracle_row_norm(o, p);
    for (int64_t i = 0; i < 2; ++i) CHECK(std::abs(got[i] - want[static_cast<size_t>(i)]) < 1e-9);

    Mat wvec = Mat::uniform(2, 1, 0.1, 1.0, rng);
    auto fn = [&](const Var& x) { return sum_all(mul(loss_out(constant(o), x), constant(wvec))); };
    CHECK(test::grad_max_rel_error(p, fn) < 1e-4);
}

TEST_CASE("loss_adv: clamp boundaries and scalar evaluation, gradient") {
    Mat probs(3, 1);
    probs[0] = 1.0 - 1e-6;
    probs[1] = 1e-9; // clamped up to 1e-6
    probs[2] = 0.5;
    auto v = loss_adv(constant(probs)).val();
    CHECK(v[0] == doctest::Approx(-std::log(1.0 - 1e-6)).epsilon(1e-9));
    CHECK(v[1] == doctest::Approx(-std::log(1e-6)).epsilon(1e-9));
    CHECK(v[2] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Rng rng(2);
    Mat p0 = Mat::uniform(4, 1, 0.05, 0.95, rng);
    auto fn = [&](const Var& x) { return sum_all(loss_adv(x)); };
    CHECK(test::grad_max_rel_error(p0, fn) < 1e-4);
}

TEST_CASE("loss_fea: identity, unit offset, oracle, gradient") {
    Rng rng(3);
    Mat f = Mat::uniform(3, 5, -1, 1, rng);
    auto zero = loss_fea(constant(f), constant(f)).val();
    for (double v : zero.d) CHECK(v == 0.0);

    Mat g = f;
    g.at(1, 2) += 1.0;
    auto v = loss_fea(constant(f), constant(g)).val();
    CHECK(v[0] == 0.0);
    CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-12));

    Mat h = Mat::uniform(3, 5, -1, 1, rng);
    auto got = loss_fea(constant(f), constant(h)).val();
    auto want = oracle_row_norm(f, h);
    for (int64_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[static_cast<size_t>(i)]) < 1e-9);

    auto fn = [&](const Var& x) { return sum_all(loss_fea(constant(f), x)); };
    CHECK(test::grad_max_rel_error(h, fn) < 1e-4);
}

TEST_CASE("loss_memory: satisfied hinge, tie margin, brute-force sums, gradient") {
    Rng rng(4);

    SUBCASE("query on its nearest item with the second far away") {
        Mat q(1, 3);
        q.at(0, 0) = 1.0;
        Mat pp = q; // nearest equals the query
        Mat pn(1, 3);
        pn.at(0, 0) = -5.0; // distance 6 > margin
        auto ml = loss_memory(constant(q), constant(pp), constant(pn), {0}, 1);
        CHECK(ml.compact.val()[0] == 0.0);
        CHECK(ml.separate.val()[0] == 0.0);
    }

    SUBCASE("tied nearest and second-nearest give the margin per query") {
        Rng r5(5), r6(6);
        Mat q = Mat::uniform(3, 4, -1, 1, r5);
        Mat p = Mat::uniform(3, 4, -1, 1, r6);
        auto ml = loss_memory(constant(q), constant(p), constant(p), {0, 0, 1}, 2);
        CHECK(ml.separate.val()[0] == doctest::Approx(2.0).epsilon(1e-12)); // two queries in group 0
        CHECK(ml.separate.val()[1] == doctest::Approx(1.0).epsilon(1e-12));
        // Raw form: the difference is exactly zero at a tie.
        auto raw = loss_memory(constant(q), constant(p), constant(p), {0, 0, 1}, 2, 1.0, true);
        CHECK(raw.separate.val()[0] == 0.0);
    }

    SUBCASE("random instance matches the brute-force evaluation") {
        Mat q = Mat::uniform(6, 4, -1, 1, rng);
        Mat pp = Mat::uniform(6, 4, -1, 1, rng);
        Mat pn = Mat::uniform(6, 4, -1, 1, rng);
        std::vector<int64_t> groups = {0, 1, 0, 2, 1, 2};
        auto ml = loss_memory(constant(q), constant(pp), constant(pn), groups, 3);
        std::vector<double> com(3, 0.0), sep(3, 0.0);
        for (int64_t r = 0; r < 6; ++r) {
            double d2p = 0.0, d2n = 0.0;
            for (int64_t j = 0; j < 4; ++j) {
                d2p += (q.at(r, j) - pp.at(r, j)) * (q.at(r, j) - pp.at(r, j));
                d2n += (q.at(r, j) - pn.at(r, j)) * (q.at(r, j) - pn.at(r, j));
            }
            com[static_cast<size_t>(groups[static_cast<size_t>(r)])] += d2p;
            sep[static_cast<size_t>(groups[static_cast<size_t>(r)])] +=
                std::max(0.0, std::sqrt(d2p) - std::sqrt(d2n) + 1.0);
        }
        for (int64_t g = 0; g < 3; ++g) {
            CHECK(std::abs(ml.compact.val()[g] - com[static_cast<size_t>(g)]) < 1e-9);
            CHECK(std::abs(ml.separate.val()[g] - sep[static_cast<size_t>(g)]) < 1e-9);
        }

        Mat wv = Mat::uniform(3, 1, 0.2, 1.0, rng);
        auto fn_com = [&](const Var& x) {
            return sum_all(mul(loss_memory(x, constant(pp), constant(pn), groups, 3).compact, constant(wv)));
        };
        auto fn_sep = [&](const Var& x) {
            return sum_all(mul(loss_memory(x, constant(pp), constant(pn), groups, 3).separate, constant(wv)));
        };
        CHECK(test::grad_max_rel_error(q, fn_com) < 1e-4);
        CHECK(test::grad_max_rel_error(q, fn_sep) < 1e-4);
    }
}

TEST_CASE("loss_cluster: fixed points, oracle, gradient") {
    SUBCASE("b equal to its own target is zero") {
        // Uniform rows are a fixed point of the sharpening map.
        Mat b = Mat::full(4, 2, 0.5);
        auto v = loss_cluster(constant(b)).val();
        for (double x : v.d) CHECK(std::abs(x) < 1e-12);
    }

    SUBCASE("random instance matches the direct formula") {
        Rng rng(7);
        Mat centers = Mat::uniform(4, 5, -1, 1, rng);
        Mat h = Mat::uniform(3, 5, -1, 1, rng);
        Mat b = student_t_rows(h, centers);
        auto got = loss_cluster(constant(b)).val();
        auto want = oracle_cluster(b);
        for (int64_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[static_cast<size_t>(i)]) < 1e-9);
    }

    SUBCASE("gradient through assignments and the sharpened target") {
        Rng rng(8);
        Mat centers = Mat::uniform(3, 4, -1, 1, rng);
        Mat h0 = Mat::uniform(4, 4, -1, 1, rng);
        Mat wv = Mat::uniform(4, 1, 0.2, 1.0, rng);
        // Differentiate through the full pipeline h -> b -> loss.
        auto fn = [&](const Var& x) {
            return sum_all(mul(loss_cluster(blocks::cluster_assign(x, constant(centers))), constant(wv)));
        };
        CHECK(test::grad_max_rel_error(h0, fn) < 1e-4);
    }
}

TEST_CASE("loss_rsr: exact recovery, annihilation constant, oracle, gradient") {
    Rng rng(9);

    SUBCASE("orthonormal rows and in-span inputs give zero") {
        Mat a = Mat::zeros(2, 5);
        a.at(0, 0) = 1.0;
        a.at(1, 3) = 1.0;
        Mat h = Mat::zeros(3, 5);
        h.at(0, 0) = 2.0;
        h.at(1, 3) = -1.0;
        h.at(2, 0) = 0.5;
        h.at(2, 3) = 0.5;
        auto rl = loss_rsr(constant(h), constant(a));
        for (double v : rl.per_row.val().d) CHECK(std::abs(v) < 1e-12);
        for (double v : rl.structural.val().d) CHECK(std::abs(v) < 1e-12);
    }

    SUBCASE("zero matrix gives the d-dimensional identity norm") {
        auto rl = loss_rsr(constant(Mat::uniform(3, 5, -1, 1, rng)), constant(Mat::zeros(2, 5)));
        for (double v : rl.structural.val().d) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
    }

    SUBCASE("random 4x6 instance matches the direct matrix oracle") {
        Mat a = Mat::uniform(3, 6, -1, 1, rng);
        Mat h = Mat::uniform(4, 6, -1, 1, rng);
        auto rl = loss_rsr(constant(h), constant(a));
        for (int64_t i = 0; i < 4; ++i) {
            double res = 0.0;
            for (int64_t j = 0; j < 6; ++j) {
                double recon = 0.0;
                for (int64_t d = 0; d < 3; ++d) {
                    double proj = 0.0;
                    for (int64_t k = 0; k < 6; ++k) proj += h.at(i, k) * a.at(d, k);
                    recon += proj * a.at(d, j);
                }
                res += (h.at(i, j) - recon) * (h.at(i, j) - recon);
            }
            CHECK(std::abs(rl.per_row.val()[i] - res) < 1e-9);
        }
        double frob = 0.0;
        for (int64_t d1 = 0; d1 < 3; ++d1)
            for (int64_t d2 = 0; d2 < 3; ++d2) {
                double g = 0.0;
                for (int64_t k = 0; k < 6; ++k) g += a.at(d1, k) * a.at(d2, k);
                g -= (d1 == d2) ? 1.0 : 0.0;
                frob += g * g;
            }
        CHECK(std::abs(rl.structural.val()[0] - frob) < 1e-9);

        Mat wv = Mat::uniform(4, 1, 0.2, 1.0, rng);
        auto fn_h = [&](const Var& x) { return sum_all(mul(loss_rsr(x, constant(a)).per_row, constant(wv))); };
        CHECK(test::grad_max_rel_error(h, fn_h) < 1e-4);
        auto fn_a = [&](const Var& x) {
            auto rl2 = loss_rsr(constant(h), x);
            return add(sum_all(mul(rl2.per_row, constant(wv))), sum_all(rl2.structural));
        };
        CHECK(test::grad_max_rel_error(a, fn_a) < 1e-4);
    }
}

TEST_CASE("training_loss: single term, linearity, dot-product oracle") {
    Rng rng(10);
    LossVector lf;
    lf.components = Mat::uniform(8, 5, 0.0, 2.0, rng);

    auto w = weights_with({1, 0, 0, 0, 0, 0, 0, 0}, {});
    double mean_out = 0.0;
    for (int64_t p = 0; p < 5; ++p) mean_out += lf.components.at(0, p);
    mean_out /= 5.0;
    CHECK(training_loss(lf, w) == doctest::Approx(mean_out).epsilon(1e-12));

    auto w2 = weights_with({0.1, 0.01, 1, 0.1, 0.01, 1, 0.1, 0.01}, {});
    LossVector doubled;
    doubled.components = lf.components;
    for (auto& v : doubled.components.d) v *= 2.0;
    CHECK(training_loss(doubled, w2) == doctest::Approx(2.0 * training_loss(lf, w2)).epsilon(1e-12));

    double oracle = 0.0;
    for (int64_t p = 0; p < 5; ++p)
        for (int j = 0; j < 8; ++j) oracle += w2.lambda[static_cast<size_t>(j)] * lf.components.at(j, p);
    oracle /= 5.0;
    CHECK(std::abs(training_loss(lf, w2) - oracle) < 1e-9);

    auto bad = weights_with({0.5, 0, 0, 0, 0, 0, 0, 0}, {});
    CHECK_THROWS_AS(training_loss(lf, bad), Error);
}

TEST_CASE("anomaly_score: gates, permutation, monotonicity, rejection") {
    Rng rng(11);
    LossVector lf;
    lf.components = Mat::uniform(8, 4, 0.0, 2.0, rng);

    auto w = weights_with({0.1, 0, 0, 0, 0, 0, 0, 0}, {0.1, 0, 0, 0, 0, 0, 0, 0});
    auto s = anomaly_score(lf, w);
    for (int64_t p = 0; p < 4; ++p)
        CHECK(s[static_cast<size_t>(p)] == doctest::Approx(0.1 * lf.components.at(0, p)).epsilon(1e-12));

    // Gamma = Lambda: the score matches the full dot product per pedestrian.
    auto w2 = weights_with({1, 0.1, 0.01, 1, 0.1, 0.01, 1, 0.1}, {1, 0.1, 0.01, 1, 0.1, 0.01, 1, 0.1});
    auto s2 = anomaly_score(lf, w2);
    double col_sum = 0.0;
    for (int64_t p = 0; p < 4; ++p) col_sum += s2[static_cast<size_t>(p)];
    CHECK(col_sum == doctest::Approx(4.0 * training_loss(lf, w2)).epsilon(1e-9));

    // Permuting pedestrians permutes the scores.
    LossVector perm;
    perm.components = Mat(8, 4);
    const int64_t p_order[4] = {2, 0, 3, 1};
    for (int j = 0; j < 8; ++j)
        for (int64_t p = 0; p < 4; ++p) perm.components.at(j, p) = lf.components.at(j, p_order[p]);
    auto sp = anomaly_score(perm, w2);
    for (int64_t p = 0; p < 4; ++p)
        CHECK(sp[static_cast<size_t>(p)] == doctest::Approx(s2[static_cast<size_t>(p_order[p])]).epsilon(1e-12));

    // Monotone in each gated component.
    LossVector bumped;
    bumped.components = lf.components;
    bumped.components.at(3, 2) += 0.7;
    auto sb = anomaly_score(bumped, w2);
    CHECK(sb[2] > s2[2]);
    CHECK(sb[0] == s2[0]);

    auto all_zero = weights_with({1, 0, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0, 0});
    CHECK_THROWS_AS(anomaly_score(lf, all_zero), Error);
}

TEST_CASE("weights: validation rules") {
    CHECK_THROWS_AS(weights_with({0, 0, 0, 0, 0, 0, 0, 0}, {}).validate(), Error);        // lambda1 cannot be 0
    CHECK_THROWS_AS(weights_with({1, 0.5, 0, 0, 0, 0, 0, 0}, {}).validate(), Error);      // 0.5 not an option
    CHECK_THROWS_AS(weights_with({1, 0.1, 0, 0, 0, 0, 0, 0}, {1, 0.2, 0, 0, 0, 0, 0, 0}).validate(),
                    Error); // gamma must equal lambda
    weights_with({1, 0.1, 0, 0, 0, 0, 0, 0}, {1, 0.1, 0, 0, 0, 0, 0, 0}).validate();
    weights_with({0.01, 0, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0, 0}).validate();
}

TEST_CASE("nonnegative components stay nonnegative on random instances") {
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        const int64_t n = 1 + static_cast<int64_t>(rng() % 4);
        Mat o = Mat::uniform(n, 16, -2, 2, rng);
        Mat p = Mat::uniform(n, 16, -2, 2, rng);
        Var v_out = loss_out(constant(o), constant(p));
        for (double v : v_out.val().d) CHECK(v >= 0.0);

        Mat f1 = Mat::uniform(n, 4, -2, 2, rng), f2 = Mat::uniform(n, 4, -2, 2, rng);
        Var v_fea = loss_fea(constant(f1), constant(f2));
        for (double v : v_fea.val().d) CHECK(v >= 0.0);

        Mat centers = Mat::uniform(3, 4, -1, 1, rng);
        Mat b = student_t_rows(Mat::uniform(n, 4, -1, 1, rng), centers);
        Var v_clu = loss_cluster(constant(b));
        for (double v : v_clu.val().d) CHECK(v >= -1e-12);

        Mat a = Mat::uniform(2, 4, -1, 1, rng);
        auto rl = loss_rsr(constant(f1), constant(a));
        for (double v : rl.per_row.val().d) CHECK(v >= 0.0);
        for (double v : rl.structural.val().d) CHECK(v >= 0.0);

        Mat q = Mat::uniform(n, 4, -1, 1, rng);
        Mat pp = Mat::uniform(n, 4, -1, 1, rng);
        Mat pn = Mat::uniform(n, 4, -1, 1, rng);
        std::vector<int64_t> groups(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) groups[static_cast<size_t>(i)] = i;
        auto ml = loss_memory(constant(q), constant(pp), constant(pn), groups, n);
        for (double v : ml.compact.val().d) CHECK(v >= 0.0);
        for (double v : ml.separate.val().d) CHECK(v >= 0.0);
    }
}
