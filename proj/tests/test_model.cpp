#include <doctest.h>

#include <filesystem>
#include <set>

#include "helpers.hpp"
#include "tpad/error.hpp"
#include "tpad/model.hpp"
#include "tpad/serialize.hpp"

using namespace tpad;
using namespace tpad::model;

namespace {

OperatorSequence seq_out_only() {
    OperatorSequence seq{}; // all-first-option architecture, lambda1 = 0.1
    seq.choices[15] = 1;    // gamma1 = lambda1
    return seq;
}

ModelConfig small_config(int64_t hidden = 8) {
    ModelConfig cfg;
    cfg.hidden = hidden;
    return cfg;
}

OperatorSequence random_valid_sequence(Rng& rng) {
    OperatorSequence seq;
    for (int s = 0; s < kNumSlots; ++s)
        seq.choices[static_cast<size_t>(s)] = static_cast<int>(rng() % static_cast<uint64_t>(kSlotOptions[static_cast<size_t>(s)]));
    return seq;
}

// Applies the decode-time coercion to a raw sequence: a gamma slot choosing
// "use lambda" drops to 0 when its lambda is 0.
OperatorSequence coerced(const OperatorSequence& seq) {
    OperatorSequence out = seq;
    for (int i = 0; i < 8; ++i) {
        const int ls = kLambdaSlotBase + i;
        if (lambda_option_value(ls, seq.choices[static_cast<size_t>(ls)]) == 0.0)
            out.choices[static_cast<size_t>(kGammaSlotBase + i)] = 0;
    }
    return out;
}

} // namespace

TEST_CASE("search space cardinality") {
    int64_t arch = 1;
    for (int s = 0; s < kArchSlots; ++s) arch *= kSlotOptions[static_cast<size_t>(s)];
    CHECK(arch == 9600);
    int64_t lambdas = 1;
    for (int s = kLambdaSlotBase; s < kGammaSlotBase; ++s) lambdas *= kSlotOptions[static_cast<size_t>(s)];
    CHECK(lambdas == 49152);
    CHECK(kNumSlots == 23);
}

TEST_CASE("decode: coercion rule and slot validation") {
    OperatorSequence seq = seq_out_only();
    seq.choices[8] = 0;  // lambda2 = 0
    seq.choices[16] = 1; // gamma2 wants "use lambda"
    auto spec = decode(seq);
    CHECK(spec.weights.gamma[1] == 0.0);
    CHECK(spec.weights.lambda[0] == 0.1);
    CHECK(spec.weights.gamma[0] == 0.1);

    OperatorSequence bad = seq_out_only();
    bad.choices[4] = 7;
    CHECK_THROWS_WITH_AS(decode(bad), doctest::Contains("slot 5"), Error);
    bad = seq_out_only();
    bad.choices[22] = 2;
    CHECK_THROWS_WITH_AS(decode(bad), doctest::Contains("slot 23"), Error);
}

TEST_CASE("decode/encode: bijection modulo gamma coercion over random sequences") {
    Rng rng(3);
    for (int trial = 0; trial < 10000; ++trial) {
        auto seq = random_valid_sequence(rng);
        auto round = encode(decode(seq));
        CHECK(round == coerced(seq));
    }
    // Canonical elements round-trip exactly.
    OperatorSequence first{};
    CHECK(encode(decode(first)) == first);
    auto out_only = seq_out_only();
    CHECK(encode(decode(out_only)) == out_only);
    // Minimal lambdas with all-zero gates.
    OperatorSequence minimal{};
    minimal.choices[7] = 1; // lambda1 = 0.01
    CHECK(encode(decode(minimal)) == minimal);
}

TEST_CASE("decode: auxiliary flags match the weight-derived flags for all 49152 settings") {
    OperatorSequence seq{};
    seq.choices[15] = 1;
    int64_t checked = 0;
    for (int l1 = 0; l1 < 3; ++l1) {
        std::array<int, 7> idx{};
        while (true) {
            seq.choices[7] = l1;
            for (int i = 0; i < 7; ++i) seq.choices[static_cast<size_t>(8 + i)] = idx[static_cast<size_t>(i)];
            auto spec = decode(seq);
            auto expect = losses::aux_flags(spec.weights.lambda);
            CHECK(spec.aux == expect);
            // Spot-check the derivation itself.
            CHECK(expect.discriminator == (spec.weights.lambda[1] != 0.0 || spec.weights.lambda[2] != 0.0));
            CHECK(expect.memory == (spec.weights.lambda[3] != 0.0 || spec.weights.lambda[4] != 0.0));
            CHECK(expect.clustering == (spec.weights.lambda[5] != 0.0));
            CHECK(expect.rsr == (spec.weights.lambda[6] != 0.0 || spec.weights.lambda[7] != 0.0));
            ++checked;
            int carry = 6;
            while (carry >= 0 && ++idx[static_cast<size_t>(carry)] == 4) {
                idx[static_cast<size_t>(carry)] = 0;
                --carry;
            }
            if (carry < 0) break;
        }
    }
    CHECK(checked == 49152);
}

TEST_CASE("build: auxiliaries are instantiated exactly when flagged") {
    auto base = decode(seq_out_only());
    TADModel m0(base, small_config(), 1);
    std::set<std::string> names;
    for (const auto& [n, v] : m0.params().items()) names.insert(n);
    CHECK(names.count("aux.memory.items") == 0);
    CHECK(names.count("aux.cluster.centers") == 0);
    CHECK(names.count("aux.rsr.a") == 0);
    CHECK(m0.disc_params().items().empty());

    OperatorSequence with_mem = seq_out_only();
    with_mem.choices[10] = 1; // lambda4 = 0.1 -> memory bank
    TADModel m1(decode(with_mem), small_config(), 1);
    const auto* items = m1.params().find("aux.memory.items");
    REQUIRE(items != nullptr);
    CHECK(items->rows() == 10); // default bank size
    CHECK(items->cols() == 8);

    OperatorSequence with_all = seq_out_only();
    with_all.choices[8] = 1;  // adv
    with_all.choices[11] = 1; // sep
    with_all.choices[12] = 3; // clu = 1
    with_all.choices[13] = 2; // rsr1 = 0.01
    TADModel m2(decode(with_all), small_config(), 1);
    CHECK(m2.params().find("aux.memory.items") != nullptr);
    CHECK(m2.params().find("aux.cluster.centers") != nullptr);
    CHECK(m2.params().find("aux.rsr.a") != nullptr);
    CHECK(!m2.disc_params().items().empty());
}

TEST_CASE("build: identical seeds give identical initial forward outputs") {
    Rng rng(9);
    auto w = test::smooth_window(3, rng);
    auto spec = decode(seq_out_only());
    TADModel a(spec, small_config(), 42), b(spec, small_config(), 42), c(spec, small_config(), 43);
    auto sa = a.score(w.future, w.history);
    auto sb = b.score(w.future, w.history);
    auto sc = c.score(w.future, w.history);
    CHECK(sa == sb);
    CHECK(sa != sc);
}

TEST_CASE("forward: output shape, equivariance, determinism") {
    Rng rng(11);
    auto spec = decode(seq_out_only());
    TADModel m(spec, small_config(), 7);

    for (int64_t n : {1, 2, 5}) {
        auto w = test::smooth_window(n, rng);
        auto fwd = m.forward(w.future, w.history);
        CHECK(fwd.opred_flat.rows() == n);
        CHECK(fwd.opred_flat.cols() == 16);
        CHECK(fwd.opred_flat.val().all_finite());
    }

    auto w = test::smooth_window(4, rng);
    auto fwd1 = m.forward(w.future, w.history);
    auto fwd2 = m.forward(w.future, w.history);
    CHECK(fwd1.opred_flat.val().d == fwd2.opred_flat.val().d); // bit-identical repeat

    const std::vector<int64_t> perm = {2, 0, 3, 1};
    data::TrajectoryWindow wp = w;
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t f = 0; f < 12; ++f)
            for (int64_t c = 0; c < 2; ++c) wp.future.at(i, f, c) = w.future.at(perm[static_cast<size_t>(i)], f, c);
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t f = 0; f < 8; ++f)
            for (int64_t c = 0; c < 2; ++c) wp.history.at(i, f, c) = w.history.at(perm[static_cast<size_t>(i)], f, c);
    auto fwdp = m.forward(wp.future, wp.history);
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 16; ++j)
            CHECK(fwdp.opred_flat.val().at(i, j) ==
                  doctest::Approx(fwd1.opred_flat.val().at(perm[static_cast<size_t>(i)], j)).epsilon(1e-9));
}

TEST_CASE("shape contract: every architecture combination emits N x 8 x 2") {
    Rng rng(13);
    int64_t combo = 0;
    const int64_t n_options[] = {1, 2, 5};
    for (int ipm = 0; ipm < 3; ++ipm)
        for (int fx1 = 0; fx1 < 5; ++fx1)
            for (int fx2 = 0; fx2 < 5; ++fx2)
                for (int fe1 = 0; fe1 < 4; ++fe1)
                    for (int fe2 = 0; fe2 < 4; ++fe2)
                        for (int ffm = 0; ffm < 2; ++ffm)
                            for (int om = 0; om < 4; ++om) {
                                OperatorSequence seq = seq_out_only();
                                seq.choices[0] = ipm;
                                seq.choices[1] = fx1;
                                seq.choices[2] = fx2;
                                seq.choices[3] = fe1;
                                seq.choices[4] = fe2;
                                seq.choices[5] = ffm;
                                seq.choices[6] = om;
                                const int64_t n = n_options[combo % 3];
                                TADModel m(decode(seq), small_config(4), 1000 + static_cast<uint64_t>(combo));
                                auto w = test::smooth_window(n, rng);
                                auto fwd = m.forward(w.future, w.history);
                                REQUIRE(fwd.opred_flat.rows() == n);
                                REQUIRE(fwd.opred_flat.cols() == 16);
                                REQUIRE(fwd.opred_flat.val().all_finite());
                                ++combo;
                            }
    CHECK(combo == 9600);
}

TEST_CASE("train: descent on a learnable task, determinism, no-op epochs") {
    auto windows = test::smooth_windows(10, 2, 21);
    auto spec = decode(seq_out_only());

    SUBCASE("50 epochs reduce the output error") {
        TADModel m(spec, small_config(16), 5);
        m.train(windows, 50);
        const auto& hist = m.train_stats().epoch_mean_loss;
        REQUIRE(hist.size() == 50);
        CHECK(hist.back() < hist.front());
        // Non-increasing within 5% epoch-to-epoch jitter.
        for (size_t e = 1; e < hist.size(); ++e) CHECK(hist[e] <= hist[e - 1] * 1.05);
    }

    SUBCASE("zero epochs do not touch parameters") {
        TADModel m(spec, small_config(16), 5);
        auto before = m.params().items();
        std::vector<Mat> snapshot;
        for (const auto& [n, v] : before) snapshot.push_back(v.val());
        m.train(windows, 0);
        for (size_t i = 0; i < before.size(); ++i) CHECK(before[i].second.val().d == snapshot[i].d);
    }

    SUBCASE("identical seeds give identical loss histories") {
        TADModel a(spec, small_config(16), 5), b(spec, small_config(16), 5);
        a.train(windows, 5);
        b.train(windows, 5);
        CHECK(a.train_stats().epoch_mean_loss == b.train_stats().epoch_mean_loss);
    }
}

TEST_CASE("train: parameter census is stable and auxiliaries stay untouched") {
    auto windows = test::smooth_windows(6, 2, 23);
    OperatorSequence seq = seq_out_only();
    seq.choices[10] = 1; // memory active
    auto spec = decode(seq);
    TADModel m(spec, small_config(8), 3);

    auto names_before = m.params().names();
    m.train(windows, 2);
    CHECK(m.params().names() == names_before);

    // With only L_out weighted, memory items receive no gradient: they are
    // instantiated (lambda4 != 0 flags them) but fully inactive only when the
    // weights say so. Here lambda4 = 0.1, so they do move; check instead that
    // a model without the auxiliary never grows one.
    auto spec0 = decode(seq_out_only());
    TADModel m0(spec0, small_config(8), 3);
    auto names0 = m0.params().names();
    m0.train(windows, 2);
    CHECK(m0.params().names() == names0);
    CHECK(m0.params().find("aux.memory.items") == nullptr);
}

TEST_CASE("loss_vector: gated rows are exactly zero") {
    Rng rng(29);
    auto w = test::smooth_window(3, rng);
    OperatorSequence seq = seq_out_only();
    seq.choices[12] = 1; // clustering active (lambda6 = 0.1)
    auto spec = decode(seq);
    TADModel m(spec, small_config(8), 11);

    std::array<bool, 8> need{};
    need[0] = true;
    need[5] = true;
    auto lf = m.loss_vector(w.future, w.history, need);
    for (int64_t p = 0; p < 3; ++p) {
        CHECK(lf.components.at(0, p) > 0.0);
        CHECK(lf.components.at(1, p) == 0.0);
        CHECK(lf.components.at(4, p) == 0.0);
    }

    // Zero-weight short-circuit: the training loss over the gated vector is
    // bit-identical to one computed with the component rows omitted.
    double direct = losses::training_loss(lf, spec.weights);
    losses::LossVector only_active;
    only_active.components = Mat::zeros(8, 3);
    for (int64_t p = 0; p < 3; ++p) {
        only_active.components.at(0, p) = lf.components.at(0, p);
        only_active.components.at(5, p) = lf.components.at(5, p);
    }
    CHECK(direct == losses::training_loss(only_active, spec.weights));
}

TEST_CASE("score: purity and shape") {
    Rng rng(31);
    auto w = test::smooth_window(4, rng);
    TADModel m(decode(seq_out_only()), small_config(8), 17);
    auto s1 = m.score(w.future, w.history);
    auto s2 = m.score(w.future, w.history);
    CHECK(s1.size() == 4);
    CHECK(s1 == s2);

    // All-zero gates are rejected.
    OperatorSequence seq = seq_out_only();
    seq.choices[15] = 0;
    TADModel m0(decode(seq), small_config(8), 17);
    CHECK_THROWS_AS(m0.score(w.future, w.history), Error);
}

TEST_CASE("trained model separates clean futures from perturbed ones") {
    auto windows = test::smooth_windows(60, 2, 37);
    std::vector<data::TrajectoryWindow> train(windows.begin(), windows.begin() + 40);
    std::vector<data::TrajectoryWindow> val(windows.begin() + 40, windows.end());
    auto negs = data::make_negatives(val, 0.1, 5);

    OperatorSequence seq = seq_out_only();
    seq.choices[0] = 1; // relative-position input
    seq.choices[1] = 1; // mlp branch
    seq.choices[2] = 3; // recurrent branch
    seq.choices[6] = 2; // fully-connected output
    TADModel m(decode(seq), small_config(24), 3);
    m.train(train, 40);

    int wins = 0;
    for (size_t i = 0; i < val.size(); ++i) {
        double pos = m.mean_score(val[i].future, val[i].history);
        double neg = m.mean_score(negs[i].perturbed_future, val[i].history);
        if (pos < neg) ++wins;
    }
    // Positives should score lower on most validation windows.
    CHECK(wins >= static_cast<int>(0.65 * static_cast<double>(val.size())));
}

TEST_CASE("checkpoint: save and load reproduce scores exactly") {
    Rng rng(41);
    auto w = test::smooth_window(3, rng);
    OperatorSequence seq = seq_out_only();
    seq.choices[8] = 1;  // adversarial pieces exercise the disc blob too
    seq.choices[16] = 1;
    TADModel m(decode(seq), small_config(8), 19);
    m.train(test::smooth_windows(4, 2, 43), 2);

    auto path = std::filesystem::temp_directory_path() / "tpad_model_rt.ckpt";
    m.save(path);
    auto loaded = model::TADModel::load(path);
    CHECK(loaded.score(w.future, w.history) == m.score(w.future, w.history));
    CHECK(loaded.train_stats().epoch_mean_loss == m.train_stats().epoch_mean_loss);
    CHECK(std::filesystem::exists(path.string() + ".spec.txt"));

    auto txt = io::read_file(path.string() + ".spec.txt");
    CHECK(txt.find("fexm_1st") != std::string::npos);
}

TEST_CASE("om unroll probe through the model") {
    Rng rng(47);
    auto w = test::smooth_window(2, rng);
    OperatorSequence seq = seq_out_only();
    seq.choices[6] = 3; // recurrent output module
    TADModel m(decode(seq), small_config(8), 23);
    m.forward(w.future, w.history);
    CHECK(m.om_last_unroll_steps() == 8);
}
