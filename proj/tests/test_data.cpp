#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "tpad/data.hpp"
#include "tpad/error.hpp"
#include "tpad/serialize.hpp"

using namespace tpad;
using namespace tpad::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream f(p, std::ios::trunc);
    f << content;
    return p;
}

// A single pedestrian walking in a straight line over `frames` frames.
RawTrackTable line_table(int64_t ped, int64_t frames, int64_t frame_stride = 1, double x0 = 0.0, double y0 = 0.0) {
    RawTrackTable t;
    t.scene_name = "line";
    for (int64_t f = 0; f < frames; ++f)
        t.rows.push_back({f * frame_stride, ped, x0 + 0.5 * static_cast<double>(f), y0 + 0.1 * static_cast<double>(f)});
    return t;
}

} // namespace

TEST_CASE("load_raw_scene: parses rows in declared column order") {
    auto p = temp_file("tpad_scene_basic.txt", "0 1 0.0 0.0\n10 1 1.0 1.0\n");
    auto t = load_raw_scene(p);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].ped == 1);
    CHECK(t.rows[0].frame == 0);
    CHECK(t.rows[1].frame == 10);
    CHECK(t.rows[1].x == 1.0);
}

TEST_CASE("load_raw_scene: rejects NaN coordinates with a line number") {
    auto p = temp_file("tpad_scene_nan.txt", "0 1 0.5 0.5\n1 1 nan 0.0\n");
    CHECK_THROWS_WITH_AS(load_raw_scene(p), doctest::Contains("line 2"), Error);
}

TEST_CASE("load_raw_scene: malformed line names its line number") {
    auto p = temp_file("tpad_scene_bad.txt", "0 1 0.0 0.0\n0 2 bogus 1.0\n");
    CHECK_THROWS_WITH_AS(load_raw_scene(p), doctest::Contains("line 2"), Error);
}

TEST_CASE("load_raw_scene: empty file is an empty-input error") {
    auto p = temp_file("tpad_scene_empty.txt", "# only a comment\n\n");
    CHECK_THROWS_WITH_AS(load_raw_scene(p), doctest::Contains("empty input"), Error);
}

TEST_CASE("load_raw_scene: custom column order") {
    auto p = temp_file("tpad_scene_order.txt", "3.5 7.25 0 9\n");
    auto t = load_raw_scene(p, ColumnOrder::parse("x y frame ped"));
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].frame == 0);
    CHECK(t.rows[0].ped == 9);
    CHECK(t.rows[0].x == 3.5);
    CHECK(t.rows[0].y == 7.25);
}

TEST_CASE("load_raw_scene: ETH-style stride-10 fixture has 3 pedestrian ids") {
    std::string content;
    char buf[64];
    for (int ped = 1; ped <= 3; ++ped)
        for (int f = 0; f < 20; ++f) {
            std::snprintf(buf, sizeof buf, "%d %d %.2f %.2f\n", f * 10, ped, 0.4 * f + ped, 0.2 * f);
            content += buf;
        }
    auto p = temp_file("tpad_scene_eth.txt", content);
    auto t = load_raw_scene(p);
    std::set<int64_t> ids;
    for (const auto& r : t.rows) ids.insert(r.ped);
    CHECK(ids == std::set<int64_t>{1, 2, 3});
    auto ws = window_scenes(t, 8, 12, 1);
    REQUIRE(ws.size() == 1); // exactly 20 sampled frames
    CHECK(ws[0].n() == 3);
}

TEST_CASE("save_raw_scene / load_raw_scene round-trips exactly") {
    RawTrackTable t;
    t.scene_name = "rt";
    Rng rng(3);
    std::uniform_real_distribution<double> dist(-100, 100);
    for (int64_t f = 0; f < 25; ++f) t.rows.push_back({f, 1, dist(rng), dist(rng)});
    auto p = fs::temp_directory_path() / "tpad_scene_rt.txt";
    save_raw_scene(t, p);
    auto t2 = load_raw_scene(p);
    REQUIRE(t2.rows.size() == t.rows.size());
    for (size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(t2.rows[i].frame == t.rows[i].frame);
        CHECK(t2.rows[i].ped == t.rows[i].ped);
        CHECK(t2.rows[i].x == t.rows[i].x); // bit-exact
        CHECK(t2.rows[i].y == t.rows[i].y);
    }
}

TEST_CASE("window_scenes: boundary fit yields exactly one window") {
    auto ws = window_scenes(line_table(1, 20), 8, 12, 1);
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].n() == 1);
    CHECK(ws[0].t_obs() == 8);
    CHECK(ws[0].t_pred() == 12);
    // History covers the first 8 frames, future the next 12.
    CHECK(ws[0].history.at(0, 0, 0) == 0.0);
    CHECK(ws[0].future.at(0, 11, 0) == doctest::Approx(0.5 * 19));
}

TEST_CASE("window_scenes: 25 frames and stride 1 gives 6 windows") {
    auto ws = window_scenes(line_table(1, 25), 8, 12, 1);
    CHECK(ws.size() == 6);
}

TEST_CASE("window_scenes: partial presence is excluded") {
    auto t = line_table(1, 20);
    auto half = line_table(2, 10, 1, 5.0, 5.0);
    t.rows.insert(t.rows.end(), half.rows.begin(), half.rows.end());
    auto ws = window_scenes(t, 8, 12, 1);
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].n() == 1);
    CHECK(ws[0].ped_ids == std::vector<int64_t>{1});
}

TEST_CASE("window_scenes: stride skips start offsets") {
    auto ws = window_scenes(line_table(1, 26), 8, 12, 3);
    CHECK(ws.size() == 3); // starts 0, 3, 6
    CHECK_THROWS_AS(window_scenes(line_table(1, 26), 8, 12, 0), Error);
}

TEST_CASE("window_scenes: translation consistency") {
    auto t = line_table(1, 23);
    auto shifted = t;
    for (auto& r : shifted.rows) {
        r.x += 11.5;
        r.y -= 3.25;
    }
    auto a = window_scenes(t), b = window_scenes(shifted);
    REQUIRE(a.size() == b.size());
    for (size_t w = 0; w < a.size(); ++w) {
        for (int64_t i = 0; i < a[w].history.size(); i += 2) {
            CHECK(b[w].history.d[static_cast<size_t>(i)] ==
                  doctest::Approx(a[w].history.d[static_cast<size_t>(i)] + 11.5).epsilon(1e-12));
        }
        for (int64_t i = 1; i < a[w].future.size(); i += 2) {
            CHECK(b[w].future.d[static_cast<size_t>(i)] ==
                  doctest::Approx(a[w].future.d[static_cast<size_t>(i)] - 3.25).epsilon(1e-12));
        }
    }
}

TEST_CASE("window_scenes: every emitted window satisfies full presence") {
    SynthSceneConfig cfg;
    cfg.cohorts = 3;
    auto table = gen_synthetic_scene("s", cfg, 17);
    auto ws = window_scenes(table);
    CHECK(!ws.empty());
    for (const auto& w : ws) {
        CHECK(w.n() >= 1);
        CHECK(w.history.all_finite());
        CHECK(w.future.all_finite());
        CHECK(static_cast<int64_t>(w.ped_ids.size()) == w.n());
    }
}

TEST_CASE("leave_one_out_split: held-out scene is excluded and counts are exact") {
    std::map<std::string, std::vector<TrajectoryWindow>> scenes;
    Rng rng(5);
    for (std::string name : {"eth", "hotel", "univ", "zara1", "zara2"}) {
        std::vector<TrajectoryWindow> ws;
        for (int i = 0; i < 25; ++i) {
            auto w = test::smooth_window(2, rng);
            w.scene = name;
            ws.push_back(w);
        }
        scenes[name] = ws;
    }
    auto split = leave_one_out_split(scenes, "eth", 0.2, 7);
    CHECK(split.held_out_scene == "eth");
    for (const auto& w : split.train) CHECK(w.scene != "eth");
    for (const auto& w : split.val) CHECK(w.scene != "eth");
    CHECK(split.val.size() == 20); // 100 * 0.2
    CHECK(split.train.size() == 80);

    auto split2 = leave_one_out_split(scenes, "eth", 0.2, 7);
    REQUIRE(split2.train.size() == split.train.size());
    for (size_t i = 0; i < split.train.size(); ++i)
        CHECK(split2.train[i].history.d == split.train[i].history.d);

    CHECK_THROWS_AS(leave_one_out_split(scenes, "nowhere", 0.2, 7), Error);
}

TEST_CASE("make_negatives: bound, symmetry, determinism") {
    Rng rng(11);
    std::vector<TrajectoryWindow> windows;
    for (int i = 0; i < 40; ++i) windows.push_back(test::smooth_window(3, rng));

    auto negs = make_negatives(windows, 0.1, 21);
    REQUIRE(negs.size() == windows.size());
    double max_abs = 0.0, sum = 0.0;
    int64_t count = 0;
    for (size_t i = 0; i < negs.size(); ++i) {
        REQUIRE(negs[i].base_index == static_cast<int64_t>(i));
        const auto& base = windows[i].future;
        bool any_diff = false;
        for (int64_t j = 0; j < base.size(); ++j) {
            double delta = negs[i].perturbed_future.d[static_cast<size_t>(j)] - base.d[static_cast<size_t>(j)];
            max_abs = std::max(max_abs, std::abs(delta));
            sum += delta;
            ++count;
            any_diff = any_diff || delta != 0.0;
        }
        CHECK(any_diff);
    }
    CHECK(max_abs <= 0.1);
    CHECK(count >= 1000);

    // Uniform symmetry: mean within +-0.005 over >= 1e5 draws.
    std::vector<TrajectoryWindow> many;
    for (int i = 0; i < 150; ++i) many.push_back(test::smooth_window(5, rng)); // 150*5*24 = 18000/window set
    auto negs_many = make_negatives(many, 0.1, 22);
    double mean = 0.0;
    int64_t total = 0;
    for (size_t i = 0; i < negs_many.size(); ++i)
        for (int64_t j = 0; j < many[i].future.size(); ++j) {
            mean += negs_many[i].perturbed_future.d[static_cast<size_t>(j)] - many[i].future.d[static_cast<size_t>(j)];
            ++total;
        }
    // Top up to 1e5 samples with repeated draws under fresh seeds.
    for (uint64_t s = 23; total < 100000; ++s) {
        auto extra = make_negatives(many, 0.1, s);
        for (size_t i = 0; i < extra.size(); ++i)
            for (int64_t j = 0; j < many[i].future.size(); ++j) {
                mean += extra[i].perturbed_future.d[static_cast<size_t>(j)] - many[i].future.d[static_cast<size_t>(j)];
                ++total;
            }
    }
    CHECK(std::abs(mean / static_cast<double>(total)) < 0.005);

    // Different seeds differ in perturbation but share bases; same seed repeats.
    auto n1 = make_negatives(windows, 0.1, 1), n2 = make_negatives(windows, 0.1, 2);
    CHECK(n1[0].perturbed_future.d != n2[0].perturbed_future.d);
    CHECK(n1[0].base_index == n2[0].base_index);
    auto n1b = make_negatives(windows, 0.1, 1);
    CHECK(n1[0].perturbed_future.d == n1b[0].perturbed_future.d);

    CHECK_THROWS_AS(make_negatives(windows, 0.0, 1), Error);
}

TEST_CASE("windows and negatives caches round-trip") {
    Rng rng(31);
    std::vector<TrajectoryWindow> windows;
    for (int i = 0; i < 7; ++i) windows.push_back(test::smooth_window(1 + i % 3, rng));
    auto negs = make_negatives(windows, 0.1, 5);

    auto wp = fs::temp_directory_path() / "tpad_windows.bin";
    auto np = fs::temp_directory_path() / "tpad_negs.bin";
    save_windows(windows, wp);
    save_negatives(negs, np);
    auto w2 = load_windows(wp);
    auto n2 = load_negatives(np);
    REQUIRE(w2.size() == windows.size());
    REQUIRE(n2.size() == negs.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        CHECK(w2[i].history.d == windows[i].history.d);
        CHECK(w2[i].future.d == windows[i].future.d);
        CHECK(w2[i].ped_ids == windows[i].ped_ids);
        CHECK(w2[i].scene == windows[i].scene);
    }
    CHECK(n2[3].perturbed_future.d == negs[3].perturbed_future.d);

    // A truncated cache is rejected.
    auto bytes = io::read_file(wp);
    auto tp = fs::temp_directory_path() / "tpad_windows_trunc.bin";
    io::atomic_write(tp, bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_windows(tp), Error);
}
