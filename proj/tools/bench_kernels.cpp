#include <chrono>
#include <cstdio>
#include <vector>

#include "tpad/data.hpp"
#include "tpad/kernels.hpp"
#include "tpad/mat.hpp"
#include "tpad/model.hpp"

// Times the serial reference kernels against the OpenMP path, plus a model
// forward/score loop at both settings.
namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

void bench_matmul(int64_t n) {
    tpad::Rng rng(1);
    tpad::Mat a = tpad::Mat::uniform(n, n, -1, 1, rng);
    tpad::Mat b = tpad::Mat::uniform(n, n, -1, 1, rng);
    tpad::Mat c(n, n);
    const int reps = n <= 128 ? 200 : 20;
    double serial = time_ms([&] { tpad::kernels::matmul_serial(a.d.data(), b.d.data(), c.d.data(), n, n, n); }, reps);
    double openmp = time_ms([&] { tpad::kernels::matmul_openmp(a.d.data(), b.d.data(), c.d.data(), n, n, n); }, reps);
    std::printf("matmul %4lld x %-4lld   serial %8.3f ms   openmp %8.3f ms   speedup %.2fx\n",
                static_cast<long long>(n), static_cast<long long>(n), serial, openmp, serial / openmp);
}

void bench_scoring() {
    tpad::data::SynthSceneConfig scfg;
    scfg.cohorts = 2;
    auto table = tpad::data::gen_synthetic_scene("bench", scfg, 11);
    auto windows = tpad::data::window_scenes(table);

    tpad::model::OperatorSequence seq; // all-first-option model, output error only
    seq.choices[15] = 1;               // gate the output-error score on
    auto spec = tpad::model::decode(seq);
    tpad::model::TADModel m(spec, {}, 3);

    for (auto mode : {tpad::kernels::Exec::serial, tpad::kernels::Exec::openmp}) {
        tpad::kernels::set_execution(mode);
        double ms = time_ms(
            [&] {
                for (const auto& w : windows) m.score(w.future, w.history);
            },
            5);
        std::printf("score %3zu windows    %s %8.3f ms\n", windows.size(),
                    mode == tpad::kernels::Exec::serial ? "serial" : "openmp", ms);
    }
    tpad::kernels::set_execution(tpad::kernels::Exec::openmp);
}

} // namespace

int main() {
    for (int64_t n : {64, 128, 256, 512}) bench_matmul(n);
    bench_scoring();
    return 0;
}
