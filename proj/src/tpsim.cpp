#include "tpad/tpsim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tpad/error.hpp"
#include "tpad/optim.hpp"
#include "tpad/serialize.hpp"

namespace tpad::tpsim {

using namespace tpad::ad;

tpeval::SampleSet cv_gaussian_sample(const TrajArray& history, const SamplerConfig& cfg) {
    check_config(history.t >= 2, "constant-velocity sampler needs at least two observed frames");
    check_config(cfg.psi >= 1 && cfg.sigma >= 0.0, "invalid sampler configuration");

    const int64_t n = history.n;
    TrajArray base(n, cfg.t_pred, 2);
    for (int64_t i = 0; i < n; ++i) {
        const double vx = history.at(i, history.t - 1, 0) - history.at(i, history.t - 2, 0);
        const double vy = history.at(i, history.t - 1, 1) - history.at(i, history.t - 2, 1);
        for (int64_t f = 0; f < cfg.t_pred; ++f) {
            base.at(i, f, 0) = history.at(i, history.t - 1, 0) + vx * static_cast<double>(f + 1);
            base.at(i, f, 1) = history.at(i, history.t - 1, 1) + vy * static_cast<double>(f + 1);
        }
    }

    tpeval::SampleSet out;
    out.source = "constant-velocity-gaussian";
    out.samples.reserve(static_cast<size_t>(cfg.psi));
    out.samples.push_back(base); // noise-free anchor
    Rng rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    for (int64_t j = 1; j < cfg.psi; ++j) {
        TrajArray s = base;
        if (cfg.sigma > 0.0)
            for (auto& v : s.d) v += noise(rng);
        out.samples.push_back(std::move(s));
    }
    return out;
}

RecurrentSampler::RecurrentSampler(int64_t hidden, int64_t t_pred, uint64_t seed) : hidden_(hidden), t_pred_(t_pred) {
    Rng rng(seed);
    embed_ = blocks::Linear(params_, "embed", 2, hidden, rng);
    encoder_ = blocks::GruCell(params_, "enc", hidden, hidden, rng);
    decoder_ = blocks::GruCell(params_, "dec", 2, hidden, rng);
    readout_ = blocks::Linear(params_, "readout", hidden, 2, rng);
}

Var RecurrentSampler::encode_graph(const TrajArray& history) const {
    const int64_t n = history.n;
    Var h = constant(Mat::zeros(n, hidden_));
    // Encode displacements; absolute position is translation noise here.
    for (int64_t f = 1; f < history.t; ++f) {
        Mat d(n, 2);
        for (int64_t i = 0; i < n; ++i) {
            d.at(i, 0) = history.at(i, f, 0) - history.at(i, f - 1, 0);
            d.at(i, 1) = history.at(i, f, 1) - history.at(i, f - 1, 1);
        }
        h = encoder_.step(tanh_(embed_.apply(constant(std::move(d)))), h);
    }
    return h;
}

void RecurrentSampler::train(const std::vector<data::TrajectoryWindow>& windows, int epochs, double lr) {
    check_config(!windows.empty(), "sampler training needs windows");
    optim::Adam opt(params_.vars(), lr);
    for (int e = 0; e < epochs; ++e) {
        for (const auto& w : windows) {
            const int64_t n = w.n();
            Var h = encode_graph(w.history);
            // Teacher-forced decode of future displacements.
            Var loss;
            Mat prev(n, 2), pos(n, 2);
            for (int64_t i = 0; i < n; ++i) {
                prev.at(i, 0) = w.history.at(i, w.t_obs() - 2, 0);
                prev.at(i, 1) = w.history.at(i, w.t_obs() - 2, 1);
                pos.at(i, 0) = w.history.at(i, w.t_obs() - 1, 0);
                pos.at(i, 1) = w.history.at(i, w.t_obs() - 1, 1);
            }
            for (int64_t f = 0; f < t_pred_; ++f) {
                // Feed the previous true displacement (teacher forcing).
                Mat din(n, 2);
                for (int64_t i = 0; i < n; ++i) {
                    din.at(i, 0) = pos.at(i, 0) - prev.at(i, 0);
                    din.at(i, 1) = pos.at(i, 1) - prev.at(i, 1);
                }
                h = decoder_.step(constant(std::move(din)), h);
                Var d_pred = readout_.apply(h);
                Mat d_true(n, 2);
                for (int64_t i = 0; i < n; ++i) {
                    d_true.at(i, 0) = w.future.at(i, f, 0) - pos.at(i, 0);
                    d_true.at(i, 1) = w.future.at(i, f, 1) - pos.at(i, 1);
                }
                Var err = sum_all(square(sub(d_pred, constant(d_true))));
                loss = loss.defined() ? add(loss, err) : err;
                prev = pos;
                for (int64_t i = 0; i < n; ++i) {
                    pos.at(i, 0) = w.future.at(i, f, 0);
                    pos.at(i, 1) = w.future.at(i, f, 1);
                }
            }
            backward(scale(loss, 1.0 / static_cast<double>(n * t_pred_)));
            opt.step();
        }
    }
    trained_ = true;
}

TrajArray RecurrentSampler::decode(const Mat& latent, const TrajArray& history) const {
    const int64_t n = history.n;
    Var h = constant(latent);
    TrajArray out(n, t_pred_, 2);
    Mat pos(n, 2), prev(n, 2);
    for (int64_t i = 0; i < n; ++i) {
        pos.at(i, 0) = history.at(i, history.t - 1, 0);
        pos.at(i, 1) = history.at(i, history.t - 1, 1);
        prev.at(i, 0) = history.at(i, history.t - 2, 0);
        prev.at(i, 1) = history.at(i, history.t - 2, 1);
    }
    for (int64_t f = 0; f < t_pred_; ++f) {
        Mat din(n, 2);
        for (int64_t i = 0; i < n; ++i) {
            din.at(i, 0) = pos.at(i, 0) - prev.at(i, 0);
            din.at(i, 1) = pos.at(i, 1) - prev.at(i, 1);
        }
        h = decoder_.step(constant(std::move(din)), h);
        Var d_pred = readout_.apply(h);
        prev = pos;
        for (int64_t i = 0; i < n; ++i) {
            pos.at(i, 0) += d_pred.val().at(i, 0);
            pos.at(i, 1) += d_pred.val().at(i, 1);
            out.at(i, f, 0) = pos.at(i, 0);
            out.at(i, f, 1) = pos.at(i, 1);
        }
    }
    return out;
}

tpeval::SampleSet RecurrentSampler::sample(const TrajArray& history, const SamplerConfig& cfg) const {
    check_config(trained_, "recurrent sampler used before training");
    check_config(cfg.psi >= 1 && cfg.sigma >= 0.0, "invalid sampler configuration");
    Var h = encode_graph(history);

    tpeval::SampleSet out;
    out.source = "recurrent-gaussian";
    out.samples.reserve(static_cast<size_t>(cfg.psi));
    Rng rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    for (int64_t j = 0; j < cfg.psi; ++j) {
        Mat latent = h.val();
        if (j > 0 && cfg.sigma > 0.0)
            for (auto& v : latent.d) v += noise(rng);
        out.samples.push_back(decode(latent, history));
    }
    return out;
}

void save_samples(const tpeval::SampleSet& set, const std::filesystem::path& path) {
    check_config(set.psi() >= 1, "cannot save an empty sample set");
    const int64_t n = set.n();
    const int64_t t = set.samples[0].t;
    for (const auto& s : set.samples)
        check_config(s.n == n && s.t == t && s.k == 2, "inconsistent sample shapes");

    std::ostringstream os(std::ios::binary);
    os << "TPADSMP1 " << set.psi() << " " << n << " " << t << " 2\n";
    for (const auto& s : set.samples) io::write_f64_array(os, s.d);
    io::atomic_write(path, os.str());
}

tpeval::SampleSet load_samples(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    check_data(static_cast<bool>(is), "cannot open sample file: " + path.string());
    std::string header;
    std::getline(is, header);
    std::istringstream hs(header);
    std::string magic;
    int64_t psi = 0, n = 0, t = 0, k = 0;
    hs >> magic >> psi >> n >> t >> k;
    check_data(magic == "TPADSMP1" && psi >= 1 && n >= 1 && t >= 1 && k == 2,
               "format error: bad sample file header in " + path.string());

    tpeval::SampleSet out;
    out.source = path.filename().string();
    out.samples.reserve(static_cast<size_t>(psi));
    for (int64_t j = 0; j < psi; ++j) {
        TrajArray s(n, t, 2);
        is.read(reinterpret_cast<char*>(s.d.data()), static_cast<std::streamsize>(s.d.size() * sizeof(double)));
        check_data(static_cast<bool>(is), "format error: truncated sample file " + path.string());
        out.samples.push_back(std::move(s));
    }
    // Trailing bytes mean the header lied about the shape.
    char extra;
    is.read(&extra, 1);
    check_data(is.eof(), "format error: trailing bytes in sample file " + path.string());
    return out;
}

} // namespace tpad::tpsim
