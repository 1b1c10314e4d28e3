#pragma once

#include <filesystem>

#include "tpad/blocks.hpp"
#include "tpad/data.hpp"
#include "tpad/tpeval.hpp"

namespace tpad::tpsim {

struct SamplerConfig {
    int64_t psi = 50;   // stochastic sample count
    double sigma = 0.3; // per-coordinate noise scale, meters
    int64_t t_pred = 12;
    uint64_t seed = 0;
};

// Constant-velocity extrapolation plus i.i.d. Gaussian jitter per sample.
// Sample 0 is the noise-free extrapolation.
tpeval::SampleSet cv_gaussian_sample(const TrajArray& history, const SamplerConfig& cfg);

// Small learned encoder-decoder with noise injected at the latent state.
class RecurrentSampler {
public:
    RecurrentSampler(int64_t hidden, int64_t t_pred, uint64_t seed);

    void train(const std::vector<data::TrajectoryWindow>& windows, int epochs, double lr = 1e-3);
    bool trained() const { return trained_; }

    tpeval::SampleSet sample(const TrajArray& history, const SamplerConfig& cfg) const;

private:
    int64_t hidden_, t_pred_;
    ParamStore params_;
    blocks::GruCell encoder_, decoder_;
    blocks::Linear embed_, readout_;
    bool trained_ = false;

    // Deterministic decode from a latent state; outputs displacements.
    TrajArray decode(const Mat& latent, const TrajArray& history) const;
    ad::Var encode_graph(const TrajArray& history) const;
};

// Sample container: text header line, then a little-endian double payload.
void save_samples(const tpeval::SampleSet& set, const std::filesystem::path& path);
tpeval::SampleSet load_samples(const std::filesystem::path& path);

} // namespace tpad::tpsim
