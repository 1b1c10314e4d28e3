#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "tpad/blocks.hpp"
#include "tpad/model.hpp"
#include "tpad/optim.hpp"
#include "tpad/params.hpp"

namespace tpad::search {

struct ControllerConfig {
    int64_t embedding_size = 100;
    int64_t hidden_size = 100;
    double lr = 3.5e-4;
    double baseline_decay = 0.95;
    double entropy_coef = 0.0;
};

// Exponential moving average of rewards; the first reward initializes it.
double update_baseline(double baseline, double reward, double decay = 0.95);

// Autoregressive recurrent controller: one categorical head per slot, the
// embedding of each sampled choice feeds the next step, and a learned start
// token feeds slot 1. Scoring-gate heads mask the "use lambda" option when
// the paired lambda slot sampled zero.
class Controller {
public:
    explicit Controller(const ControllerConfig& cfg, uint64_t init_seed);

    struct Sample {
        model::OperatorSequence seq;
        std::vector<ad::Var> logps;     // 23 scalar graphs, each <= 0
        std::vector<ad::Var> entropies; // 23 scalar graphs
    };
    Sample sample(Rng& rng) const;

    // Log-probabilities (values) of a fixed sequence under the current policy.
    double sequence_logprob(const model::OperatorSequence& seq) const;

    // One REINFORCE ascent step with explicit baseline.
    void reinforce_step(const Sample& sample, double reward, double baseline);

    // EMA reward tracking.
    void push_reward(double reward);
    std::optional<double> baseline() const { return baseline_; }
    int64_t step_count() const { return step_count_; }

    const ControllerConfig& config() const { return cfg_; }
    const ParamStore& params() const { return params_; }

    void save(const std::filesystem::path& path, const Rng& rng) const;
    // Restores parameters, baseline, step count and the sampling rng.
    void load(const std::filesystem::path& path, Rng& rng);

    // Mask for one scoring-gate slot given the already-sampled choices.
    static std::vector<char> slot_mask(int slot, const model::OperatorSequence& partial);

private:
    ControllerConfig cfg_;
    ParamStore params_;
    ad::Var start_;
    blocks::GruCell cell_;
    std::vector<ad::Var> head_w_, head_b_; // per slot
    std::vector<ad::Var> embeddings_;      // per slot, option embeddings
    optim::Adam opt_;
    std::optional<double> baseline_;
    int64_t step_count_ = 0;

    Sample run(Rng* rng, const model::OperatorSequence* fixed) const;
};

// Uniform sequence sampling honoring the scoring-gate mask.
model::OperatorSequence sample_uniform_sequence(Rng& rng);

} // namespace tpad::search
