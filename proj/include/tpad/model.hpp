#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tpad/blocks.hpp"
#include "tpad/data.hpp"
#include "tpad/losses.hpp"
#include "tpad/optim.hpp"

namespace tpad::model {

inline constexpr int kNumSlots = 23;

// Option counts per slot: 7 architecture slots, 8 training-weight slots,
// 8 scoring-gate slots.
inline constexpr std::array<int, kNumSlots> kSlotOptions = {3, 5, 5, 4, 4, 2, 4, 3, 4, 4, 4, 4,
                                                            4, 4, 4, 2, 2, 2, 2, 2, 2, 2, 2};
inline constexpr std::array<double, 3> kLambda1Options = {0.1, 0.01, 1.0};
inline constexpr std::array<double, 4> kLambdaOptions = {0.0, 0.1, 0.01, 1.0};

inline constexpr int kArchSlots = 7;
inline constexpr int kLambdaSlotBase = 7;
inline constexpr int kGammaSlotBase = 15;

struct OperatorSequence {
    std::array<int, kNumSlots> choices{};
    bool operator==(const OperatorSequence&) const = default;
};

struct TADSpec {
    // 1-based variant ids: ipm, fexm_1st, fexm_2nd, fenm_1st, fenm_2nd, ffm, om.
    std::array<int, kArchSlots> arch{1, 1, 1, 1, 1, 1, 1};
    losses::Weights weights;
    losses::AuxFlags aux;
};

TADSpec decode(const OperatorSequence& seq);
OperatorSequence encode(const TADSpec& spec);
// Value of the lambda option index for a given lambda slot (7..14).
double lambda_option_value(int slot, int option);
std::string describe(const TADSpec& spec);

struct ModelConfig {
    int64_t hidden = 64;
    int64_t t_obs = 8;
    int64_t t_pred = 12;
    int64_t memory_items = 10;
    int64_t cluster_centers = 8;
    double lr = 1e-3;
    double sep_margin = 1.0;
    bool sep_raw_form = false;
};

struct TrainStats {
    std::vector<double> epoch_mean_loss;
};

class TADModel {
public:
    TADModel(const TADSpec& spec, const ModelConfig& cfg, uint64_t seed);

    const TADSpec& spec() const { return spec_; }
    const ModelConfig& config() const { return cfg_; }
    const ParamStore& params() const { return params_; }
    const ParamStore& disc_params() const { return disc_params_; }
    const TrainStats& train_stats() const { return stats_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    int64_t om_last_unroll_steps() const { return om_->last_unroll_steps(); }

    struct Forward {
        ad::Var opred_flat; // N x (t_obs*2)
        ad::Var h_all;      // N x H_all
        ad::Var future_flat; // constant N x (t_pred*2)
        blocks::Feature h1e; // first enhanced branch (memory queries source)
    };
    Forward forward(const TrajArray& y_input, const TrajArray& x_context) const;

    // Per-component loss rows (N x 1 graphs); rows not in `need` stay undefined.
    std::array<ad::Var, losses::kNumComponents> loss_rows(const Forward& fwd, const TrajArray& x_context,
                                                          const std::array<bool, losses::kNumComponents>& need) const;

    // 8 x N value matrix; rows outside `need` are exactly zero.
    losses::LossVector loss_vector(const TrajArray& y_input, const TrajArray& x_context,
                                   const std::array<bool, losses::kNumComponents>& need) const;

    // One gradient step per window per epoch; alternates a discriminator step
    // when that auxiliary is active. Throws a numeric Error on divergence.
    void train(const std::vector<data::TrajectoryWindow>& windows, int epochs);

    // Per-pedestrian anomaly scores with the model's scoring gates.
    std::vector<double> score(const TrajArray& y_input, const TrajArray& x_context) const;
    double mean_score(const TrajArray& y_input, const TrajArray& x_context) const;

    void save(const std::filesystem::path& path) const;
    static TADModel load(const std::filesystem::path& path);

private:
    TADSpec spec_;
    ModelConfig cfg_;
    uint64_t seed_ = 0;

    ParamStore params_;
    ParamStore disc_params_;
    std::unique_ptr<blocks::FexmBlock> fexm1_, fexm2_;
    std::unique_ptr<blocks::FenmBlock> fenm1_, fenm2_;
    std::unique_ptr<blocks::OmBlock> om_;
    ad::Var memory_items_;
    ad::Var cluster_centers_;
    ad::Var rsr_matrix_;
    std::optional<blocks::Discriminator> disc_;

    optim::Adam opt_, disc_opt_;
    TrainStats stats_;

    mutable std::vector<std::string> warnings_;
    mutable bool warned_structural_ = false;

    void note_warning(const std::string& w) const;
};

} // namespace tpad::model
