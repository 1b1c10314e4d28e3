#pragma once

#include <array>
#include <string>
#include <vector>

#include "tpad/autodiff.hpp"
#include "tpad/blocks.hpp"

namespace tpad::losses {

using ad::Var;

// Component order everywhere: (out, adv, fea, com, sep, clu, rsr1, rsr2).
inline constexpr int kNumComponents = 8;
inline constexpr std::array<const char*, kNumComponents> kComponentNames = {"out", "adv", "fea", "com",
                                                                            "sep", "clu", "rsr1", "rsr2"};

// Training weights and scoring gates. Each gamma is either 0 or its paired
// lambda; lambda[0] is never 0.
struct Weights {
    std::array<double, kNumComponents> lambda{};
    std::array<double, kNumComponents> gamma{};

    void validate() const;
    bool gamma_all_zero() const;
};

struct AuxFlags {
    bool memory = false;        // com or sep active
    bool clustering = false;    // clu active
    bool rsr = false;           // rsr1 or rsr2 active
    bool discriminator = false; // adv or fea active

    bool operator==(const AuxFlags&) const = default;
};

AuxFlags aux_flags(const std::array<double, kNumComponents>& lambda);

// All components as an 8 x N value matrix; rows with zero weight are skipped
// and stay exactly zero.
struct LossVector {
    Mat components; // 8 x N
    int64_t n() const { return components.c; }
};

// --- individual components (graph-building; each returns N x 1) ------------

// Euclidean norm of the flattened per-pedestrian residual between true and
// predicted history (both N x (t_obs*2)).
Var loss_out(const Var& o_true_flat, const Var& o_pred_flat);

// Non-saturating generator-side adversarial term, -log D(fake).
Var loss_adv(const Var& disc_prob_on_fake, double eps = 1e-6);

// Distance between discriminator features of (I, O) and (I, O').
Var loss_fea(const Var& feat_true, const Var& feat_pred);

struct MemoryLoss {
    Var compact;  // G x 1, sum of squared query-to-nearest distances
    Var separate; // G x 1, hinged (or raw) nearest/second-nearest gap
};
// queries/p_p/p_n: R x H rows aligned with group_of; margin applies to the
// hinged form. raw_form selects the unhinged printed difference.
MemoryLoss loss_memory(const Var& queries, const Var& p_p, const Var& p_n, const std::vector<int64_t>& group_of,
                       int64_t n_groups, double margin = 1.0, bool raw_form = false);

// Sharpened-target clustering divergence, sum_c b log(b/d) per row.
Var loss_cluster(const Var& b);

struct RsrLoss {
    Var per_row;    // N x 1, squared reconstruction residual per row
    Var structural; // N x 1, ||A A^T - I||_F^2 broadcast to every pedestrian
};
RsrLoss loss_rsr(const Var& h_all, const Var& a);

// --- aggregation over plain values ------------------------------------------

double training_loss(const LossVector& lf, const Weights& w);
std::vector<double> anomaly_score(const LossVector& lf, const Weights& w);

} // namespace tpad::losses
