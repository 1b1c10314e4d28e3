#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tpad/autodiff.hpp"
#include "tpad/params.hpp"

namespace tpad::blocks {

using ad::Var;

struct BlockConfig {
    int64_t hidden = 64; // feature width H
    bool keeps_time = false;
    int variant_id = 0;
};

// Either one pooled N x H matrix or a per-frame sequence of them.
struct Feature {
    std::vector<Var> frames; // per-frame N x H; empty when pooled
    Var pooled;              // N x H when frames is empty

    bool per_frame() const { return !frames.empty(); }
    int64_t width() const { return per_frame() ? frames[0].cols() : pooled.cols(); }
    int64_t n() const { return per_frame() ? frames[0].rows() : pooled.rows(); }
    // Mean over frames (identity on pooled features).
    Var time_pooled() const { return per_frame() ? ad::mean_of(frames) : pooled; }
};

// Shared affine layer.
struct Linear {
    Var w, b;
    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out, Rng& rng);
    Var apply(const Var& x) const; // x: R x in -> R x out
};

// Gated recurrent cell used by the LSTM-flavoured encoder/decoder variants
// and by the search controller.
struct GruCell {
    Var wz, uz, bz, wr, ur, br, wn, un, bn;
    int64_t hidden = 0;
    GruCell() = default;
    GruCell(ParamStore& ps, const std::string& name, int64_t in, int64_t hidden, Rng& rng);
    Var step(const Var& x, const Var& h) const;
};

// ---------------------------------------------------------------------------
// Stage-1 architecture slots.
// ---------------------------------------------------------------------------

// Input processing: variant 1 passes positions through, variant 2 turns them
// into frame-to-frame displacements anchored at the last observed position,
// variant 3 stacks both along the coordinate axis. No parameters.
std::vector<Mat> ipm_apply(int variant, const TrajArray& future, const Mat* last_observed);
int64_t ipm_out_width(int variant);

class FexmBlock {
public:
    static std::unique_ptr<FexmBlock> make(int variant, int64_t in_width, int64_t t_in, const BlockConfig& cfg,
                                           ParamStore& ps, const std::string& prefix, Rng& rng);
    virtual ~FexmBlock() = default;
    virtual Feature apply(const std::vector<Var>& in_frames) const = 0;
    virtual bool keeps_time() const = 0;
    int variant() const { return variant_; }

protected:
    int variant_ = 0;
};

class FenmBlock {
public:
    static std::unique_ptr<FenmBlock> make(int variant, int64_t width, const BlockConfig& cfg, ParamStore& ps,
                                           const std::string& prefix, Rng& rng);
    virtual ~FenmBlock() = default;
    // May set *warning to a structural note (variant 4 on pooled input).
    virtual Feature apply(const std::vector<Var>& in_frames, const Feature& features,
                          std::string* warning = nullptr) const = 0;
    int variant() const { return variant_; }

protected:
    int variant_ = 0;
};

// Fusion: pools per-frame features over time and concatenates. Variant 1 uses
// all four feature sets (width 4H), variant 2 only the enhanced pair (2H).
Var ffm_apply(int variant, const Feature& h1, const Feature& h2, const Feature& h1e, const Feature& h2e);
int64_t ffm_out_width(int variant, int64_t hidden);

class OmBlock {
public:
    static std::unique_ptr<OmBlock> make(int variant, int64_t in_width, int64_t t_obs, const BlockConfig& cfg,
                                         ParamStore& ps, const std::string& prefix, Rng& rng);
    virtual ~OmBlock() = default;
    virtual std::vector<Var> apply(const Var& h_all) const = 0; // t_obs frames of N x 2
    int variant() const { return variant_; }
    // Probe for the recurrent decoder: steps unrolled by the last apply().
    virtual int64_t last_unroll_steps() const { return 0; }

protected:
    int variant_ = 0;
};

// ---------------------------------------------------------------------------
// Auxiliary structures gated by the loss weights.
// ---------------------------------------------------------------------------

struct MemoryQuery {
    Var queries;   // R x H, one row per pedestrian (or pedestrian-frame)
    Var retrieved; // R x H, query + softmax read over the bank
    std::vector<int64_t> nearest, second_nearest; // top-2 items per query
    std::vector<int64_t> group_of;                // query row -> pedestrian
    int64_t n_groups = 0;
};

// Cosine-similarity softmax read over a learned bank (items: M x H).
MemoryQuery memory_query(const Feature& features, const Var& items);

// Student-t soft assignment of each row of h_all to each center; rows sum to 1.
Var cluster_assign(const Var& h_all, const Var& centers);

struct RsrProjection {
    Var projected;     // N x d
    Var reconstructed; // N x H_all
};
RsrProjection rsr_project(const Var& h_all, const Var& a);

// Small pairwise scorer over (future, history-candidate) per pedestrian.
class Discriminator {
public:
    Discriminator() = default;
    Discriminator(int64_t t_pred, int64_t t_obs, int64_t hidden, ParamStore& ps, Rng& rng);

    struct Score {
        Var prob;     // N x 1 in (0, 1)
        Var features; // N x F penultimate representation
    };
    // future_flat: N x (t_pred*2), history_flat: N x (t_obs*2)
    Score score(const Var& future_flat, const Var& history_flat) const;

private:
    Linear l1_, l2_, l3_;
};

} // namespace tpad::blocks
