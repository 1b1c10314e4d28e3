#include "tpad/blocks.hpp"

#include <cmath>

#include "tpad/error.hpp"

namespace tpad::blocks {

using namespace tpad::ad;

Linear::Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out, Rng& rng) {
    w = ps.add(name + ".w", Mat::glorot(in, out, rng));
    b = ps.add(name + ".b", Mat::zeros(1, out));
}

Var Linear::apply(const Var& x) const { return add_rowvec(matmul(x, w), b); }

GruCell::GruCell(ParamStore& ps, const std::string& name, int64_t in, int64_t hid, Rng& rng) : hidden(hid) {
    wz = ps.add(name + ".wz", Mat::glorot(in, hid, rng));
    uz = ps.add(name + ".uz", Mat::glorot(hid, hid, rng));
    bz = ps.add(name + ".bz", Mat::zeros(1, hid));
    wr = ps.add(name + ".wr", Mat::glorot(in, hid, rng));
    ur = ps.add(name + ".ur", Mat::glorot(hid, hid, rng));
    br = ps.add(name + ".br", Mat::zeros(1, hid));
    wn = ps.add(name + ".wn", Mat::glorot(in, hid, rng));
    un = ps.add(name + ".un", Mat::glorot(hid, hid, rng));
    bn = ps.add(name + ".bn", Mat::zeros(1, hid));
}

Var GruCell::step(const Var& x, const Var& h) const {
    Var z = sigmoid(add_rowvec(add(matmul(x, wz), matmul(h, uz)), bz));
    Var r = sigmoid(add_rowvec(add(matmul(x, wr), matmul(h, ur)), br));
    Var n = tanh_(add_rowvec(add(matmul(x, wn), matmul(mul(r, h), un)), bn));
    // h' = (1 - z) * n + z * h
    Var one_minus_z = add_scalar(scale(z, -1.0), 1.0);
    return add(mul(one_minus_z, n), mul(z, h));
}

// ---------------------------------------------------------------------------
// IPM
// ---------------------------------------------------------------------------

int64_t ipm_out_width(int variant) {
    switch (variant) {
    case 1:
    case 2:
        return 2;
    case 3:
        return 4;
    default:
        fail_config("ipm variant out of range: " + std::to_string(variant));
    }
}

std::vector<Mat> ipm_apply(int variant, const TrajArray& future, const Mat* last_observed) {
    check_config(variant >= 1 && variant <= 3, "ipm variant out of range: " + std::to_string(variant));
    check_config(variant == 1 || last_observed != nullptr, "ipm variants 2-3 require the last observed position");
    if (last_observed) {
        check_config(last_observed->r == future.n && last_observed->c == future.k,
                     "ipm: last_observed shape mismatch");
    }
    const int64_t n = future.n, t = future.t, k = future.k;

    auto real = future.frames();
    if (variant == 1) return real;

    std::vector<Mat> rel(static_cast<size_t>(t));
    for (int64_t f = 0; f < t; ++f) {
        Mat m(n, k);
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t c = 0; c < k; ++c) {
                double prev = (f == 0) ? last_observed->at(i, c) : future.at(i, f - 1, c);
                m.at(i, c) = future.at(i, f, c) - prev;
            }
        }
        rel[static_cast<size_t>(f)] = std::move(m);
    }
    if (variant == 2) return rel;

    std::vector<Mat> both(static_cast<size_t>(t));
    for (int64_t f = 0; f < t; ++f) {
        Mat m(n, 2 * k);
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t c = 0; c < k; ++c) {
                m.at(i, c) = real[static_cast<size_t>(f)].at(i, c);
                m.at(i, k + c) = rel[static_cast<size_t>(f)].at(i, c);
            }
        }
        both[static_cast<size_t>(f)] = std::move(m);
    }
    return both;
}

// ---------------------------------------------------------------------------
// FExM variants
// ---------------------------------------------------------------------------

namespace {

// Row-normalized adjacency from a learned sparse attention: softmax scores
// with entries below the row mean dropped, renormalized.
Var sparse_adjacency(const Var& embed, const Var& wq, const Var& wk) {
    const int64_t n = embed.rows();
    Var q = matmul(embed, wq);
    Var kk = matmul(embed, wk);
    Var scores = scale(matmul_nt(q, kk), 1.0 / std::sqrt(static_cast<double>(q.cols())));
    Var soft = softmax_rows(scores);
    Mat mask(n, n);
    const double thresh = 1.0 / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) mask.at(i, j) = soft.val().at(i, j) >= thresh ? 1.0 : 0.0;
    Var kept = mul_const(soft, mask);
    return mul_colvec(kept, inv(row_sums(kept)));
}

class FexmSparseGcn final : public FexmBlock {
public:
    FexmSparseGcn(int64_t in, int64_t h, ParamStore& ps, const std::string& p, Rng& rng)
        : embed_(ps, p + ".embed", in, h, rng), out_(ps, p + ".out", h, h, rng) {
        variant_ = 1;
        wq_ = ps.add(p + ".wq", Mat::glorot(h, h, rng));
        wk_ = ps.add(p + ".wk", Mat::glorot(h, h, rng));
    }
    bool keeps_time() const override { return true; }
    Feature apply(const std::vector<Var>& in_frames) const override {
        Feature out;
        out.frames.reserve(in_frames.size());
        for (const auto& x : in_frames) {
            Var e = tanh_(embed_.apply(x));
            Var adj = sparse_adjacency(e, wq_, wk_);
            out.frames.push_back(tanh_(out_.apply(matmul(adj, e))));
        }
        return out;
    }

private:
    Linear embed_, out_;
    Var wq_, wk_;
};

class FexmMlp final : public FexmBlock {
public:
    FexmMlp(int64_t in, int64_t t, int64_t h, ParamStore& ps, const std::string& p, Rng& rng)
        : l1_(ps, p + ".l1", in * t, h, rng), l2_(ps, p + ".l2", h, h, rng) {
        variant_ = 2;
    }
    bool keeps_time() const override { return false; }
    Feature apply(const std::vector<Var>& in_frames) const override {
        Feature out;
        Var flat = concat_cols(in_frames);
        out.pooled = l2_.apply(tanh_(l1_.apply(flat)));
        return out;
    }

private:
    Linear l1_, l2_;
};

// Spatial adjacency from an inter-pedestrian distance kernel (first two
// input channels), then a temporal convolution of width 3 along frames.
class FexmStgcn final : public FexmBlock {
public:
    FexmStgcn(int64_t in, int64_t h, ParamStore& ps, const std::string& p, Rng& rng)
        : spatial_(ps, p + ".spatial", in, h, rng) {
        variant_ = 3;
        for (int dtap = 0; dtap < 3; ++dtap)
            wt_[dtap] = ps.add(p + ".wt" + std::to_string(dtap), Mat::glorot(h, h, rng));
        bt_ = ps.add(p + ".bt", Mat::zeros(1, h));
    }
    bool keeps_time() const override { return true; }
    Feature apply(const std::vector<Var>& in_frames) const override {
        const int64_t n = in_frames[0].rows();
        std::vector<Var> spatial;
        spatial.reserve(in_frames.size());
        for (const auto& x : in_frames) {
            Mat adj(n, n);
            for (int64_t i = 0; i < n; ++i) {
                double denom = 0.0;
                for (int64_t j = 0; j < n; ++j) {
                    double dx = x.val().at(i, 0) - x.val().at(j, 0);
                    double dy = x.val().at(i, 1) - x.val().at(j, 1);
                    adj.at(i, j) = std::exp(-std::sqrt(dx * dx + dy * dy));
                    denom += adj.at(i, j);
                }
                for (int64_t j = 0; j < n; ++j) adj.at(i, j) /= denom;
            }
            spatial.push_back(tanh_(matmul(constant(adj), spatial_.apply(x))));
        }
        const int64_t t = static_cast<int64_t>(spatial.size());
        Feature out;
        out.frames.reserve(spatial.size());
        for (int64_t f = 0; f < t; ++f) {
            Var acc = matmul(spatial[static_cast<size_t>(f)], wt_[1]);
            if (f > 0) acc = add(acc, matmul(spatial[static_cast<size_t>(f - 1)], wt_[0]));
            if (f + 1 < t) acc = add(acc, matmul(spatial[static_cast<size_t>(f + 1)], wt_[2]));
            out.frames.push_back(tanh_(add_rowvec(acc, bt_)));
        }
        return out;
    }

private:
    Linear spatial_;
    Var wt_[3], bt_;
};

class FexmRecurrent final : public FexmBlock {
public:
    FexmRecurrent(int64_t in, int64_t h, ParamStore& ps, const std::string& p, Rng& rng)
        : cell_(ps, p + ".gru", in, h, rng) {
        variant_ = 4;
    }
    bool keeps_time() const override { return false; }
    Feature apply(const std::vector<Var>& in_frames) const override {
        const int64_t n = in_frames[0].rows();
        Var h = constant(Mat::zeros(n, cell_.hidden));
        for (const auto& x : in_frames) h = cell_.step(x, h);
        Feature out;
        out.pooled = h;
        return out;
    }

private:
    GruCell cell_;
};

class FexmGat final : public FexmBlock {
public:
    FexmGat(int64_t in, int64_t h, ParamStore& ps, const std::string& p, Rng& rng)
        : embed_(ps, p + ".embed", in, h, rng) {
        variant_ = 5;
        a_src_ = ps.add(p + ".a_src", Mat::glorot(h, 1, rng));
        a_dst_ = ps.add(p + ".a_dst", Mat::glorot(h, 1, rng));
        bias_ = ps.add(p + ".bias", Mat::zeros(1, h));
    }
    bool keeps_time() const override { return true; }
    Feature apply(const std::vector<Var>& in_frames) const override {
        Feature out;
        out.frames.reserve(in_frames.size());
        for (const auto& x : in_frames) {
            Var g = embed_.apply(x);
            Var s = leaky_relu(outer_sum(matmul(g, a_src_), matmul(g, a_dst_)));
            Var alpha = softmax_rows(s);
            out.frames.push_back(tanh_(add_rowvec(matmul(alpha, g), bias_)));
        }
        return out;
    }

private:
    Linear embed_;
    Var a_src_, a_dst_, bias_;
};

} // namespace

std::unique_ptr<FexmBlock> FexmBlock::make(int variant, int64_t in_width, int64_t t_in, const BlockConfig& cfg,
                                           ParamStore& ps, const std::string& prefix, Rng& rng) {
    const int64_t h = cfg.hidden;
    switch (variant) {
    case 1:
        return std::make_unique<FexmSparseGcn>(in_width, h, ps, prefix, rng);
    case 2:
        return std::make_unique<FexmMlp>(in_width, t_in, h, ps, prefix, rng);
    case 3:
        return std::make_unique<FexmStgcn>(in_width, h, ps, prefix, rng);
    case 4:
        return std::make_unique<FexmRecurrent>(in_width, h, ps, prefix, rng);
    case 5:
        return std::make_unique<FexmGat>(in_width, h, ps, prefix, rng);
    default:
        fail_config("fexm variant out of range: " + std::to_string(variant));
    }
}

// ---------------------------------------------------------------------------
// FEnM variants
// ---------------------------------------------------------------------------

namespace {

class FenmIdentity final : public FenmBlock {
public:
    FenmIdentity() { variant_ = 1; }
    Feature apply(const std::vector<Var>&, const Feature& f, std::string*) const override { return f; }
};

// Learned scalar energy gates a residual correction.
class FenmEnergy final : public FenmBlock {
public:
    FenmEnergy(int64_t w, ParamStore& ps, const std::string& p, Rng& rng)
        : e1_(ps, p + ".e1", w, w, rng), e2_(ps, p + ".e2", w, 1, rng), res_(ps, p + ".res", w, w, rng) {
        variant_ = 2;
    }
    Feature apply(const std::vector<Var>&, const Feature& f, std::string*) const override {
        Feature out;
        if (f.per_frame()) {
            out.frames.reserve(f.frames.size());
            for (const auto& x : f.frames) out.frames.push_back(refine(x));
        } else {
            out.pooled = refine(f.pooled);
        }
        return out;
    }

private:
    Var refine(const Var& x) const {
        Var energy = sigmoid(e2_.apply(tanh_(e1_.apply(x)))); // R x 1
        return add(x, mul_colvec(res_.apply(x), energy));
    }
    Linear e1_, e2_, res_;
};

// Social context: softmax over pedestrians of a learned score, the pooled
// context vector is added to every pedestrian's feature.
class FenmAttentionPool final : public FenmBlock {
public:
    FenmAttentionPool(int64_t w, ParamStore& ps, const std::string& p, Rng& rng)
        : key_(ps, p + ".key", w, w, rng), ctx_(ps, p + ".ctx", w, w, rng) {
        variant_ = 3;
        score_ = ps.add(p + ".score", Mat::glorot(w, 1, rng));
    }
    Feature apply(const std::vector<Var>&, const Feature& f, std::string*) const override {
        Feature out;
        if (f.per_frame()) {
            out.frames.reserve(f.frames.size());
            for (const auto& x : f.frames) out.frames.push_back(enrich(x));
        } else {
            out.pooled = enrich(f.pooled);
        }
        return out;
    }

private:
    Var enrich(const Var& x) const {
        Var u = tanh_(key_.apply(x));
        Var alpha = softmax_col(matmul(u, score_));       // N x 1
        Var context = matmul_tn(alpha, ctx_.apply(x));    // 1 x W
        return add_rowvec(x, context);
    }
    Linear key_, ctx_;
    Var score_;
};

// Recurrent pass along the time axis; pooled input has no time axis, so the
// block degrades to identity and reports it.
class FenmTemporal final : public FenmBlock {
public:
    FenmTemporal(int64_t w, ParamStore& ps, const std::string& p, Rng& rng) : cell_(ps, p + ".gru", w, w, rng) {
        variant_ = 4;
    }
    Feature apply(const std::vector<Var>&, const Feature& f, std::string* warning) const override {
        if (!f.per_frame()) {
            if (warning) *warning = "fenm variant 4 received pooled features; acting as identity";
            return f;
        }
        Feature out;
        out.frames.reserve(f.frames.size());
        Var h = constant(Mat::zeros(f.n(), cell_.hidden));
        for (const auto& x : f.frames) {
            h = cell_.step(x, h);
            out.frames.push_back(h);
        }
        return out;
    }

private:
    GruCell cell_;
};

} // namespace

std::unique_ptr<FenmBlock> FenmBlock::make(int variant, int64_t width, const BlockConfig&, ParamStore& ps,
                                           const std::string& prefix, Rng& rng) {
    switch (variant) {
    case 1:
        return std::make_unique<FenmIdentity>();
    case 2:
        return std::make_unique<FenmEnergy>(width, ps, prefix, rng);
    case 3:
        return std::make_unique<FenmAttentionPool>(width, ps, prefix, rng);
    case 4:
        return std::make_unique<FenmTemporal>(width, ps, prefix, rng);
    default:
        fail_config("fenm variant out of range: " + std::to_string(variant));
    }
}

// ---------------------------------------------------------------------------
// FFM
// ---------------------------------------------------------------------------

int64_t ffm_out_width(int variant, int64_t hidden) {
    switch (variant) {
    case 1:
        return 4 * hidden;
    case 2:
        return 2 * hidden;
    default:
        fail_config("ffm variant out of range: " + std::to_string(variant));
    }
}

Var ffm_apply(int variant, const Feature& h1, const Feature& h2, const Feature& h1e, const Feature& h2e) {
    switch (variant) {
    case 1:
        return concat_cols({h1.time_pooled(), h2.time_pooled(), h1e.time_pooled(), h2e.time_pooled()});
    case 2:
        return concat_cols({h1e.time_pooled(), h2e.time_pooled()});
    default:
        fail_config("ffm variant out of range: " + std::to_string(variant));
    }
}

// ---------------------------------------------------------------------------
// OM variants
// ---------------------------------------------------------------------------

namespace {

class OmTcn final : public OmBlock {
public:
    OmTcn(int64_t in, int64_t t_obs, int64_t ch, ParamStore& ps, const std::string& p, Rng& rng)
        : t_obs_(t_obs), ch_(ch), seed_(ps, p + ".seed", in, t_obs * ch, rng), out_(ps, p + ".out", ch, 2, rng) {
        variant_ = 1;
        for (int dtap = 0; dtap < 3; ++dtap)
            wt_[dtap] = ps.add(p + ".wt" + std::to_string(dtap), Mat::glorot(ch, ch, rng));
        bt_ = ps.add(p + ".bt", Mat::zeros(1, ch));
    }
    std::vector<Var> apply(const Var& h_all) const override {
        Var s = tanh_(seed_.apply(h_all));
        std::vector<Var> seq;
        seq.reserve(static_cast<size_t>(t_obs_));
        for (int64_t f = 0; f < t_obs_; ++f) seq.push_back(slice_cols(s, f * ch_, ch_));
        std::vector<Var> out;
        out.reserve(static_cast<size_t>(t_obs_));
        for (int64_t f = 0; f < t_obs_; ++f) {
            Var acc = matmul(seq[static_cast<size_t>(f)], wt_[1]);
            if (f > 0) acc = add(acc, matmul(seq[static_cast<size_t>(f - 1)], wt_[0]));
            if (f + 1 < t_obs_) acc = add(acc, matmul(seq[static_cast<size_t>(f + 1)], wt_[2]));
            out.push_back(out_.apply(tanh_(add_rowvec(acc, bt_))));
        }
        return out;
    }

private:
    int64_t t_obs_, ch_;
    Linear seed_, out_;
    Var wt_[3], bt_;
};

// One shared embedding expanded into t_obs time channels by per-frame
// channel-wise affine maps (a 1 -> t_obs channel convolution).
class OmTimeExtrapolator final : public OmBlock {
public:
    OmTimeExtrapolator(int64_t in, int64_t t_obs, int64_t ch, ParamStore& ps, const std::string& p, Rng& rng)
        : t_obs_(t_obs), embed_(ps, p + ".embed", in, ch, rng), out_(ps, p + ".out", ch, 2, rng) {
        variant_ = 2;
        gain_.reserve(static_cast<size_t>(t_obs));
        shift_.reserve(static_cast<size_t>(t_obs));
        for (int64_t f = 0; f < t_obs; ++f) {
            gain_.push_back(ps.add(p + ".gain" + std::to_string(f), Mat::uniform(1, ch, 0.5, 1.5, rng)));
            shift_.push_back(ps.add(p + ".shift" + std::to_string(f), Mat::zeros(1, ch)));
        }
    }
    std::vector<Var> apply(const Var& h_all) const override {
        Var e = tanh_(embed_.apply(h_all));
        std::vector<Var> out;
        out.reserve(static_cast<size_t>(t_obs_));
        for (int64_t f = 0; f < t_obs_; ++f) {
            Var u = add_rowvec(mul_rowvec(e, gain_[static_cast<size_t>(f)]), shift_[static_cast<size_t>(f)]);
            out.push_back(out_.apply(tanh_(u)));
        }
        return out;
    }

private:
    int64_t t_obs_;
    Linear embed_, out_;
    std::vector<Var> gain_, shift_;
};

class OmFullyConnected final : public OmBlock {
public:
    OmFullyConnected(int64_t in, int64_t t_obs, int64_t h, ParamStore& ps, const std::string& p, Rng& rng)
        : t_obs_(t_obs), l1_(ps, p + ".l1", in, h, rng), l2_(ps, p + ".l2", h, t_obs * 2, rng) {
        variant_ = 3;
    }
    std::vector<Var> apply(const Var& h_all) const override {
        Var y = l2_.apply(tanh_(l1_.apply(h_all)));
        std::vector<Var> out;
        out.reserve(static_cast<size_t>(t_obs_));
        for (int64_t f = 0; f < t_obs_; ++f) out.push_back(slice_cols(y, f * 2, 2));
        return out;
    }

private:
    int64_t t_obs_;
    Linear l1_, l2_;
};

class OmRecurrent final : public OmBlock {
public:
    OmRecurrent(int64_t in, int64_t t_obs, int64_t h, ParamStore& ps, const std::string& p, Rng& rng)
        : t_obs_(t_obs), hidden_(h), init_(ps, p + ".init", in, h, rng), cell_(ps, p + ".gru", h, h, rng),
          out_(ps, p + ".out", h, 2, rng) {
        variant_ = 4;
        step_in_ = ps.add(p + ".step_in", Mat::glorot(1, h, rng));
    }
    std::vector<Var> apply(const Var& h_all) const override {
        const int64_t n = h_all.rows();
        Var h = tanh_(init_.apply(h_all));
        Mat ones(n, 1, 1.0);
        Var x = matmul(constant(ones), step_in_); // learned step input, same for every pedestrian
        std::vector<Var> out;
        out.reserve(static_cast<size_t>(t_obs_));
        unrolled_ = 0;
        for (int64_t f = 0; f < t_obs_; ++f) {
            h = cell_.step(x, h);
            ++unrolled_;
            out.push_back(out_.apply(h));
        }
        return out;
    }
    int64_t last_unroll_steps() const override { return unrolled_; }

private:
    int64_t t_obs_, hidden_;
    Linear init_;
    GruCell cell_;
    Linear out_;
    Var step_in_;
    mutable int64_t unrolled_ = 0;
};

} // namespace

std::unique_ptr<OmBlock> OmBlock::make(int variant, int64_t in_width, int64_t t_obs, const BlockConfig& cfg,
                                       ParamStore& ps, const std::string& prefix, Rng& rng) {
    const int64_t h = cfg.hidden;
    switch (variant) {
    case 1:
        return std::make_unique<OmTcn>(in_width, t_obs, h / 2 > 0 ? h / 2 : 1, ps, prefix, rng);
    case 2:
        return std::make_unique<OmTimeExtrapolator>(in_width, t_obs, h, ps, prefix, rng);
    case 3:
        return std::make_unique<OmFullyConnected>(in_width, t_obs, h, ps, prefix, rng);
    case 4:
        return std::make_unique<OmRecurrent>(in_width, t_obs, h, ps, prefix, rng);
    default:
        fail_config("om variant out of range: " + std::to_string(variant));
    }
}

// ---------------------------------------------------------------------------
// Auxiliaries
// ---------------------------------------------------------------------------

MemoryQuery memory_query(const Feature& features, const Var& items) {
    const int64_t m = items.rows();
    check_config(m >= 2, "memory bank needs at least 2 items");
    check_config(features.width() == items.cols(), "memory query width mismatch");

    MemoryQuery q;
    if (features.per_frame()) {
        q.queries = concat_rows(features.frames); // frame-major: row f*N + i
        const int64_t n = features.n();
        q.group_of.resize(static_cast<size_t>(q.queries.rows()));
        for (int64_t r = 0; r < q.queries.rows(); ++r) q.group_of[static_cast<size_t>(r)] = r % n;
        q.n_groups = n;
    } else {
        q.queries = features.pooled;
        q.group_of.resize(static_cast<size_t>(q.queries.rows()));
        for (int64_t r = 0; r < q.queries.rows(); ++r) q.group_of[static_cast<size_t>(r)] = r;
        q.n_groups = q.queries.rows();
    }

    // Cosine similarities.
    Var qn = mul_colvec(q.queries, inv(add_scalar(sqrt0(sqnorm_rows(q.queries)), 1e-12)));
    Var in = mul_colvec(items, inv(add_scalar(sqrt0(sqnorm_rows(items)), 1e-12)));
    Var sim = matmul_nt(qn, in); // R x M
    Var weights = softmax_rows(sim);
    q.retrieved = add(q.queries, matmul(weights, items));

    const Mat& s = sim.val();
    q.nearest.resize(static_cast<size_t>(s.r));
    q.second_nearest.resize(static_cast<size_t>(s.r));
    for (int64_t r = 0; r < s.r; ++r) {
        int64_t best = 0, second = -1;
        for (int64_t j = 1; j < m; ++j)
            if (s.at(r, j) > s.at(r, best)) best = j;
        for (int64_t j = 0; j < m; ++j) {
            if (j == best) continue;
            if (second < 0 || s.at(r, j) > s.at(r, second)) second = j;
        }
        q.nearest[static_cast<size_t>(r)] = best;
        q.second_nearest[static_cast<size_t>(r)] = second;
    }
    return q;
}

Var cluster_assign(const Var& h_all, const Var& centers) {
    check_config(centers.rows() >= 2, "cluster head needs at least 2 centers");
    check_config(h_all.cols() == centers.cols(), "cluster center width mismatch");
    // Squared distances via the expansion ||h||^2 + ||mu||^2 - 2 h.mu.
    Var d2 = add(outer_sum(sqnorm_rows(h_all), sqnorm_rows(centers)), scale(matmul_nt(h_all, centers), -2.0));
    Var kernel = inv(add_scalar(d2, 1.0));
    return mul_colvec(kernel, inv(row_sums(kernel)));
}

RsrProjection rsr_project(const Var& h_all, const Var& a) {
    check_config(a.cols() == h_all.cols(), "rsr matrix width mismatch");
    RsrProjection out;
    out.projected = matmul_nt(h_all, a);    // N x d
    out.reconstructed = matmul(out.projected, a); // N x H_all
    return out;
}

Discriminator::Discriminator(int64_t t_pred, int64_t t_obs, int64_t hidden, ParamStore& ps, Rng& rng) {
    const int64_t in = (t_pred + t_obs) * 2;
    l1_ = Linear(ps, "disc.l1", in, hidden, rng);
    l2_ = Linear(ps, "disc.l2", hidden, hidden / 2 > 0 ? hidden / 2 : 1, rng);
    l3_ = Linear(ps, "disc.l3", hidden / 2 > 0 ? hidden / 2 : 1, 1, rng);
}

Discriminator::Score Discriminator::score(const Var& future_flat, const Var& history_flat) const {
    check_config(future_flat.rows() == history_flat.rows(), "discriminator row mismatch");
    Var x = concat_cols({future_flat, history_flat});
    Var h1 = tanh_(l1_.apply(x));
    Var feat = tanh_(l2_.apply(h1));
    Score s;
    s.features = feat;
    s.prob = sigmoid(l3_.apply(feat));
    return s;
}

} // namespace tpad::blocks
