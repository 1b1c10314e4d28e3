#include "tpad/losses.hpp"

#include <cmath>

#include "tpad/error.hpp"

namespace tpad::losses {

using namespace tpad::ad;

namespace {
bool is_lambda_option(double v, bool allow_zero) {
    if (v == 0.1 || v == 0.01 || v == 1.0) return true;
    return allow_zero && v == 0.0;
}
} // namespace

void Weights::validate() const {
    for (int i = 0; i < kNumComponents; ++i) {
        check_config(is_lambda_option(lambda[static_cast<size_t>(i)], i != 0),
                     std::string("invalid lambda for component ") + kComponentNames[static_cast<size_t>(i)]);
        const double g = gamma[static_cast<size_t>(i)];
        check_config(g == 0.0 || g == lambda[static_cast<size_t>(i)],
                     std::string("gamma must be 0 or its paired lambda for component ") +
                         kComponentNames[static_cast<size_t>(i)]);
    }
}

bool Weights::gamma_all_zero() const {
    for (double g : gamma)
        if (g != 0.0) return false;
    return true;
}

AuxFlags aux_flags(const std::array<double, kNumComponents>& lambda) {
    AuxFlags f;
    f.discriminator = lambda[1] != 0.0 || lambda[2] != 0.0;
    f.memory = lambda[3] != 0.0 || lambda[4] != 0.0;
    f.clustering = lambda[5] != 0.0;
    f.rsr = lambda[6] != 0.0 || lambda[7] != 0.0;
    return f;
}

Var loss_out(const Var& o_true_flat, const Var& o_pred_flat) {
    check_config(o_true_flat.val().same_shape(o_pred_flat.val()), "loss_out shape mismatch");
    return sqrt0(sqnorm_rows(sub(o_true_flat, o_pred_flat)));
}

Var loss_adv(const Var& disc_prob_on_fake, double eps) {
    return scale(log_(clamp(disc_prob_on_fake, eps, 1.0 - eps)), -1.0);
}

Var loss_fea(const Var& feat_true, const Var& feat_pred) {
    check_config(feat_true.val().same_shape(feat_pred.val()), "loss_fea shape mismatch");
    return sqrt0(sqnorm_rows(sub(feat_true, feat_pred)));
}

MemoryLoss loss_memory(const Var& queries, const Var& p_p, const Var& p_n, const std::vector<int64_t>& group_of,
                       int64_t n_groups, double margin, bool raw_form) {
    check_config(queries.val().same_shape(p_p.val()) && queries.val().same_shape(p_n.val()),
                 "loss_memory shape mismatch");
    MemoryLoss out;
    Var d2_near = sqnorm_rows(sub(queries, p_p));
    out.compact = sum_groups(d2_near, group_of, n_groups);
    Var d_near = sqrt0(d2_near);
    Var d_second = sqrt0(sqnorm_rows(sub(queries, p_n)));
    Var gap = sub(d_near, d_second);
    Var sep = raw_form ? gap : relu(add_scalar(gap, margin));
    out.separate = sum_groups(sep, group_of, n_groups);
    return out;
}

Var loss_cluster(const Var& b) {
    // Target distribution: d_ic proportional to b_ic^2 / sum_i b_ic,
    // renormalized per row, differentiated through.
    Var freq = col_sums(b);                       // 1 x C
    Var sharpened = mul_rowvec(square(b), inv(freq));
    Var d = mul_colvec(sharpened, inv(row_sums(sharpened)));
    // sum_c b * (log b - log d); the log floor makes 0*log0 contribute 0.
    Var terms = mul(b, sub(log_(b), log_(d)));
    return row_sums(terms);
}

RsrLoss loss_rsr(const Var& h_all, const Var& a) {
    RsrLoss out;
    Var recon = matmul(matmul_nt(h_all, a), a);
    out.per_row = sqnorm_rows(sub(h_all, recon));
    Var gram = matmul_nt(a, a); // d x d
    Var frob = sum_all(square(sub(gram, constant(Mat::identity(a.rows())))));
    // Broadcast the structural scalar to every pedestrian.
    Mat ones(h_all.rows(), 1, 1.0);
    out.structural = matmul(constant(ones), frob);
    return out;
}

double training_loss(const LossVector& lf, const Weights& w) {
    w.validate();
    check_config(lf.components.r == kNumComponents, "loss vector must have 8 rows");
    const int64_t n = lf.n();
    check_config(n >= 1, "loss vector must cover at least one pedestrian");
    double total = 0.0;
    for (int64_t p = 0; p < n; ++p) {
        double acc = 0.0;
        for (int j = 0; j < kNumComponents; ++j) acc += w.lambda[static_cast<size_t>(j)] * lf.components.at(j, p);
        total += acc;
    }
    return total / static_cast<double>(n);
}

std::vector<double> anomaly_score(const LossVector& lf, const Weights& w) {
    w.validate();
    check_config(!w.gamma_all_zero(), "anomaly score undefined: all scoring gates are zero");
    check_config(lf.components.r == kNumComponents, "loss vector must have 8 rows");
    const int64_t n = lf.n();
    std::vector<double> scores(static_cast<size_t>(n), 0.0);
    for (int64_t p = 0; p < n; ++p) {
        double acc = 0.0;
        for (int j = 0; j < kNumComponents; ++j) acc += w.gamma[static_cast<size_t>(j)] * lf.components.at(j, p);
        scores[static_cast<size_t>(p)] = acc;
    }
    return scores;
}

} // namespace tpad::losses
