#include "tpad/model.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "tpad/error.hpp"
#include "tpad/serialize.hpp"

namespace tpad::model {

using namespace tpad::ad;
using losses::kNumComponents;

double lambda_option_value(int slot, int option) {
    if (slot == kLambdaSlotBase) return kLambda1Options[static_cast<size_t>(option)];
    return kLambdaOptions[static_cast<size_t>(option)];
}

TADSpec decode(const OperatorSequence& seq) {
    for (int s = 0; s < kNumSlots; ++s) {
        check_config(seq.choices[static_cast<size_t>(s)] >= 0 &&
                         seq.choices[static_cast<size_t>(s)] < kSlotOptions[static_cast<size_t>(s)],
                     "decode error: slot " + std::to_string(s + 1) + " value " +
                         std::to_string(seq.choices[static_cast<size_t>(s)]) + " outside [0, " +
                         std::to_string(kSlotOptions[static_cast<size_t>(s)]) + ")");
    }
    TADSpec spec;
    for (int s = 0; s < kArchSlots; ++s) spec.arch[static_cast<size_t>(s)] = seq.choices[static_cast<size_t>(s)] + 1;
    for (int i = 0; i < kNumComponents; ++i) {
        const int slot = kLambdaSlotBase + i;
        spec.weights.lambda[static_cast<size_t>(i)] =
            lambda_option_value(slot, seq.choices[static_cast<size_t>(slot)]);
    }
    for (int i = 0; i < kNumComponents; ++i) {
        const int slot = kGammaSlotBase + i;
        const bool use_lambda = seq.choices[static_cast<size_t>(slot)] == 1;
        // "use lambda" with a zero lambda coerces to 0.
        spec.weights.gamma[static_cast<size_t>(i)] =
            use_lambda ? spec.weights.lambda[static_cast<size_t>(i)] : 0.0;
    }
    spec.weights.validate();
    spec.aux = losses::aux_flags(spec.weights.lambda);
    return spec;
}

OperatorSequence encode(const TADSpec& spec) {
    OperatorSequence seq;
    for (int s = 0; s < kArchSlots; ++s) {
        const int v = spec.arch[static_cast<size_t>(s)] - 1;
        check_config(v >= 0 && v < kSlotOptions[static_cast<size_t>(s)],
                     "encode error: architecture slot " + std::to_string(s + 1));
        seq.choices[static_cast<size_t>(s)] = v;
    }
    for (int i = 0; i < kNumComponents; ++i) {
        const int slot = kLambdaSlotBase + i;
        const double v = spec.weights.lambda[static_cast<size_t>(i)];
        int idx = -1;
        for (int o = 0; o < kSlotOptions[static_cast<size_t>(slot)]; ++o)
            if (lambda_option_value(slot, o) == v) idx = o;
        check_config(idx >= 0, std::string("encode error: lambda value not an option for component ") +
                                   losses::kComponentNames[static_cast<size_t>(i)]);
        seq.choices[static_cast<size_t>(slot)] = idx;
    }
    for (int i = 0; i < kNumComponents; ++i)
        seq.choices[static_cast<size_t>(kGammaSlotBase + i)] = spec.weights.gamma[static_cast<size_t>(i)] != 0.0 ? 1 : 0;
    return seq;
}

namespace {
const char* kFexmNames[] = {"", "sparse-gcn", "mlp", "st-gcn", "recurrent", "gat"};
const char* kFenmNames[] = {"", "identity", "energy-residual", "attention-pool", "temporal-recurrent"};
const char* kIpmNames[] = {"", "real-position", "relative-position", "real+relative"};
const char* kFfmNames[] = {"", "concat-all", "concat-enhanced"};
const char* kOmNames[] = {"", "tcn", "time-extrapolator", "fully-connected", "recurrent"};
} // namespace

std::string describe(const TADSpec& spec) {
    std::ostringstream ss;
    ss << "architecture:\n";
    ss << "  ipm:       " << kIpmNames[spec.arch[0]] << "\n";
    ss << "  fexm_1st:  " << kFexmNames[spec.arch[1]] << "\n";
    ss << "  fexm_2nd:  " << kFexmNames[spec.arch[2]] << "\n";
    ss << "  fenm_1st:  " << kFenmNames[spec.arch[3]] << "\n";
    ss << "  fenm_2nd:  " << kFenmNames[spec.arch[4]] << "\n";
    ss << "  ffm:       " << kFfmNames[spec.arch[5]] << "\n";
    ss << "  om:        " << kOmNames[spec.arch[6]] << "\n";
    ss << "weights (lambda / gamma):\n";
    for (int i = 0; i < kNumComponents; ++i) {
        ss << "  " << losses::kComponentNames[static_cast<size_t>(i)] << ": "
           << spec.weights.lambda[static_cast<size_t>(i)] << " / " << spec.weights.gamma[static_cast<size_t>(i)]
           << "\n";
    }
    ss << "auxiliaries: ";
    bool any = false;
    if (spec.aux.memory) ss << (any ? ", " : "") << "memory", any = true;
    if (spec.aux.clustering) ss << (any ? ", " : "") << "clustering", any = true;
    if (spec.aux.rsr) ss << (any ? ", " : "") << "rsr", any = true;
    if (spec.aux.discriminator) ss << (any ? ", " : "") << "discriminator", any = true;
    if (!any) ss << "none";
    ss << "\n";
    return ss.str();
}

TADModel::TADModel(const TADSpec& spec, const ModelConfig& cfg, uint64_t seed)
    : spec_(spec), cfg_(cfg), seed_(seed) {
    spec_.weights.validate();
    check_config(spec_.aux == losses::aux_flags(spec_.weights.lambda), "spec auxiliary flags inconsistent");
    Rng rng(seed);
    blocks::BlockConfig bc;
    bc.hidden = cfg.hidden;

    const int64_t in_w = blocks::ipm_out_width(spec_.arch[0]);
    fexm1_ = blocks::FexmBlock::make(spec_.arch[1], in_w, cfg.t_pred, bc, params_, "fexm1", rng);
    fexm2_ = blocks::FexmBlock::make(spec_.arch[2], in_w, cfg.t_pred, bc, params_, "fexm2", rng);
    fenm1_ = blocks::FenmBlock::make(spec_.arch[3], cfg.hidden, bc, params_, "fenm1", rng);
    fenm2_ = blocks::FenmBlock::make(spec_.arch[4], cfg.hidden, bc, params_, "fenm2", rng);
    const int64_t h_all_w = blocks::ffm_out_width(spec_.arch[5], cfg.hidden);
    om_ = blocks::OmBlock::make(spec_.arch[6], h_all_w, cfg.t_obs, bc, params_, "om", rng);

    if (spec_.aux.memory)
        memory_items_ = params_.add("aux.memory.items", Mat::glorot(cfg.memory_items, cfg.hidden, rng));
    if (spec_.aux.clustering)
        cluster_centers_ = params_.add("aux.cluster.centers", Mat::glorot(cfg.cluster_centers, h_all_w, rng));
    if (spec_.aux.rsr) {
        const int64_t d = std::max<int64_t>(1, h_all_w / 2);
        rsr_matrix_ = params_.add("aux.rsr.a", Mat::glorot(d, h_all_w, rng));
    }
    if (spec_.aux.discriminator) disc_.emplace(cfg.t_pred, cfg.t_obs, cfg.hidden, disc_params_, rng);

    opt_ = optim::Adam(params_.vars(), cfg.lr);
    disc_opt_ = optim::Adam(disc_params_.vars(), cfg.lr);
}

void TADModel::note_warning(const std::string& w) const {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    if (warned_structural_) return;
    warned_structural_ = true;
    warnings_.push_back(w);
}

TADModel::Forward TADModel::forward(const TrajArray& y_input, const TrajArray& x_context) const {
    check_config(y_input.n == x_context.n, "forward: pedestrian count mismatch");
    check_config(y_input.t == cfg_.t_pred && x_context.t == cfg_.t_obs, "forward: frame count mismatch");
    check_config(y_input.all_finite() && x_context.all_finite(), "forward: non-finite input");

    // Work in a window-local frame: each pedestrian's coordinates are
    // centered on its last observed position. The prediction is mapped back
    // to world coordinates, so the centering never leaks outside forward().
    Mat last_obs = x_context.frame(cfg_.t_obs - 1);
    TrajArray y_local = y_input;
    for (int64_t i = 0; i < y_local.n; ++i)
        for (int64_t f = 0; f < y_local.t; ++f)
            for (int64_t c = 0; c < 2; ++c) y_local.at(i, f, c) -= last_obs.at(i, c);
    Mat anchor = Mat::zeros(y_local.n, 2); // last observed position in the local frame

    auto in_mats = blocks::ipm_apply(spec_.arch[0], y_local, &anchor);
    std::vector<Var> in_frames;
    in_frames.reserve(in_mats.size());
    for (auto& m : in_mats) in_frames.push_back(constant(std::move(m)));

    blocks::Feature h1 = fexm1_->apply(in_frames);
    blocks::Feature h2 = fexm2_->apply(in_frames);
    std::string warn1, warn2;
    blocks::Feature h1e = fenm1_->apply(in_frames, h1, &warn1);
    blocks::Feature h2e = fenm2_->apply(in_frames, h2, &warn2);
    if (!warn1.empty()) note_warning("fenm_1st: " + warn1);
    if (!warn2.empty()) note_warning("fenm_2nd: " + warn2);

    Forward f;
    f.h1e = h1e;
    f.h_all = blocks::ffm_apply(spec_.arch[5], h1, h2, h1e, h2e);
    auto local_frames = om_->apply(f.h_all);
    Var shift = constant(last_obs);
    std::vector<Var> world_frames;
    world_frames.reserve(local_frames.size());
    for (auto& fr : local_frames) world_frames.push_back(add(fr, shift));
    f.opred_flat = concat_cols(world_frames);
    f.future_flat = constant(y_local.flat());
    return f;
}

std::array<Var, kNumComponents> TADModel::loss_rows(const Forward& fwd, const TrajArray& x_context,
                                                    const std::array<bool, kNumComponents>& need) const {
    std::array<Var, kNumComponents> rows;
    Var o_true = constant(x_context.flat());

    if (need[0]) rows[0] = losses::loss_out(o_true, fwd.opred_flat);

    if (need[1] || need[2]) {
        check_config(disc_.has_value(), "discriminator losses requested without the auxiliary");
        auto fake = disc_->score(fwd.future_flat, fwd.opred_flat);
        if (need[1]) rows[1] = losses::loss_adv(fake.prob);
        if (need[2]) {
            auto real = disc_->score(fwd.future_flat, o_true);
            rows[2] = losses::loss_fea(real.features, fake.features);
        }
    }

    if (need[3] || need[4]) {
        check_config(memory_items_.defined(), "memory losses requested without the auxiliary");
        auto mq = blocks::memory_query(fwd.h1e, memory_items_);
        Var p_p = gather_rows(memory_items_, mq.nearest);
        Var p_n = gather_rows(memory_items_, mq.second_nearest);
        auto ml = losses::loss_memory(mq.queries, p_p, p_n, mq.group_of, mq.n_groups, cfg_.sep_margin,
                                      cfg_.sep_raw_form);
        if (need[3]) rows[3] = ml.compact;
        if (need[4]) rows[4] = ml.separate;
    }

    if (need[5]) {
        check_config(cluster_centers_.defined(), "clustering loss requested without the auxiliary");
        rows[5] = losses::loss_cluster(blocks::cluster_assign(fwd.h_all, cluster_centers_));
    }

    if (need[6] || need[7]) {
        check_config(rsr_matrix_.defined(), "rsr losses requested without the auxiliary");
        auto rl = losses::loss_rsr(fwd.h_all, rsr_matrix_);
        if (need[6]) rows[6] = rl.per_row;
        if (need[7]) rows[7] = rl.structural;
    }
    return rows;
}

losses::LossVector TADModel::loss_vector(const TrajArray& y_input, const TrajArray& x_context,
                                         const std::array<bool, kNumComponents>& need) const {
    auto fwd = forward(y_input, x_context);
    auto rows = loss_rows(fwd, x_context, need);
    losses::LossVector lf;
    lf.components = Mat::zeros(kNumComponents, y_input.n);
    for (int j = 0; j < kNumComponents; ++j) {
        if (!rows[static_cast<size_t>(j)].defined()) continue;
        const Mat& v = rows[static_cast<size_t>(j)].val();
        for (int64_t p = 0; p < y_input.n; ++p) lf.components.at(j, p) = v[p];
    }
    return lf;
}

void TADModel::train(const std::vector<data::TrajectoryWindow>& windows, int epochs) {
    check_config(!windows.empty(), "training needs at least one window");
    std::array<bool, kNumComponents> need{};
    for (int j = 0; j < kNumComponents; ++j) need[static_cast<size_t>(j)] = spec_.weights.lambda[static_cast<size_t>(j)] != 0.0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        double epoch_sum = 0.0;
        for (size_t wi = 0; wi < windows.size(); ++wi) {
            const auto& w = windows[wi];
            auto fwd = forward(w.future, w.history);
            auto rows = loss_rows(fwd, w.history, need);

            Var total;
            for (int j = 0; j < kNumComponents; ++j) {
                if (!need[static_cast<size_t>(j)]) continue;
                Var weighted = scale(rows[static_cast<size_t>(j)], spec_.weights.lambda[static_cast<size_t>(j)]);
                total = total.defined() ? add(total, weighted) : weighted;
            }
            Var scalar = mean_all(total);
            const double loss_value = scalar.val()[0];
            if (!std::isfinite(loss_value)) {
                std::string offender = "total";
                for (int j = 0; j < kNumComponents; ++j) {
                    if (!need[static_cast<size_t>(j)]) continue;
                    if (!rows[static_cast<size_t>(j)].val().all_finite()) {
                        offender = losses::kComponentNames[static_cast<size_t>(j)];
                        break;
                    }
                }
                fail_numeric("non-finite loss component '" + offender + "' at epoch " + std::to_string(epoch) +
                             ", window " + std::to_string(wi));
            }
            epoch_sum += loss_value;

            backward(scalar);
            // The adversarial path deposits gradients in discriminator
            // parameters; those belong to the discriminator step only.
            clear_grads(disc_params_.vars());
            opt_.step();

            if (disc_) {
                auto real = disc_->score(fwd.future_flat, constant(w.history.flat()));
                auto fake = disc_->score(fwd.future_flat, constant(fwd.opred_flat.val()));
                Var d_loss = mean_all(add(losses::loss_adv(real.prob),
                                          scale(log_(clamp(add_scalar(scale(fake.prob, -1.0), 1.0), 1e-6, 1.0)), -1.0)));
                if (!std::isfinite(d_loss.val()[0]))
                    fail_numeric("non-finite discriminator loss at epoch " + std::to_string(epoch) + ", window " +
                                 std::to_string(wi));
                backward(d_loss);
                disc_opt_.step();
            }
        }
        stats_.epoch_mean_loss.push_back(epoch_sum / static_cast<double>(windows.size()));
    }
}

std::vector<double> TADModel::score(const TrajArray& y_input, const TrajArray& x_context) const {
    check_config(!spec_.weights.gamma_all_zero(), "anomaly score undefined: all scoring gates are zero");
    std::array<bool, kNumComponents> need{};
    for (int j = 0; j < kNumComponents; ++j) need[static_cast<size_t>(j)] = spec_.weights.gamma[static_cast<size_t>(j)] != 0.0;
    auto lf = loss_vector(y_input, x_context, need);
    return losses::anomaly_score(lf, spec_.weights);
}

double TADModel::mean_score(const TrajArray& y_input, const TrajArray& x_context) const {
    auto s = score(y_input, x_context);
    double acc = 0.0;
    for (double v : s) acc += v;
    return acc / static_cast<double>(s.size());
}

namespace {
constexpr char kModelMagic[8] = {'T', 'P', 'A', 'D', 'M', 'D', 'L', '1'};
}

void TADModel::save(const std::filesystem::path& path) const {
    std::ostringstream os(std::ios::binary);
    io::write_magic(os, kModelMagic);
    io::write_u32(os, 1);
    auto seq = encode(spec_);
    for (int v : seq.choices) io::write_u32(os, static_cast<uint32_t>(v));
    io::write_i64(os, cfg_.hidden);
    io::write_i64(os, cfg_.t_obs);
    io::write_i64(os, cfg_.t_pred);
    io::write_i64(os, cfg_.memory_items);
    io::write_i64(os, cfg_.cluster_centers);
    io::write_f64(os, cfg_.lr);
    io::write_f64(os, cfg_.sep_margin);
    io::write_u32(os, cfg_.sep_raw_form ? 1 : 0);
    io::write_i64(os, static_cast<int64_t>(seed_));
    params_.save(os);
    disc_params_.save(os);
    io::write_u32(os, static_cast<uint32_t>(stats_.epoch_mean_loss.size()));
    io::write_f64_array(os, stats_.epoch_mean_loss);
    io::atomic_write(path, os.str());

    // Human-readable sidecar with the decoded design.
    std::ostringstream txt;
    txt << "tpad trajectory AD model\n";
    txt << "sequence:";
    for (int v : seq.choices) txt << ' ' << v;
    txt << "\n\n" << describe(spec_);
    auto sidecar = path;
    sidecar += ".spec.txt";
    io::atomic_write(sidecar, txt.str());
}

TADModel TADModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    check_data(static_cast<bool>(is), "cannot open model checkpoint: " + path.string());
    check_data(io::check_magic(is, kModelMagic), "not a model checkpoint: " + path.string());
    check_data(io::read_u32(is) == 1, "unsupported model checkpoint version");
    OperatorSequence seq;
    for (auto& v : seq.choices) v = static_cast<int>(io::read_u32(is));
    ModelConfig cfg;
    cfg.hidden = io::read_i64(is);
    cfg.t_obs = io::read_i64(is);
    cfg.t_pred = io::read_i64(is);
    cfg.memory_items = io::read_i64(is);
    cfg.cluster_centers = io::read_i64(is);
    cfg.lr = io::read_f64(is);
    cfg.sep_margin = io::read_f64(is);
    cfg.sep_raw_form = io::read_u32(is) != 0;
    uint64_t seed = static_cast<uint64_t>(io::read_i64(is));

    TADModel m(decode(seq), cfg, seed);
    m.params_.load(is);
    m.disc_params_.load(is);
    uint32_t hist = io::read_u32(is);
    m.stats_.epoch_mean_loss = io::read_f64_array(is, hist);
    return m;
}

} // namespace tpad::model
