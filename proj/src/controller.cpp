#include "tpad/controller.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tpad/error.hpp"
#include "tpad/serialize.hpp"

namespace tpad::search {

using namespace tpad::ad;
using model::kGammaSlotBase;
using model::kLambdaSlotBase;
using model::kNumSlots;
using model::kSlotOptions;

double update_baseline(double baseline, double reward, double decay) {
    return decay * baseline + (1.0 - decay) * reward;
}

Controller::Controller(const ControllerConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    Rng rng(init_seed);
    start_ = params_.add("start", Mat::glorot(1, cfg.embedding_size, rng));
    cell_ = blocks::GruCell(params_, "gru", cfg.embedding_size, cfg.hidden_size, rng);
    head_w_.reserve(kNumSlots);
    head_b_.reserve(kNumSlots);
    embeddings_.reserve(kNumSlots);
    for (int s = 0; s < kNumSlots; ++s) {
        const int k = kSlotOptions[static_cast<size_t>(s)];
        head_w_.push_back(params_.add("head" + std::to_string(s) + ".w", Mat::glorot(cfg.hidden_size, k, rng)));
        head_b_.push_back(params_.add("head" + std::to_string(s) + ".b", Mat::zeros(1, k)));
        embeddings_.push_back(params_.add("emb" + std::to_string(s), Mat::glorot(k, cfg.embedding_size, rng)));
    }
    opt_ = optim::Adam(params_.vars(), cfg.lr);
}

std::vector<char> Controller::slot_mask(int slot, const model::OperatorSequence& partial) {
    std::vector<char> mask(static_cast<size_t>(kSlotOptions[static_cast<size_t>(slot)]), 1);
    if (slot >= kGammaSlotBase) {
        const int lambda_slot = kLambdaSlotBase + (slot - kGammaSlotBase);
        const double lv = model::lambda_option_value(lambda_slot, partial.choices[static_cast<size_t>(lambda_slot)]);
        if (lv == 0.0) mask[1] = 0; // "use lambda" unavailable when lambda is 0
    }
    return mask;
}

Controller::Sample Controller::run(Rng* rng, const model::OperatorSequence* fixed) const {
    Sample out;
    out.logps.reserve(kNumSlots);
    out.entropies.reserve(kNumSlots);
    Var h = constant(Mat::zeros(1, cfg_.hidden_size));
    Var x = start_;
    for (int s = 0; s < kNumSlots; ++s) {
        h = cell_.step(x, h);
        Var logits = add_rowvec(matmul(h, head_w_[static_cast<size_t>(s)]), head_b_[static_cast<size_t>(s)]);
        auto mask = slot_mask(s, out.seq);
        int choice;
        if (fixed) {
            choice = fixed->choices[static_cast<size_t>(s)];
            check_config(mask[static_cast<size_t>(choice)] != 0, "sequence violates the scoring-gate mask at slot " +
                                                                     std::to_string(s + 1));
        } else {
            auto probs = cat_probs(logits.val(), mask);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const double r = u(*rng);
            double acc = 0.0;
            choice = -1;
            for (size_t k = 0; k < probs.size(); ++k) {
                if (!mask[k]) continue;
                acc += probs[k];
                choice = static_cast<int>(k); // falls back to the last unmasked option
                if (r <= acc) break;
            }
            check_numeric(choice >= 0, "controller sampled from an all-masked slot");
        }
        out.seq.choices[static_cast<size_t>(s)] = choice;
        out.logps.push_back(cat_logprob(logits, mask, choice));
        out.entropies.push_back(cat_entropy(logits, mask));
        x = gather_rows(embeddings_[static_cast<size_t>(s)], {choice});
    }
    return out;
}

Controller::Sample Controller::sample(Rng& rng) const { return run(&rng, nullptr); }

double Controller::sequence_logprob(const model::OperatorSequence& seq) const {
    auto s = run(nullptr, &seq);
    double acc = 0.0;
    for (const auto& lp : s.logps) acc += lp.val()[0];
    return acc;
}

void Controller::reinforce_step(const Sample& sample, double reward, double baseline) {
    const double advantage = reward - baseline;
    Var objective;
    for (size_t t = 0; t < sample.logps.size(); ++t) {
        Var term = scale(sample.logps[t], -advantage);
        if (cfg_.entropy_coef != 0.0) term = add(term, scale(sample.entropies[t], -cfg_.entropy_coef));
        objective = objective.defined() ? add(objective, term) : term;
    }
    backward(objective);
    opt_.step();
    ++step_count_;
}

void Controller::push_reward(double reward) {
    if (!baseline_.has_value())
        baseline_ = reward;
    else
        baseline_ = update_baseline(*baseline_, reward, cfg_.baseline_decay);
}

namespace {
constexpr char kCtlMagic[8] = {'T', 'P', 'A', 'D', 'C', 'T', 'L', '1'};
}

void Controller::save(const std::filesystem::path& path, const Rng& rng) const {
    std::ostringstream os(std::ios::binary);
    io::write_magic(os, kCtlMagic);
    io::write_u32(os, 1);
    io::write_i64(os, cfg_.embedding_size);
    io::write_i64(os, cfg_.hidden_size);
    io::write_u32(os, baseline_.has_value() ? 1 : 0);
    io::write_f64(os, baseline_.value_or(0.0));
    io::write_i64(os, step_count_);
    params_.save(os);
    std::ostringstream rng_state;
    rng_state << rng;
    io::write_string(os, rng_state.str());
    io::atomic_write(path, os.str());
}

void Controller::load(const std::filesystem::path& path, Rng& rng) {
    std::ifstream is(path, std::ios::binary);
    check_data(static_cast<bool>(is), "cannot open controller checkpoint: " + path.string());
    check_data(io::check_magic(is, kCtlMagic), "corrupt resume state: " + path.string() +
                                                   " is not a controller checkpoint");
    check_data(io::read_u32(is) == 1, "unsupported controller checkpoint version");
    check_data(io::read_i64(is) == cfg_.embedding_size && io::read_i64(is) == cfg_.hidden_size,
               "controller checkpoint size mismatch");
    const bool has_baseline = io::read_u32(is) != 0;
    const double b = io::read_f64(is);
    baseline_ = has_baseline ? std::optional<double>(b) : std::nullopt;
    step_count_ = io::read_i64(is);
    params_.load(is);
    std::istringstream rng_state(io::read_string(is));
    rng_state >> rng;
    check_data(static_cast<bool>(rng_state), "corrupt resume state: bad rng state");
}

model::OperatorSequence sample_uniform_sequence(Rng& rng) {
    model::OperatorSequence seq;
    for (int s = 0; s < kNumSlots; ++s) {
        auto mask = Controller::slot_mask(s, seq);
        std::vector<int> options;
        for (size_t k = 0; k < mask.size(); ++k)
            if (mask[k]) options.push_back(static_cast<int>(k));
        std::uniform_int_distribution<size_t> pick(0, options.size() - 1);
        seq.choices[static_cast<size_t>(s)] = options[pick(rng)];
    }
    return seq;
}

} // namespace tpad::search
