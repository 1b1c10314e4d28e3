#include "tpad/search.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tpad/error.hpp"
#include "tpad/serialize.hpp"
#include "tpad/tpeval.hpp"

namespace tpad::search {

using nlohmann::json;

double evaluate_candidate(const model::OperatorSequence& seq, const data::DatasetSplit& split,
                          const EvalOptions& opts, std::string* diagnostic) {
    check_config(!split.val.empty() && !split.val_neg.empty(), "candidate evaluation needs validation windows and negatives");
    model::TADSpec spec = decode(seq);
    if (spec.weights.gamma_all_zero()) {
        if (diagnostic) *diagnostic = "all-zero scoring gates; chance reward";
        return 0.5;
    }
    try {
        model::TADModel m(spec, opts.model, opts.seed);
        m.train(split.train, opts.epochs);

        std::vector<double> pos(split.val.size()), neg(split.val_neg.size());
#pragma omp parallel for schedule(dynamic)
        for (int64_t i = 0; i < static_cast<int64_t>(split.val.size()); ++i) {
            const auto& w = split.val[static_cast<size_t>(i)];
            pos[static_cast<size_t>(i)] = m.mean_score(w.future, w.history);
        }
#pragma omp parallel for schedule(dynamic)
        for (int64_t i = 0; i < static_cast<int64_t>(split.val_neg.size()); ++i) {
            const auto& nw = split.val_neg[static_cast<size_t>(i)];
            const auto& base = split.val[static_cast<size_t>(nw.base_index)];
            neg[static_cast<size_t>(i)] = m.mean_score(nw.perturbed_future, base.history);
        }
        for (double v : pos)
            if (!std::isfinite(v)) fail_numeric("non-finite validation score");
        for (double v : neg)
            if (!std::isfinite(v)) fail_numeric("non-finite validation score");
        return tpeval::auc(pos, neg);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::numeric) {
            if (diagnostic) *diagnostic = std::string("training diverged: ") + e.what();
            return 0.5;
        }
        throw;
    }
}

namespace {

struct HistorySink {
    std::filesystem::path history_path;
    std::ofstream stream;

    explicit HistorySink(const std::filesystem::path& run_dir) {
        if (run_dir.empty()) return;
        std::filesystem::create_directories(run_dir);
        history_path = run_dir / "history.jsonl";
        stream.open(history_path, std::ios::app);
        check_data(static_cast<bool>(stream), "cannot open history file: " + history_path.string());
    }

    void append(const SearchRecord& rec) {
        if (!stream.is_open()) return;
        stream << record_to_json(rec) << "\n";
        stream.flush();
    }
};

SearchResult finish(std::vector<SearchRecord> history, const SearchOptions& opts) {
    SearchResult res;
    res.history = std::move(history);
    check_config(!res.history.empty(), "search produced no candidates");
    res.best = res.history.front();
    for (const auto& rec : res.history)
        if (rec.reward > res.best.reward) res.best = rec;
    if (!opts.run_dir.empty()) write_curve_csv(res.history, opts.run_dir / "curve.csv");
    return res;
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

SearchResult run_search_with_reward(const RewardFn& reward, const SearchOptions& opts) {
    check_config(opts.budget > 0, "search budget must be positive");
    Controller ctrl(opts.controller, opts.seed);
    Rng rng(opts.seed + 0x9e3779b97f4a7c15ull);

    std::vector<SearchRecord> history;
    double base_time = 0.0;
    if (opts.resume && !opts.run_dir.empty() &&
        std::filesystem::exists(opts.run_dir / "history.jsonl")) {
        history = load_history(opts.run_dir / "history.jsonl");
        for (const auto& rec : history) base_time = std::max(base_time, rec.wall_time);
        if (!history.empty()) {
            check_data(std::filesystem::exists(opts.run_dir / "controller.ckpt"),
                       "corrupt resume state: history exists but controller checkpoint is missing");
            ctrl.load(opts.run_dir / "controller.ckpt", rng);
        }
    }

    HistorySink sink(opts.run_dir);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = static_cast<int>(history.size()); i < opts.budget; ++i) {
        auto sample = ctrl.sample(rng);
        SearchRecord rec;
        rec.index = i;
        rec.seq = sample.seq;
        rec.strategy = "reinforce";
        rec.reward = reward(sample.seq, &rec.diagnostic);
        check_config(rec.reward >= 0.0 && rec.reward <= 1.0, "reward must lie in [0, 1]");

        const double baseline = ctrl.baseline().value_or(rec.reward);
        ctrl.reinforce_step(sample, rec.reward, baseline);
        ctrl.push_reward(rec.reward);

        rec.wall_time = base_time + elapsed_seconds(t0);
        history.push_back(rec);
        sink.append(rec);
        if (!opts.run_dir.empty() && (i % std::max(1, opts.checkpoint_every) == 0 || i + 1 == opts.budget))
            ctrl.save(opts.run_dir / "controller.ckpt", rng);
    }
    return finish(std::move(history), opts);
}

SearchResult random_search_with_reward(const RewardFn& reward, const SearchOptions& opts) {
    check_config(opts.budget > 0, "search budget must be positive");
    Rng rng(opts.seed + 0x9e3779b97f4a7c15ull);

    std::vector<SearchRecord> history;
    double base_time = 0.0;
    if (opts.resume && !opts.run_dir.empty() &&
        std::filesystem::exists(opts.run_dir / "history.jsonl")) {
        history = load_history(opts.run_dir / "history.jsonl");
        for (const auto& rec : history) base_time = std::max(base_time, rec.wall_time);
        // Replay the candidate stream to restore the rng position.
        for (size_t i = 0; i < history.size(); ++i) sample_uniform_sequence(rng);
    }

    HistorySink sink(opts.run_dir);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = static_cast<int>(history.size()); i < opts.budget; ++i) {
        SearchRecord rec;
        rec.index = i;
        rec.seq = sample_uniform_sequence(rng);
        rec.strategy = "random";
        rec.reward = reward(rec.seq, &rec.diagnostic);
        check_config(rec.reward >= 0.0 && rec.reward <= 1.0, "reward must lie in [0, 1]");
        rec.wall_time = base_time + elapsed_seconds(t0);
        history.push_back(rec);
        sink.append(rec);
    }
    return finish(std::move(history), opts);
}

namespace {
RewardFn dataset_reward(const data::DatasetSplit& split, const EvalOptions& eval) {
    return [&split, eval](const model::OperatorSequence& seq, std::string* diagnostic) {
        return evaluate_candidate(seq, split, eval, diagnostic);
    };
}
} // namespace

SearchResult run_search(const data::DatasetSplit& split, const SearchOptions& opts, const EvalOptions& eval) {
    return run_search_with_reward(dataset_reward(split, eval), opts);
}

SearchResult random_search(const data::DatasetSplit& split, const SearchOptions& opts, const EvalOptions& eval) {
    return random_search_with_reward(dataset_reward(split, eval), opts);
}

std::string record_to_json(const SearchRecord& rec) {
    json j;
    j["index"] = rec.index;
    j["sequence"] = rec.seq.choices;
    j["reward"] = rec.reward;
    j["wall_time"] = rec.wall_time;
    j["strategy"] = rec.strategy;
    if (!rec.diagnostic.empty()) j["diagnostic"] = rec.diagnostic;
    return j.dump();
}

SearchRecord record_from_json(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    check_data(!j.is_discarded(), "corrupt resume state: malformed history line");
    SearchRecord rec;
    check_data(j.contains("index") && j.contains("sequence") && j.contains("reward"),
               "corrupt resume state: history record missing fields");
    rec.index = j["index"].get<int>();
    auto seq = j["sequence"].get<std::vector<int>>();
    check_data(seq.size() == model::kNumSlots, "corrupt resume state: bad sequence length");
    std::copy(seq.begin(), seq.end(), rec.seq.choices.begin());
    rec.reward = j["reward"].get<double>();
    rec.wall_time = j.value("wall_time", 0.0);
    rec.strategy = j.value("strategy", "");
    rec.diagnostic = j.value("diagnostic", "");
    return rec;
}

std::vector<SearchRecord> load_history(const std::filesystem::path& path) {
    std::ifstream f(path);
    check_data(static_cast<bool>(f), "cannot open history file: " + path.string());
    std::vector<SearchRecord> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(record_from_json(line));
        check_data(out.back().index == static_cast<int>(out.size()) - 1,
                   "corrupt resume state: history indices are not contiguous");
    }
    return out;
}

void write_curve_csv(const std::vector<SearchRecord>& history, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "wall_time,best_reward\n";
    double best = 0.0;
    char buf[64];
    for (const auto& rec : history) {
        best = std::max(best, rec.reward);
        std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", rec.wall_time, best);
        os << buf;
    }
    io::atomic_write(path, os.str());
}

} // namespace tpad::search
