#include "tpad/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "tpad/error.hpp"
#include "tpad/serialize.hpp"
#include "tpad/svg.hpp"

namespace tpad::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T> void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string ade_fde_cell(double a, double f) { return fmt(a) + " / " + fmt(f); }

} // namespace

RunConfig RunConfig::from_json_file(const fs::path& path) {
    std::ifstream f(path);
    check_config(static_cast<bool>(f), "cannot open config file: " + path.string());
    json j = json::parse(f, nullptr, false);
    check_config(!j.is_discarded(), "malformed JSON in config file: " + path.string());

    RunConfig cfg;
    if (j.contains("scenes")) cfg.scenes = j.at("scenes").get<std::map<std::string, std::string>>();
    maybe(j, "column_order", cfg.column_order);
    maybe(j, "held_out", cfg.held_out);
    maybe(j, "val_fraction", cfg.val_fraction);
    maybe(j, "stride", cfg.stride);
    maybe(j, "t_obs", cfg.t_obs);
    maybe(j, "t_pred", cfg.t_pred);
    maybe(j, "noise_bound", cfg.noise_bound);
    maybe(j, "budget", cfg.budget);
    maybe(j, "strategy", cfg.strategy);
    maybe(j, "candidate_epochs", cfg.candidate_epochs);
    maybe(j, "final_epochs", cfg.final_epochs);
    maybe(j, "hidden", cfg.hidden);
    maybe(j, "model_lr", cfg.model_lr);
    maybe(j, "embedding_size", cfg.embedding_size);
    maybe(j, "hidden_size", cfg.hidden_size);
    maybe(j, "controller_lr", cfg.controller_lr);
    maybe(j, "baseline_decay", cfg.baseline_decay);
    maybe(j, "entropy_coef", cfg.entropy_coef);
    maybe(j, "checkpoint_every", cfg.checkpoint_every);
    maybe(j, "sample_count", cfg.sample_count);
    maybe(j, "select_count", cfg.select_count);
    maybe(j, "sampler", cfg.sampler);
    maybe(j, "sampler_sigma", cfg.sampler_sigma);
    maybe(j, "sample_count_sweep", cfg.sample_count_sweep);
    maybe(j, "select_count_sweep", cfg.select_count_sweep);
    maybe(j, "seed_data", cfg.seed_data);
    maybe(j, "seed_search", cfg.seed_search);
    maybe(j, "seed_model", cfg.seed_model);
    maybe(j, "seed_sampler", cfg.seed_sampler);
    maybe(j, "run_dir", cfg.run_dir);
    return cfg;
}

std::string RunConfig::to_json() const {
    json j;
    j["scenes"] = scenes;
    j["column_order"] = column_order;
    j["held_out"] = held_out;
    j["val_fraction"] = val_fraction;
    j["stride"] = stride;
    j["t_obs"] = t_obs;
    j["t_pred"] = t_pred;
    j["noise_bound"] = noise_bound;
    j["budget"] = budget;
    j["strategy"] = strategy;
    j["candidate_epochs"] = candidate_epochs;
    j["final_epochs"] = final_epochs;
    j["hidden"] = hidden;
    j["model_lr"] = model_lr;
    j["embedding_size"] = embedding_size;
    j["hidden_size"] = hidden_size;
    j["controller_lr"] = controller_lr;
    j["baseline_decay"] = baseline_decay;
    j["entropy_coef"] = entropy_coef;
    j["checkpoint_every"] = checkpoint_every;
    j["sample_count"] = sample_count;
    j["select_count"] = select_count;
    j["sampler"] = sampler;
    j["sampler_sigma"] = sampler_sigma;
    j["sample_count_sweep"] = sample_count_sweep;
    j["select_count_sweep"] = select_count_sweep;
    j["seed_data"] = seed_data;
    j["seed_search"] = seed_search;
    j["seed_model"] = seed_model;
    j["seed_sampler"] = seed_sampler;
    j["run_dir"] = run_dir;
    return j.dump(2) + "\n";
}

model::ModelConfig RunConfig::model_config() const {
    model::ModelConfig mc;
    mc.hidden = hidden;
    mc.t_obs = t_obs;
    mc.t_pred = t_pred;
    mc.lr = model_lr;
    return mc;
}

search::ControllerConfig RunConfig::controller_config() const {
    search::ControllerConfig cc;
    cc.embedding_size = embedding_size;
    cc.hidden_size = hidden_size;
    cc.lr = controller_lr;
    cc.baseline_decay = baseline_decay;
    cc.entropy_coef = entropy_coef;
    return cc;
}

model::OperatorSequence parse_spec_csv(const std::string& csv) {
    model::OperatorSequence seq;
    std::istringstream ss(csv);
    std::string tok;
    int i = 0;
    while (std::getline(ss, tok, ',')) {
        check_config(i < model::kNumSlots, "spec must have exactly 23 integers");
        try {
            seq.choices[static_cast<size_t>(i)] = std::stoi(tok);
        } catch (const std::exception&) {
            fail_config("spec entry '" + tok + "' is not an integer");
        }
        ++i;
    }
    check_config(i == model::kNumSlots, "spec must have exactly 23 integers, got " + std::to_string(i));
    return seq;
}

namespace {

fs::path cache_dir(const RunConfig& cfg) { return cfg.run_path() / "cache"; }
fs::path search_dir(const RunConfig& cfg) { return cfg.run_path() / "search"; }
fs::path model_dir(const RunConfig& cfg) { return cfg.run_path() / "model"; }
fs::path reports_dir(const RunConfig& cfg) { return cfg.run_path() / "reports"; }
fs::path plots_dir(const RunConfig& cfg) { return cfg.run_path() / "plots"; }

void snapshot_config(const RunConfig& cfg) {
    fs::create_directories(cfg.run_path());
    io::atomic_write(cfg.run_path() / "config.json", cfg.to_json());
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t x = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    return x;
}

tpeval::SampleSet generate_samples(const RunConfig& cfg, const tpsim::RecurrentSampler* learned,
                                   const TrajArray& history, int64_t psi, uint64_t window_salt) {
    tpsim::SamplerConfig sc;
    sc.psi = psi;
    sc.sigma = cfg.sampler_sigma;
    sc.t_pred = cfg.t_pred;
    sc.seed = mix_seed(cfg.seed_sampler, window_salt);
    if (cfg.sampler == "recurrent") {
        check_config(learned != nullptr && learned->trained(), "recurrent sampler is not trained");
        return learned->sample(history, sc);
    }
    check_config(cfg.sampler == "constant-velocity", "unknown sampler kind: " + cfg.sampler);
    return tpsim::cv_gaussian_sample(history, sc);
}

} // namespace

Prepared load_prepared(const RunConfig& cfg) {
    Prepared p;
    const auto dir = cache_dir(cfg);
    check_data(fs::exists(dir / "train.bin"), "no prepared cache under " + dir.string() + "; run prepare first");
    p.split.train = data::load_windows(dir / "train.bin");
    p.split.val = data::load_windows(dir / "val.bin");
    p.split.val_neg = data::load_negatives(dir / "val_neg.bin");
    p.eval_windows = data::load_windows(dir / "eval.bin");
    p.split.held_out_scene = cfg.held_out;
    return p;
}

int cmd_prepare(const RunConfig& cfg) {
    check_config(!cfg.scenes.empty(), "no scene files configured");
    check_config(cfg.scenes.count(cfg.held_out) > 0, "held-out scene '" + cfg.held_out + "' is not a known scene");
    snapshot_config(cfg);

    const auto order = data::ColumnOrder::parse(cfg.column_order);
    std::map<std::string, std::vector<data::TrajectoryWindow>> windows_by_scene;
    json scene_counts;
    for (const auto& [name, path] : cfg.scenes) {
        check_data(fs::exists(path), "scene file missing: " + path);
        auto table = data::load_raw_scene(path, order);
        table.scene_name = name;
        auto ws = data::window_scenes(table, cfg.t_obs, cfg.t_pred, cfg.stride);
        scene_counts[name] = ws.size();
        windows_by_scene[name] = std::move(ws);
    }

    auto split = data::leave_one_out_split(windows_by_scene, cfg.held_out, cfg.val_fraction, cfg.seed_data);
    split.val_neg = data::make_negatives(split.val, cfg.noise_bound, mix_seed(cfg.seed_data, 1));

    const auto dir = cache_dir(cfg);
    fs::create_directories(dir);
    data::save_windows(split.train, dir / "train.bin");
    data::save_windows(split.val, dir / "val.bin");
    data::save_negatives(split.val_neg, dir / "val_neg.bin");
    data::save_windows(windows_by_scene.at(cfg.held_out), dir / "eval.bin");

    json manifest;
    manifest["format_version"] = 1;
    manifest["held_out"] = cfg.held_out;
    manifest["val_fraction"] = cfg.val_fraction;
    manifest["noise_bound"] = cfg.noise_bound;
    manifest["seed_data"] = cfg.seed_data;
    manifest["windows_per_scene"] = scene_counts;
    manifest["train_count"] = split.train.size();
    manifest["val_count"] = split.val.size();
    manifest["val_neg_count"] = split.val_neg.size();
    manifest["eval_count"] = windows_by_scene.at(cfg.held_out).size();
    manifest["checksums"] = {{"train.bin", io::file_checksum(dir / "train.bin")},
                             {"val.bin", io::file_checksum(dir / "val.bin")},
                             {"val_neg.bin", io::file_checksum(dir / "val_neg.bin")},
                             {"eval.bin", io::file_checksum(dir / "eval.bin")}};
    io::atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");

    std::cout << "prepared " << split.train.size() << " train / " << split.val.size() << " val / "
              << windows_by_scene.at(cfg.held_out).size() << " eval windows (held out: " << cfg.held_out << ")\n";
    return 0;
}

int cmd_make_negatives(const RunConfig& cfg) {
    const auto dir = cache_dir(cfg);
    check_data(fs::exists(dir / "val.bin"), "no validation cache; run prepare first");
    auto val = data::load_windows(dir / "val.bin");
    auto negs = data::make_negatives(val, cfg.noise_bound, mix_seed(cfg.seed_data, 1));
    data::save_negatives(negs, dir / "val_neg.bin");

    auto manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        json manifest = json::parse(io::read_file(manifest_path));
        manifest["noise_bound"] = cfg.noise_bound;
        manifest["val_neg_count"] = negs.size();
        manifest["checksums"]["val_neg.bin"] = io::file_checksum(dir / "val_neg.bin");
        io::atomic_write(manifest_path, manifest.dump(2) + "\n");
    }
    std::cout << "wrote " << negs.size() << " negatives (bound " << cfg.noise_bound << ")\n";
    return 0;
}

int cmd_search(const RunConfig& cfg) {
    snapshot_config(cfg);
    Prepared prep = load_prepared(cfg);

    search::SearchOptions opts;
    opts.budget = cfg.budget;
    opts.seed = cfg.seed_search;
    opts.controller = cfg.controller_config();
    opts.strategy = cfg.strategy;
    opts.run_dir = search_dir(cfg);
    opts.resume = true;
    opts.checkpoint_every = cfg.checkpoint_every;

    search::EvalOptions eval;
    eval.epochs = cfg.candidate_epochs;
    eval.model = cfg.model_config();
    eval.seed = cfg.seed_model;

    search::SearchResult res;
    if (cfg.strategy == "random")
        res = search::random_search(prep.split, opts, eval);
    else if (cfg.strategy == "reinforce")
        res = search::run_search(prep.split, opts, eval);
    else
        fail_config("unknown search strategy: " + cfg.strategy);

    json best;
    best["sequence"] = res.best.seq.choices;
    best["reward"] = res.best.reward;
    best["strategy"] = res.best.strategy;
    best["index"] = res.best.index;
    best["description"] = model::describe(model::decode(res.best.seq));
    io::atomic_write(search_dir(cfg) / "best_spec.json", best.dump(2) + "\n");

    std::cout << "search done: best reward " << fmt(res.best.reward) << " at candidate " << res.best.index << "\n";
    return 0;
}

namespace {
model::OperatorSequence best_sequence_from_run(const RunConfig& cfg) {
    auto path = search_dir(cfg) / "best_spec.json";
    check_data(fs::exists(path), "no searched spec at " + path.string() + "; run search or pass --spec");
    json j = json::parse(io::read_file(path));
    auto vec = j.at("sequence").get<std::vector<int>>();
    check_data(vec.size() == model::kNumSlots, "bad sequence length in " + path.string());
    model::OperatorSequence seq;
    std::copy(vec.begin(), vec.end(), seq.choices.begin());
    return seq;
}

struct AucReport {
    double searched = 0.0;
    double random_init = 0.0;
};

AucReport compute_auc_report(const model::TADModel& final_model, const model::TADModel& random_model,
                             const data::DatasetSplit& split, std::vector<double>* pos_out,
                             std::vector<double>* neg_out) {
    auto window_scores = [&](const model::TADModel& m) {
        std::pair<std::vector<double>, std::vector<double>> out;
        out.first.resize(split.val.size());
        out.second.resize(split.val_neg.size());
#pragma omp parallel for schedule(dynamic)
        for (int64_t i = 0; i < static_cast<int64_t>(split.val.size()); ++i)
            out.first[static_cast<size_t>(i)] =
                m.mean_score(split.val[static_cast<size_t>(i)].future, split.val[static_cast<size_t>(i)].history);
#pragma omp parallel for schedule(dynamic)
        for (int64_t i = 0; i < static_cast<int64_t>(split.val_neg.size()); ++i) {
            const auto& nw = split.val_neg[static_cast<size_t>(i)];
            out.second[static_cast<size_t>(i)] =
                m.mean_score(nw.perturbed_future, split.val[static_cast<size_t>(nw.base_index)].history);
        }
        return out;
    };
    AucReport rep;
    auto [pos, neg] = window_scores(final_model);
    rep.searched = tpeval::auc(pos, neg);
    if (pos_out) *pos_out = pos;
    if (neg_out) *neg_out = neg;
    auto [rpos, rneg] = window_scores(random_model);
    rep.random_init = tpeval::auc(rpos, rneg);
    return rep;
}
} // namespace

int cmd_train_final(const RunConfig& cfg, const std::string& spec_csv) {
    snapshot_config(cfg);
    Prepared prep = load_prepared(cfg);

    model::OperatorSequence seq = spec_csv.empty() ? best_sequence_from_run(cfg) : parse_spec_csv(spec_csv);
    auto spec = model::decode(seq);
    check_config(!spec.weights.gamma_all_zero(), "final spec has all-zero scoring gates");

    model::TADModel final_model(spec, cfg.model_config(), cfg.seed_model);
    final_model.train(prep.split.train, cfg.final_epochs);

    model::TADModel random_model(spec, cfg.model_config(), mix_seed(cfg.seed_model, 77));

    std::vector<double> pos, neg;
    AucReport rep = compute_auc_report(final_model, random_model, prep.split, &pos, &neg);

    fs::create_directories(model_dir(cfg));
    final_model.save(model_dir(cfg) / "final.ckpt");

    fs::create_directories(reports_dir(cfg));
    std::ostringstream csv;
    csv << "method," << cfg.held_out << "\n";
    csv << "searched (trained)," << fmt(rep.searched) << "\n";
    csv << "random-parameter baseline," << fmt(rep.random_init) << "\n";
    io::atomic_write(reports_dir(cfg) / "auc_report.csv", csv.str());

    std::ostringstream scores;
    scores << "window,kind,score\n";
    for (size_t i = 0; i < pos.size(); ++i) scores << i << ",positive," << fmt(pos[i]) << "\n";
    for (size_t i = 0; i < neg.size(); ++i) scores << i << ",negative," << fmt(neg[i]) << "\n";
    io::atomic_write(reports_dir(cfg) / "scores_val.csv", scores.str());

    std::cout << "final model AUC " << fmt(rep.searched) << " (random-parameter baseline " << fmt(rep.random_init)
              << ")\n";
    return 0;
}

int cmd_score(const RunConfig& cfg, const std::string& checkpoint) {
    Prepared prep = load_prepared(cfg);
    fs::path ckpt = checkpoint.empty() ? model_dir(cfg) / "final.ckpt" : fs::path(checkpoint);
    check_data(fs::exists(ckpt), "model checkpoint missing: " + ckpt.string());
    auto m = model::TADModel::load(ckpt);

    std::vector<double> pos(prep.split.val.size()), neg(prep.split.val_neg.size());
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(prep.split.val.size()); ++i)
        pos[static_cast<size_t>(i)] =
            m.mean_score(prep.split.val[static_cast<size_t>(i)].future, prep.split.val[static_cast<size_t>(i)].history);
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(prep.split.val_neg.size()); ++i) {
        const auto& nw = prep.split.val_neg[static_cast<size_t>(i)];
        neg[static_cast<size_t>(i)] =
            m.mean_score(nw.perturbed_future, prep.split.val[static_cast<size_t>(nw.base_index)].history);
    }

    fs::create_directories(reports_dir(cfg));
    std::ostringstream scores;
    scores << "window,kind,score\n";
    for (size_t i = 0; i < pos.size(); ++i) scores << i << ",positive," << fmt(pos[i]) << "\n";
    for (size_t i = 0; i < neg.size(); ++i) scores << i << ",negative," << fmt(neg[i]) << "\n";
    io::atomic_write(reports_dir(cfg) / "scores_val.csv", scores.str());

    std::cout << "validation AUC " << fmt(tpeval::auc(pos, neg)) << " over " << pos.size() << " windows\n";
    return 0;
}

EvalSummary evaluate_filtering(const model::TADModel& m, const std::vector<data::TrajectoryWindow>& eval_windows,
                               const RunConfig& cfg) {
    check_config(!eval_windows.empty(), "no evaluation windows");
    check_config(cfg.select_count >= 1 && cfg.select_count <= cfg.sample_count,
                 "select_count must lie in [1, sample_count]");

    int64_t psi_max = cfg.sample_count;
    for (int64_t v : cfg.sample_count_sweep) psi_max = std::max(psi_max, v);

    std::optional<tpsim::RecurrentSampler> learned;
    if (cfg.sampler == "recurrent") {
        learned.emplace(32, cfg.t_pred, mix_seed(cfg.seed_sampler, 99));
        // A short fit is enough for a usable stochastic baseline.
        learned->train(std::vector<data::TrajectoryWindow>(eval_windows.begin(),
                                                           eval_windows.begin() +
                                                               std::min<size_t>(eval_windows.size(), 50)),
                       3);
    }

    EvalSummary sum;
    auto add_report = [](tpeval::MetricReport& acc, const tpeval::MetricReport& r) {
        acc.best_ade += r.best_ade;
        acc.average_ade += r.average_ade;
        acc.worst_ade += r.worst_ade;
        acc.best_fde += r.best_fde;
        acc.average_fde += r.average_fde;
        acc.worst_fde += r.worst_fde;
    };
    auto scale_report = [](tpeval::MetricReport& acc, double s) {
        acc.best_ade *= s;
        acc.average_ade *= s;
        acc.worst_ade *= s;
        acc.best_fde *= s;
        acc.average_fde *= s;
        acc.worst_fde *= s;
    };

    std::map<int64_t, tpeval::MetricReport> by_psi, by_Psi, by_Psi_filtered;
    int64_t improved = 0;

    for (size_t wi = 0; wi < eval_windows.size(); ++wi) {
        const auto& w = eval_windows[wi];
        auto samples = generate_samples(cfg, learned ? &*learned : nullptr, w.history, psi_max, wi);
        Mat scores = tpeval::score_matrix(m, samples, w.history);

        // Main Psi / psi configuration uses the first sample_count samples.
        tpeval::SampleSet main_set;
        main_set.source = samples.source;
        main_set.samples.assign(samples.samples.begin(), samples.samples.begin() + cfg.sample_count);
        Mat main_scores(scores.r, cfg.sample_count);
        for (int64_t i = 0; i < scores.r; ++i)
            for (int64_t j = 0; j < cfg.sample_count; ++j) main_scores.at(i, j) = scores.at(i, j);

        auto full = tpeval::aggregate(main_set, w.future, tpeval::full_selection(w.n(), cfg.sample_count));
        auto filt = tpeval::aggregate(main_set, w.future, tpeval::topk_filter(main_scores, cfg.select_count));
        add_report(sum.unfiltered, full);
        add_report(sum.filtered, filt);
        if (filt.average_ade <= full.average_ade) ++improved;

        for (int64_t psi : cfg.select_count_sweep) {
            if (psi < 1 || psi > cfg.sample_count) continue;
            auto r = tpeval::aggregate(main_set, w.future, tpeval::topk_filter(main_scores, psi));
            add_report(by_psi[psi], r);
        }
        for (int64_t big : cfg.sample_count_sweep) {
            if (big < 1 || big > psi_max) continue;
            tpeval::SampleSet subset;
            subset.source = samples.source;
            subset.samples.assign(samples.samples.begin(), samples.samples.begin() + big);
            Mat sub_scores(scores.r, big);
            for (int64_t i = 0; i < scores.r; ++i)
                for (int64_t j = 0; j < big; ++j) sub_scores.at(i, j) = scores.at(i, j);
            auto rfull = tpeval::aggregate(subset, w.future, tpeval::full_selection(w.n(), big));
            add_report(by_Psi[big], rfull);
            const int64_t k = std::min(cfg.select_count, big);
            auto rfilt = tpeval::aggregate(subset, w.future, tpeval::topk_filter(sub_scores, k));
            add_report(by_Psi_filtered[big], rfilt);
        }
    }

    const double inv = 1.0 / static_cast<double>(eval_windows.size());
    scale_report(sum.unfiltered, inv);
    scale_report(sum.filtered, inv);
    for (auto& [k, v] : by_psi) scale_report(v, inv);
    for (auto& [k, v] : by_Psi) scale_report(v, inv);
    for (auto& [k, v] : by_Psi_filtered) scale_report(v, inv);
    sum.by_select_count = std::move(by_psi);
    sum.by_sample_count = std::move(by_Psi);
    sum.by_sample_count_filtered = std::move(by_Psi_filtered);
    sum.average_improved_fraction = static_cast<double>(improved) / static_cast<double>(eval_windows.size());
    sum.windows = static_cast<int64_t>(eval_windows.size());
    return sum;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint) {
    Prepared prep = load_prepared(cfg);
    fs::path ckpt = checkpoint.empty() ? model_dir(cfg) / "final.ckpt" : fs::path(checkpoint);
    check_data(fs::exists(ckpt), "model checkpoint missing: " + ckpt.string());
    auto m = model::TADModel::load(ckpt);

    EvalSummary sum = evaluate_filtering(m, prep.eval_windows, cfg);

    fs::create_directories(reports_dir(cfg));
    const std::string topk = std::to_string(cfg.select_count);

    // Main table: rows metric-kind, column the held-out scene, ADE / FDE cells.
    std::ostringstream t5;
    t5 << "sampler,metric," << cfg.held_out << "\n";
    t5 << cfg.sampler << ",Best," << ade_fde_cell(sum.unfiltered.best_ade, sum.unfiltered.best_fde) << "\n";
    t5 << cfg.sampler << ",Best (TPAD Top-" << topk << "),"
       << ade_fde_cell(sum.filtered.best_ade, sum.filtered.best_fde) << "\n";
    t5 << cfg.sampler << ",Average," << ade_fde_cell(sum.unfiltered.average_ade, sum.unfiltered.average_fde) << "\n";
    t5 << cfg.sampler << ",Average (TPAD Top-" << topk << "),"
       << ade_fde_cell(sum.filtered.average_ade, sum.filtered.average_fde) << "\n";
    t5 << cfg.sampler << ",Worst," << ade_fde_cell(sum.unfiltered.worst_ade, sum.unfiltered.worst_fde) << "\n";
    io::atomic_write(reports_dir(cfg) / "tp_report.csv", t5.str());

    // Sample-count sweep.
    std::ostringstream t6;
    t6 << "metric";
    for (const auto& [big, v] : sum.by_sample_count) t6 << ",Psi=" << big;
    t6 << "\n";
    auto sweep_row = [&](const std::string& label, auto getter, const auto& table) {
        t6 << label;
        for (const auto& [big, v] : table) t6 << "," << getter(v);
        t6 << "\n";
    };
    sweep_row("Best", [&](const tpeval::MetricReport& r) { return ade_fde_cell(r.best_ade, r.best_fde); },
              sum.by_sample_count);
    sweep_row("Best (TPAD Top-" + topk + ")",
              [&](const tpeval::MetricReport& r) { return ade_fde_cell(r.best_ade, r.best_fde); },
              sum.by_sample_count_filtered);
    sweep_row("Average", [&](const tpeval::MetricReport& r) { return ade_fde_cell(r.average_ade, r.average_fde); },
              sum.by_sample_count);
    sweep_row("Average (TPAD Top-" + topk + ")",
              [&](const tpeval::MetricReport& r) { return ade_fde_cell(r.average_ade, r.average_fde); },
              sum.by_sample_count_filtered);
    sweep_row("Worst", [&](const tpeval::MetricReport& r) { return ade_fde_cell(r.worst_ade, r.worst_fde); },
              sum.by_sample_count);
    io::atomic_write(reports_dir(cfg) / "sample_sweep.csv", t6.str());

    // Top-k sweep.
    std::ostringstream t7;
    t7 << "metric";
    for (const auto& [k, v] : sum.by_select_count) t7 << ",psi=" << k;
    t7 << "\n";
    t7 << "Best (TPAD Top-psi)";
    for (const auto& [k, v] : sum.by_select_count) t7 << "," << ade_fde_cell(v.best_ade, v.best_fde);
    t7 << "\nAverage (TPAD Top-psi)";
    for (const auto& [k, v] : sum.by_select_count) t7 << "," << ade_fde_cell(v.average_ade, v.average_fde);
    t7 << "\n";
    io::atomic_write(reports_dir(cfg) / "topk_sweep.csv", t7.str());

    json summary;
    summary["windows"] = sum.windows;
    summary["held_out"] = cfg.held_out;
    summary["sampler"] = cfg.sampler;
    summary["sample_count"] = cfg.sample_count;
    summary["select_count"] = cfg.select_count;
    summary["average_improved_fraction"] = sum.average_improved_fraction;
    auto rep_json = [](const tpeval::MetricReport& r) {
        return json{{"best_ade", r.best_ade},       {"average_ade", r.average_ade}, {"worst_ade", r.worst_ade},
                    {"best_fde", r.best_fde},       {"average_fde", r.average_fde}, {"worst_fde", r.worst_fde}};
    };
    summary["unfiltered"] = rep_json(sum.unfiltered);
    summary["filtered"] = rep_json(sum.filtered);
    for (const auto& [k, v] : sum.by_select_count) summary["by_select_count"][std::to_string(k)] = rep_json(v);
    for (const auto& [k, v] : sum.by_sample_count) summary["by_sample_count"][std::to_string(k)] = rep_json(v);
    for (const auto& [k, v] : sum.by_sample_count_filtered)
        summary["by_sample_count_filtered"][std::to_string(k)] = rep_json(v);
    io::atomic_write(reports_dir(cfg) / "summary.json", summary.dump(2) + "\n");

    std::cout << "eval over " << sum.windows << " windows: Average ADE " << fmt(sum.unfiltered.average_ade) << " -> "
              << fmt(sum.filtered.average_ade) << " with Top-" << topk << " filtering (improved on "
              << fmt(100.0 * sum.average_improved_fraction) << "% of windows)\n";
    return 0;
}

int cmd_filter(const RunConfig& cfg, const std::string& checkpoint, const std::string& samples_file,
               int64_t window_index, bool oracle_scorer) {
    Prepared prep = load_prepared(cfg);
    check_config(window_index >= 0 && window_index < static_cast<int64_t>(prep.eval_windows.size()),
                 "window index out of range");
    const auto& w = prep.eval_windows[static_cast<size_t>(window_index)];

    tpeval::SampleSet samples;
    if (!samples_file.empty()) {
        samples = tpsim::load_samples(samples_file);
        check_config(samples.n() == w.n(), "sample file pedestrian count does not match the window");
    } else {
        samples = generate_samples(cfg, nullptr, w.history, cfg.sample_count, static_cast<uint64_t>(window_index));
    }
    check_config(cfg.select_count >= 1 && cfg.select_count <= samples.psi(),
                 "select_count must lie in [1, sample count]");

    Mat scores;
    if (oracle_scorer) {
        scores = Mat(w.n(), samples.psi());
        for (int64_t j = 0; j < samples.psi(); ++j) {
            auto a = tpeval::ade(samples.samples[static_cast<size_t>(j)], w.future);
            for (int64_t i = 0; i < w.n(); ++i) scores.at(i, j) = a[static_cast<size_t>(i)];
        }
    } else {
        fs::path ckpt = checkpoint.empty() ? model_dir(cfg) / "final.ckpt" : fs::path(checkpoint);
        check_data(fs::exists(ckpt), "model checkpoint missing: " + ckpt.string());
        auto m = model::TADModel::load(ckpt);
        scores = tpeval::score_matrix(m, samples, w.history);
    }

    auto sel = tpeval::topk_filter(scores, cfg.select_count);
    auto full = tpeval::aggregate(samples, w.future, tpeval::full_selection(w.n(), samples.psi()));
    auto filt = tpeval::aggregate(samples, w.future, sel);

    fs::create_directories(reports_dir(cfg));
    const std::string topk = std::to_string(cfg.select_count);
    std::ostringstream csv;
    csv << "metric," << cfg.held_out << "\n";
    csv << "Best," << ade_fde_cell(full.best_ade, full.best_fde) << "\n";
    csv << "Best (TPAD Top-" << topk << ")," << ade_fde_cell(filt.best_ade, filt.best_fde) << "\n";
    csv << "Average," << ade_fde_cell(full.average_ade, full.average_fde) << "\n";
    csv << "Average (TPAD Top-" << topk << ")," << ade_fde_cell(filt.average_ade, filt.average_fde) << "\n";
    csv << "Worst," << ade_fde_cell(full.worst_ade, full.worst_fde) << "\n";
    io::atomic_write(reports_dir(cfg) / "filter_report.csv", csv.str());

    std::ostringstream selcsv;
    selcsv << "pedestrian,selected_samples\n";
    for (int64_t i = 0; i < sel.n(); ++i) {
        selcsv << w.ped_ids[static_cast<size_t>(i)] << ",";
        for (size_t j = 0; j < sel.indices[static_cast<size_t>(i)].size(); ++j)
            selcsv << (j ? " " : "") << sel.indices[static_cast<size_t>(i)][j];
        selcsv << "\n";
    }
    io::atomic_write(reports_dir(cfg) / "selection.csv", selcsv.str());

    std::cout << "filtered window " << window_index << ": Average ADE " << fmt(full.average_ade) << " -> "
              << fmt(filt.average_ade) << "\n";
    return 0;
}

int cmd_plot(const RunConfig& cfg) {
    bool any = false;
    fs::create_directories(plots_dir(cfg));

    auto curve_path = search_dir(cfg) / "curve.csv";
    if (fs::exists(curve_path)) {
        std::ifstream f(curve_path);
        std::string line;
        std::getline(f, line); // header
        std::vector<double> xs, ys;
        while (std::getline(f, line)) {
            auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            xs.push_back(std::stod(line.substr(0, comma)));
            ys.push_back(std::stod(line.substr(comma + 1)));
        }
        if (!xs.empty()) {
            svg::line_plot(plots_dir(cfg) / "search_curve.svg", "best validation AUC vs wall time", "seconds",
                           "best AUC", xs, ys);
            any = true;
        }
    }

    auto scores_path = reports_dir(cfg) / "scores_val.csv";
    if (fs::exists(scores_path)) {
        std::ifstream f(scores_path);
        std::string line;
        std::getline(f, line);
        std::vector<double> pos, neg;
        while (std::getline(f, line)) {
            std::istringstream ss(line);
            std::string idx, kind, score;
            std::getline(ss, idx, ',');
            std::getline(ss, kind, ',');
            std::getline(ss, score, ',');
            if (kind == "positive")
                pos.push_back(std::stod(score));
            else if (kind == "negative")
                neg.push_back(std::stod(score));
        }
        if (!pos.empty() && !neg.empty()) {
            svg::dual_histogram(plots_dir(cfg) / "score_hist.svg", "anomaly score distribution", "normal", pos,
                                "perturbed", neg);
            any = true;
        }
    }

    check_data(any, "nothing to plot: no curve.csv or scores_val.csv in the run directory");
    std::cout << "plots written to " << plots_dir(cfg).string() << "\n";
    return 0;
}

} // namespace tpad::cli
