#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tpad/data.hpp"
#include "tpad/model.hpp"
#include "tpad/search.hpp"
#include "tpad/tpeval.hpp"
#include "tpad/tpsim.hpp"

namespace tpad::cli {

// Declarative run configuration; every key can be overridden by a CLI flag of
// the same name. Defaults follow the reference experimental setup.
struct RunConfig {
    std::map<std::string, std::string> scenes; // name -> raw file path
    std::string column_order = "frame ped x y";
    std::string held_out;
    double val_fraction = 0.2;
    int64_t stride = 1;
    int64_t t_obs = 8;
    int64_t t_pred = 12;
    double noise_bound = 0.1;

    int budget = 20;
    std::string strategy = "reinforce"; // or "random"
    int candidate_epochs = 3;
    int final_epochs = 50;
    int64_t hidden = 64;
    double model_lr = 1e-3;

    int64_t embedding_size = 100;
    int64_t hidden_size = 100;
    double controller_lr = 3.5e-4;
    double baseline_decay = 0.95;
    double entropy_coef = 0.0;
    int checkpoint_every = 1;

    int64_t sample_count = 50; // Psi
    int64_t select_count = 10; // psi
    std::string sampler = "constant-velocity"; // or "recurrent"
    double sampler_sigma = 0.3;
    std::vector<int64_t> sample_count_sweep = {20, 40, 60, 80, 100};
    std::vector<int64_t> select_count_sweep = {5, 10, 15, 20, 25};

    uint64_t seed_data = 1;
    uint64_t seed_search = 2;
    uint64_t seed_model = 3;
    uint64_t seed_sampler = 4;

    std::string run_dir = "runs/default";

    static RunConfig from_json_file(const std::filesystem::path& path);
    std::string to_json() const;

    std::filesystem::path run_path() const { return run_dir; }
    model::ModelConfig model_config() const;
    search::ControllerConfig controller_config() const;
};

// Prepared caches on disk plus the in-memory view.
struct Prepared {
    data::DatasetSplit split;
    std::vector<data::TrajectoryWindow> eval_windows; // held-out scene
};

Prepared load_prepared(const RunConfig& cfg);

int cmd_prepare(const RunConfig& cfg);
int cmd_make_negatives(const RunConfig& cfg);
int cmd_search(const RunConfig& cfg);
// spec_csv: optional explicit operator sequence "v1,v2,...,v23".
int cmd_train_final(const RunConfig& cfg, const std::string& spec_csv = "");
int cmd_score(const RunConfig& cfg, const std::string& checkpoint = "");
int cmd_filter(const RunConfig& cfg, const std::string& checkpoint, const std::string& samples_file,
               int64_t window_index, bool oracle_scorer);
int cmd_eval(const RunConfig& cfg, const std::string& checkpoint = "");
int cmd_plot(const RunConfig& cfg);

// Report helpers shared with the tests.
struct EvalSummary {
    tpeval::MetricReport unfiltered;
    tpeval::MetricReport filtered;
    double average_improved_fraction = 0.0; // windows where filtering helped Average-ADE
    std::map<int64_t, tpeval::MetricReport> by_select_count;   // Top-psi sweep
    std::map<int64_t, tpeval::MetricReport> by_sample_count;   // Psi sweep (unfiltered)
    std::map<int64_t, tpeval::MetricReport> by_sample_count_filtered;
    int64_t windows = 0;
};

EvalSummary evaluate_filtering(const model::TADModel& m, const std::vector<data::TrajectoryWindow>& eval_windows,
                               const RunConfig& cfg);

model::OperatorSequence parse_spec_csv(const std::string& csv);

} // namespace tpad::cli
