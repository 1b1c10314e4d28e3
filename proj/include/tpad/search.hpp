#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tpad/controller.hpp"
#include "tpad/data.hpp"
#include "tpad/model.hpp"

namespace tpad::search {

struct SearchRecord {
    int index = 0;
    model::OperatorSequence seq;
    double reward = 0.5;
    double wall_time = 0.0;
    std::string strategy;
    std::string diagnostic;
};

struct EvalOptions {
    int epochs = 3;
    model::ModelConfig model;
    uint64_t seed = 0;
};

// Decode -> build -> train -> AUC over per-window mean scores of validation
// positives vs negatives. Degenerate or diverging candidates earn chance
// reward with a diagnostic instead of aborting the search.
double evaluate_candidate(const model::OperatorSequence& seq, const data::DatasetSplit& split,
                          const EvalOptions& opts, std::string* diagnostic = nullptr);

using RewardFn = std::function<double(const model::OperatorSequence&, std::string* diagnostic)>;

struct SearchOptions {
    int budget = 20;
    uint64_t seed = 0;
    ControllerConfig controller;
    std::string strategy = "reinforce"; // or "random"
    std::filesystem::path run_dir;      // empty: no persistence
    bool resume = false;
    int checkpoint_every = 1;
};

struct SearchResult {
    SearchRecord best;
    std::vector<SearchRecord> history;
};

// Core loop over an arbitrary reward oracle (also used by the bandit tests).
SearchResult run_search_with_reward(const RewardFn& reward, const SearchOptions& opts);
SearchResult random_search_with_reward(const RewardFn& reward, const SearchOptions& opts);

// Dataset-backed entry points.
SearchResult run_search(const data::DatasetSplit& split, const SearchOptions& opts, const EvalOptions& eval);
SearchResult random_search(const data::DatasetSplit& split, const SearchOptions& opts, const EvalOptions& eval);

// History persistence (line-delimited JSON records).
std::string record_to_json(const SearchRecord& rec);
SearchRecord record_from_json(const std::string& line);
std::vector<SearchRecord> load_history(const std::filesystem::path& path);
void write_curve_csv(const std::vector<SearchRecord>& history, const std::filesystem::path& path);

} // namespace tpad::search
