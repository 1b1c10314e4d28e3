#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tpad/error.hpp"
#include "tpad/pipeline.hpp"

using tpad::cli::RunConfig;

namespace {

// Registers one flag per config key so any file setting can be overridden on
// the command line.
void add_config_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--column_order", cfg.column_order);
    cmd->add_option("--held_out", cfg.held_out);
    cmd->add_option("--val_fraction", cfg.val_fraction);
    cmd->add_option("--stride", cfg.stride);
    cmd->add_option("--t_obs", cfg.t_obs);
    cmd->add_option("--t_pred", cfg.t_pred);
    cmd->add_option("--noise_bound", cfg.noise_bound);
    cmd->add_option("--budget", cfg.budget);
    cmd->add_option("--strategy", cfg.strategy);
    cmd->add_option("--candidate_epochs", cfg.candidate_epochs);
    cmd->add_option("--final_epochs", cfg.final_epochs);
    cmd->add_option("--hidden", cfg.hidden);
    cmd->add_option("--model_lr", cfg.model_lr);
    cmd->add_option("--embedding_size", cfg.embedding_size);
    cmd->add_option("--hidden_size", cfg.hidden_size);
    cmd->add_option("--controller_lr", cfg.controller_lr);
    cmd->add_option("--baseline_decay", cfg.baseline_decay);
    cmd->add_option("--entropy_coef", cfg.entropy_coef);
    cmd->add_option("--checkpoint_every", cfg.checkpoint_every);
    cmd->add_option("--sample_count", cfg.sample_count);
    cmd->add_option("--select_count", cfg.select_count);
    cmd->add_option("--sampler", cfg.sampler);
    cmd->add_option("--sampler_sigma", cfg.sampler_sigma);
    cmd->add_option("--sample_count_sweep", cfg.sample_count_sweep)->delimiter(',');
    cmd->add_option("--select_count_sweep", cfg.select_count_sweep)->delimiter(',');
    cmd->add_option("--seed_data", cfg.seed_data);
    cmd->add_option("--seed_search", cfg.seed_search);
    cmd->add_option("--seed_model", cfg.seed_model);
    cmd->add_option("--seed_sampler", cfg.seed_sampler);
    cmd->add_option("--run_dir", cfg.run_dir);
    cmd->add_option("--scene", [&cfg](const std::vector<std::string>& vals) {
        for (const auto& v : vals) {
            auto eq = v.find('=');
            if (eq == std::string::npos) return false;
            cfg.scenes[v.substr(0, eq)] = v.substr(eq + 1);
        }
        return true;
    }, "Scene file as name=path (repeatable)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tpad: searched trajectory anomaly detection and prediction filtering"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);

    RunConfig cfg;
    // The config file is parsed before flags so flags win.
    app.callback([&]() {
        if (!config_path.empty()) cfg = RunConfig::from_json_file(config_path);
    });
    app.immediate_callback(true);

    std::string spec_csv, checkpoint, samples_file;
    int64_t window_index = 0;
    bool oracle_scorer = false;

    auto* prepare = app.add_subcommand("prepare", "Cut windows, build the split and negatives");
    add_config_flags(prepare, cfg);
    auto* makeneg = app.add_subcommand("make-negatives", "Regenerate validation negatives");
    add_config_flags(makeneg, cfg);
    auto* search = app.add_subcommand("search", "Search the model space (reinforce or random)");
    add_config_flags(search, cfg);
    auto* train_final = app.add_subcommand("train-final", "Train the selected model to convergence");
    add_config_flags(train_final, cfg);
    train_final->add_option("--spec", spec_csv, "Explicit 23-integer operator sequence, comma separated");
    auto* score = app.add_subcommand("score", "Score validation windows with a trained model");
    add_config_flags(score, cfg);
    score->add_option("--checkpoint", checkpoint);
    auto* filter = app.add_subcommand("filter", "Filter one window's prediction samples");
    add_config_flags(filter, cfg);
    filter->add_option("--checkpoint", checkpoint);
    filter->add_option("--samples", samples_file, "Sample container file (default: generate)");
    filter->add_option("--window", window_index, "Evaluation window index");
    filter->add_flag("--oracle-scorer", oracle_scorer, "Score by true per-pedestrian ADE instead of the model");
    auto* eval = app.add_subcommand("eval", "Full filtering evaluation on the held-out scene");
    add_config_flags(eval, cfg);
    eval->add_option("--checkpoint", checkpoint);
    auto* plot = app.add_subcommand("plot", "Emit SVG plots from run reports");
    add_config_flags(plot, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (prepare->parsed()) return tpad::cli::cmd_prepare(cfg);
        if (makeneg->parsed()) return tpad::cli::cmd_make_negatives(cfg);
        if (search->parsed()) return tpad::cli::cmd_search(cfg);
        if (train_final->parsed()) return tpad::cli::cmd_train_final(cfg, spec_csv);
        if (score->parsed()) return tpad::cli::cmd_score(cfg, checkpoint);
        if (filter->parsed())
            return tpad::cli::cmd_filter(cfg, checkpoint, samples_file, window_index, oracle_scorer);
        if (eval->parsed()) return tpad::cli::cmd_eval(cfg, checkpoint);
        if (plot->parsed()) return tpad::cli::cmd_plot(cfg);
    } catch (const tpad::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
