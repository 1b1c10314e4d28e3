#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tpad/mat.hpp"

namespace tpad::data {

// One observation per line in the raw files: frame id, pedestrian id, world
// x/y in meters. Column order is configurable because public distributions
// of these datasets disagree about it.
struct ColumnOrder {
    int frame = 0, ped = 1, x = 2, y = 3;
    static ColumnOrder parse(const std::string& descriptor); // e.g. "frame ped x y"
    std::string to_string() const;
};

struct TrackRow {
    int64_t frame = 0;
    int64_t ped = 0;
    double x = 0.0, y = 0.0;
};

struct RawTrackTable {
    std::vector<TrackRow> rows; // sorted by (ped, frame)
    std::string scene_name;
};

RawTrackTable load_raw_scene(const std::filesystem::path& path, const ColumnOrder& order = {});
void save_raw_scene(const RawTrackTable& table, const std::filesystem::path& path);

// One scene slice: every pedestrian is present at all t_obs + t_pred frames.
struct TrajectoryWindow {
    TrajArray history;              // N x t_obs x 2
    TrajArray future;               // N x t_pred x 2
    std::vector<int64_t> ped_ids;   // N
    std::string scene;
    int64_t start_frame = 0;

    int64_t n() const { return history.n; }
    int64_t t_obs() const { return history.t; }
    int64_t t_pred() const { return future.t; }
};

std::vector<TrajectoryWindow> window_scenes(const RawTrackTable& table, int64_t t_obs = 8, int64_t t_pred = 12,
                                            int64_t stride = 1);

// Ground-truth future perturbed inside a +-noise_bound box, history untouched.
struct NegativeWindow {
    int64_t base_index = 0;   // index into the owning positive list
    TrajArray perturbed_future;
    double noise_bound = 0.1;
};

std::vector<NegativeWindow> make_negatives(const std::vector<TrajectoryWindow>& windows, double noise_bound,
                                           uint64_t seed);

struct DatasetSplit {
    std::vector<TrajectoryWindow> train;
    std::vector<TrajectoryWindow> val;
    std::vector<NegativeWindow> val_neg;
    std::string held_out_scene;
};

DatasetSplit leave_one_out_split(const std::map<std::string, std::vector<TrajectoryWindow>>& scenes,
                                 const std::string& held_out, double val_fraction, uint64_t seed);

// Windows cache container (versioned binary).
void save_windows(const std::vector<TrajectoryWindow>& windows, const std::filesystem::path& path);
std::vector<TrajectoryWindow> load_windows(const std::filesystem::path& path);
void save_negatives(const std::vector<NegativeWindow>& negs, const std::filesystem::path& path);
std::vector<NegativeWindow> load_negatives(const std::filesystem::path& path);

// Smooth synthetic pedestrian tracks: disjoint cohorts of agents walking with
// gently drifting headings. Gives a learnable stand-in scene when no real
// dataset files are around.
struct SynthSceneConfig {
    int cohorts = 5;
    int frames_per_cohort = 39; // windows per cohort = frames - t_obs - t_pred + 1
    int min_peds = 1, max_peds = 4;
    double dt = 0.4;            // seconds per sampled frame
    int64_t frame_stride = 10;  // raw frame-id step between samples
    double min_speed = 0.8, max_speed = 1.6;
    double heading_drift = 0.05; // radians per frame, uniform bound
};

RawTrackTable gen_synthetic_scene(const std::string& name, const SynthSceneConfig& cfg, uint64_t seed);

} // namespace tpad::data
