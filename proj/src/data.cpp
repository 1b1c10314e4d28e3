#include "tpad/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tpad/error.hpp"
#include "tpad/serialize.hpp"

namespace tpad::data {

ColumnOrder ColumnOrder::parse(const std::string& descriptor) {
    std::istringstream ss(descriptor);
    std::string tok;
    ColumnOrder order;
    order.frame = order.ped = order.x = order.y = -1;
    int col = 0;
    while (ss >> tok) {
        if (tok == "frame")
            order.frame = col;
        else if (tok == "ped")
            order.ped = col;
        else if (tok == "x")
            order.x = col;
        else if (tok == "y")
            order.y = col;
        else
            fail_config("unknown column token '" + tok + "' in column order descriptor");
        ++col;
    }
    check_config(order.frame >= 0 && order.ped >= 0 && order.x >= 0 && order.y >= 0,
                 "column order descriptor must name frame, ped, x and y");
    return order;
}

std::string ColumnOrder::to_string() const {
    std::vector<std::string> cols(4);
    cols[static_cast<size_t>(frame)] = "frame";
    cols[static_cast<size_t>(ped)] = "ped";
    cols[static_cast<size_t>(x)] = "x";
    cols[static_cast<size_t>(y)] = "y";
    std::string out;
    for (size_t i = 0; i < cols.size(); ++i) out += (i ? " " : "") + cols[i];
    return out;
}

RawTrackTable load_raw_scene(const std::filesystem::path& path, const ColumnOrder& order) {
    std::ifstream f(path);
    check_data(static_cast<bool>(f), "cannot open scene file: " + path.string());

    RawTrackTable table;
    table.scene_name = path.stem().string();

    std::string line;
    int64_t line_no = 0;
    const int max_col = std::max({order.frame, order.ped, order.x, order.y});
    while (std::getline(f, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::vector<double> fields;
        double v;
        while (ss >> v) fields.push_back(v);
        if (fields.empty()) {
            // Blank or comment-only line; a line with leftover junk is an error.
            std::string rest;
            ss.clear();
            ss >> rest;
            check_data(rest.empty(), "parse error at line " + std::to_string(line_no) + " of " + path.string());
            continue;
        }
        std::string rest;
        ss.clear();
        ss >> rest;
        check_data(rest.empty() && static_cast<int>(fields.size()) > max_col,
                   "parse error at line " + std::to_string(line_no) + " of " + path.string());
        TrackRow row;
        double fframe = fields[static_cast<size_t>(order.frame)];
        double fped = fields[static_cast<size_t>(order.ped)];
        row.x = fields[static_cast<size_t>(order.x)];
        row.y = fields[static_cast<size_t>(order.y)];
        check_data(std::isfinite(fframe) && std::isfinite(fped) && std::isfinite(row.x) && std::isfinite(row.y),
                   "parse error at line " + std::to_string(line_no) + " of " + path.string() +
                       ": non-finite field");
        row.frame = std::llround(fframe);
        row.ped = std::llround(fped);
        table.rows.push_back(row);
    }
    check_data(!table.rows.empty(), "empty input: no observations in " + path.string());

    std::sort(table.rows.begin(), table.rows.end(),
              [](const TrackRow& a, const TrackRow& b) { return std::tie(a.ped, a.frame) < std::tie(b.ped, b.frame); });
    for (size_t i = 1; i < table.rows.size(); ++i) {
        check_data(!(table.rows[i].ped == table.rows[i - 1].ped && table.rows[i].frame == table.rows[i - 1].frame),
                   "duplicate (frame, pedestrian) observation in " + path.string() + " for pedestrian " +
                       std::to_string(table.rows[i].ped));
    }
    return table;
}

void save_raw_scene(const RawTrackTable& table, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    check_data(static_cast<bool>(f), "cannot write scene file: " + path.string());
    char buf[128];
    for (const auto& row : table.rows) {
        std::snprintf(buf, sizeof buf, "%lld %lld %.17g %.17g\n", static_cast<long long>(row.frame),
                      static_cast<long long>(row.ped), row.x, row.y);
        f << buf;
    }
}

std::vector<TrajectoryWindow> window_scenes(const RawTrackTable& table, int64_t t_obs, int64_t t_pred,
                                            int64_t stride) {
    check_config(stride >= 1, "window stride must be >= 1");
    const int64_t span = t_obs + t_pred;

    // Sorted unique frame ids; "consecutive" means adjacent in this list.
    std::vector<int64_t> frames;
    frames.reserve(table.rows.size());
    for (const auto& r : table.rows) frames.push_back(r.frame);
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
    if (static_cast<int64_t>(frames.size()) < span) return {};

    std::map<int64_t, int64_t> frame_index;
    for (size_t i = 0; i < frames.size(); ++i) frame_index[frames[i]] = static_cast<int64_t>(i);

    // Per-pedestrian presence and positions keyed by frame index.
    struct Track {
        std::map<int64_t, std::pair<double, double>> by_index;
    };
    std::map<int64_t, Track> tracks;
    for (const auto& r : table.rows) tracks[r.ped].by_index[frame_index[r.frame]] = {r.x, r.y};

    std::vector<TrajectoryWindow> out;
    for (int64_t start = 0; start + span <= static_cast<int64_t>(frames.size()); start += stride) {
        std::vector<int64_t> present;
        for (const auto& [ped, tr] : tracks) {
            bool full = true;
            for (int64_t f = start; f < start + span; ++f) {
                if (!tr.by_index.count(f)) {
                    full = false;
                    break;
                }
            }
            if (full) present.push_back(ped);
        }
        if (present.empty()) continue;
        TrajectoryWindow w;
        w.scene = table.scene_name;
        w.start_frame = frames[static_cast<size_t>(start)];
        const int64_t n = static_cast<int64_t>(present.size());
        w.history = TrajArray(n, t_obs, 2);
        w.future = TrajArray(n, t_pred, 2);
        w.ped_ids = present;
        for (int64_t i = 0; i < n; ++i) {
            const auto& tr = tracks[present[static_cast<size_t>(i)]];
            for (int64_t f = 0; f < span; ++f) {
                auto [px, py] = tr.by_index.at(start + f);
                if (f < t_obs) {
                    w.history.at(i, f, 0) = px;
                    w.history.at(i, f, 1) = py;
                } else {
                    w.future.at(i, f - t_obs, 0) = px;
                    w.future.at(i, f - t_obs, 1) = py;
                }
            }
        }
        check_data(w.history.all_finite() && w.future.all_finite(), "non-finite coordinates in scene " + table.scene_name);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<NegativeWindow> make_negatives(const std::vector<TrajectoryWindow>& windows, double noise_bound,
                                           uint64_t seed) {
    check_config(noise_bound > 0.0, "noise_bound must be > 0");
    Rng rng(seed);
    std::uniform_real_distribution<double> dist(-noise_bound, noise_bound);
    std::vector<NegativeWindow> out;
    out.reserve(windows.size());
    for (size_t wi = 0; wi < windows.size(); ++wi) {
        NegativeWindow neg;
        neg.base_index = static_cast<int64_t>(wi);
        neg.noise_bound = noise_bound;
        neg.perturbed_future = windows[wi].future;
        bool any_diff = false;
        for (auto& v : neg.perturbed_future.d) {
            double delta = dist(rng);
            v += delta;
            any_diff = any_diff || delta != 0.0;
        }
        if (!any_diff && !neg.perturbed_future.d.empty()) neg.perturbed_future.d[0] += noise_bound * 0.5;
        out.push_back(std::move(neg));
    }
    return out;
}

DatasetSplit leave_one_out_split(const std::map<std::string, std::vector<TrajectoryWindow>>& scenes,
                                 const std::string& held_out, double val_fraction, uint64_t seed) {
    check_config(scenes.count(held_out) > 0, "unknown held-out scene: " + held_out);
    check_config(val_fraction > 0.0 && val_fraction < 1.0, "val_fraction must be in (0, 1)");

    DatasetSplit split;
    split.held_out_scene = held_out;

    std::vector<TrajectoryWindow> pool;
    for (const auto& [name, windows] : scenes) {
        if (name == held_out) continue;
        pool.insert(pool.end(), windows.begin(), windows.end());
    }
    check_data(!pool.empty(), "no windows outside the held-out scene");

    std::vector<size_t> order(pool.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    int64_t n_val = std::llround(val_fraction * static_cast<double>(pool.size()));
    n_val = std::max<int64_t>(1, std::min<int64_t>(n_val, static_cast<int64_t>(pool.size()) - 1));
    const size_t n_train = pool.size() - static_cast<size_t>(n_val);
    for (size_t i = 0; i < pool.size(); ++i) {
        if (i < n_train)
            split.train.push_back(pool[order[i]]);
        else
            split.val.push_back(pool[order[i]]);
    }
    return split;
}

namespace {
constexpr char kWindowsMagic[8] = {'T', 'P', 'A', 'D', 'W', 'I', 'N', '1'};
constexpr char kNegMagic[8] = {'T', 'P', 'A', 'D', 'N', 'E', 'G', '1'};
constexpr uint32_t kFormatVersion = 1;

void write_traj(std::ostream& os, const TrajArray& a) {
    io::write_i64(os, a.n);
    io::write_i64(os, a.t);
    io::write_i64(os, a.k);
    io::write_f64_array(os, a.d);
}

TrajArray read_traj(std::istream& is) {
    int64_t n = io::read_i64(is), t = io::read_i64(is), k = io::read_i64(is);
    check_data(n >= 0 && t >= 0 && k >= 0 && n * t * k < (int64_t{1} << 32), "corrupt trajectory header");
    TrajArray a(n, t, k);
    a.d = io::read_f64_array(is, static_cast<size_t>(n * t * k));
    return a;
}
} // namespace

void save_windows(const std::vector<TrajectoryWindow>& windows, const std::filesystem::path& path) {
    std::ostringstream os(std::ios::binary);
    io::write_magic(os, kWindowsMagic);
    io::write_u32(os, kFormatVersion);
    io::write_u32(os, static_cast<uint32_t>(windows.size()));
    for (const auto& w : windows) {
        io::write_string(os, w.scene);
        io::write_i64(os, w.start_frame);
        io::write_u32(os, static_cast<uint32_t>(w.ped_ids.size()));
        for (int64_t id : w.ped_ids) io::write_i64(os, id);
        write_traj(os, w.history);
        write_traj(os, w.future);
    }
    io::atomic_write(path, os.str());
}

std::vector<TrajectoryWindow> load_windows(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    check_data(static_cast<bool>(is), "cannot open windows cache: " + path.string());
    check_data(io::check_magic(is, kWindowsMagic), "not a windows cache: " + path.string());
    check_data(io::read_u32(is) == kFormatVersion, "unsupported windows cache version in " + path.string());
    uint32_t count = io::read_u32(is);
    std::vector<TrajectoryWindow> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        TrajectoryWindow w;
        w.scene = io::read_string(is);
        w.start_frame = io::read_i64(is);
        uint32_t n = io::read_u32(is);
        w.ped_ids.resize(n);
        for (auto& id : w.ped_ids) id = io::read_i64(is);
        w.history = read_traj(is);
        w.future = read_traj(is);
        out.push_back(std::move(w));
    }
    return out;
}

void save_negatives(const std::vector<NegativeWindow>& negs, const std::filesystem::path& path) {
    std::ostringstream os(std::ios::binary);
    io::write_magic(os, kNegMagic);
    io::write_u32(os, kFormatVersion);
    io::write_u32(os, static_cast<uint32_t>(negs.size()));
    for (const auto& n : negs) {
        io::write_i64(os, n.base_index);
        io::write_f64(os, n.noise_bound);
        write_traj(os, n.perturbed_future);
    }
    io::atomic_write(path, os.str());
}

std::vector<NegativeWindow> load_negatives(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    check_data(static_cast<bool>(is), "cannot open negatives cache: " + path.string());
    check_data(io::check_magic(is, kNegMagic), "not a negatives cache: " + path.string());
    check_data(io::read_u32(is) == kFormatVersion, "unsupported negatives cache version in " + path.string());
    uint32_t count = io::read_u32(is);
    std::vector<NegativeWindow> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NegativeWindow n;
        n.base_index = io::read_i64(is);
        n.noise_bound = io::read_f64(is);
        n.perturbed_future = read_traj(is);
        out.push_back(std::move(n));
    }
    return out;
}

RawTrackTable gen_synthetic_scene(const std::string& name, const SynthSceneConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> upos(-10.0, 10.0);
    std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> uspeed(cfg.min_speed, cfg.max_speed);
    std::uniform_real_distribution<double> udrift(-cfg.heading_drift, cfg.heading_drift);
    std::uniform_int_distribution<int> upeds(cfg.min_peds, cfg.max_peds);

    RawTrackTable table;
    table.scene_name = name;
    int64_t next_ped = 1;
    for (int cohort = 0; cohort < cfg.cohorts; ++cohort) {
        const int64_t frame0 = static_cast<int64_t>(cohort) * (cfg.frames_per_cohort + 5) * cfg.frame_stride;
        const int peds = upeds(rng);
        for (int p = 0; p < peds; ++p) {
            double x = upos(rng), y = upos(rng);
            double heading = uang(rng);
            double speed = uspeed(rng);
            int64_t ped_id = next_ped++;
            for (int f = 0; f < cfg.frames_per_cohort; ++f) {
                table.rows.push_back({frame0 + f * cfg.frame_stride, ped_id, x, y});
                heading += udrift(rng);
                x += speed * cfg.dt * std::cos(heading);
                y += speed * cfg.dt * std::sin(heading);
            }
        }
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const TrackRow& a, const TrackRow& b) { return std::tie(a.ped, a.frame) < std::tie(b.ped, b.frame); });
    return table;
}

} // namespace tpad::data
