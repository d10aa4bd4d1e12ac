#include "tbp/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tbp/error.hpp"
#include "tbp/metrics.hpp"
#include "tbp/motio.hpp"
#include "tbp/predictor.hpp"
#include "tbp/simulator.hpp"
#include "tbp/tracker.hpp"

namespace tbp::cli {

namespace {

namespace fs = std::filesystem;

// Options shared by every subcommand.
struct Common {
    std::string config;
    std::vector<std::string> sets;
    bool lax = false;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "Config file (default: $TBP_CONFIG if set)");
    app->add_option("--set", c.sets, "Override a config key, key=value (repeatable)");
    app->add_flag("--lax", c.lax, "Warn about unknown config keys instead of failing");
    app->add_option("--seed", c.seed, "Random seed");
}

io::RunConfig resolve(const Common& c) {
    io::RunConfig cfg;
    std::vector<std::string> warnings;
    const auto path = io::resolve_config_path(c.config.empty() ? std::nullopt : std::optional(c.config));
    if (path) cfg = io::load_config(*path, !c.lax, &warnings);
    io::apply_overrides(cfg, c.sets, !c.lax, &warnings);
    cfg.validate();
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    return cfg;
}

std::string bounds_text(const predictor::SceneBounds& b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "[%g, %g] x [%g, %g]", b.xmin, b.xmax, b.ymin, b.ymax);
    return buf;
}

predictor::Predictor load_model(const std::string& path) {
    if (!fs::exists(path)) throw Error("checkpoint not found: '" + path + "'");
    return predictor::from_checkpoint(nn::load_checkpoint(path));
}

// Tracker settings with the models' predictor configuration; explicit config
// bounds replace the checkpoint bounds.
tracking::TrackerConfig tracker_config(const io::RunConfig& cfg, predictor::Predictor& short_model,
                                       predictor::Predictor& long_model) {
    if (cfg.bounds_explicit) {
        short_model.config.bounds = cfg.tracker.predictor.bounds;
        long_model.config.bounds = cfg.tracker.predictor.bounds;
    }
    if (!(short_model.config.bounds == long_model.config.bounds))
        throw ConfigError("short and long checkpoints were trained with different scene bounds; set predictor.bounds");
    auto t = cfg.tracker;
    t.predictor = long_model.config;
    t.validate();
    std::cerr << "bounds: " << bounds_text(t.predictor.bounds) << '\n';
    return t;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string out_gt, out_det, benchmark;
};

int simulate(const SimulateArgs& a) {
    auto cfg = resolve(a.common);
    sim::SceneConfig scene = cfg.scene;
    if (!a.benchmark.empty()) {
        const auto suite = sim::standard_benchmark();
        auto it = std::find_if(suite.begin(), suite.end(), [&](const sim::NamedScene& s) { return s.name == a.benchmark; });
        if (it == suite.end()) throw ConfigError("unknown benchmark scene '" + a.benchmark + "'");
        scene = it->config;
    }
    if (a.common.seed) scene.seed = *a.common.seed;
    const auto s = sim::generate(scene);
    io::write_mot_file(a.out_gt, io::from_tracks(s.ground_truth, cfg.box_width, cfg.box_height));
    io::write_mot_file(a.out_det, io::from_detections(s.detections));
    std::size_t dets = 0, gt_points = 0;
    for (const auto& df : s.detections) dets += df.detections.size();
    for (const auto& [id, seq] : s.ground_truth) gt_points += seq.size();
    std::cout << "frames " << scene.frames << '\n'
              << "targets " << s.ground_truth.size() << '\n'
              << "gt_points " << gt_points << '\n'
              << "detections " << dets << '\n'
              << "clutter " << s.clutter_count << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string data, horizon = "long", out, fine_tune, loss_curve;
    std::optional<std::size_t> hidden, epochs, synthetic;
    std::optional<double> lr;
};

std::vector<TrackSet> read_ground_truth(const std::string& data) {
    std::vector<std::string> files;
    if (fs::is_directory(data)) {
        for (const auto& e : fs::directory_iterator(data))
            if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(data)) {
        files.push_back(data);
    } else {
        throw Error("training data not found: '" + data + "'");
    }
    if (files.empty()) throw Error("no .txt ground-truth files in '" + data + "'");
    std::vector<TrackSet> out;
    for (const auto& f : files) out.push_back(io::to_tracks(io::read_mot_file(f)));
    return out;
}

int train(const TrainArgs& a) {
    auto cfg = resolve(a.common);
    if (a.data.empty() == !a.synthetic.has_value()) throw ConfigError("train needs exactly one of --data or --synthetic");
    const auto horizon = predictor::parse_horizon(a.horizon);
    const std::uint64_t seed = a.common.seed.value_or(cfg.train.seed);

    predictor::Predictor model;
    if (!a.fine_tune.empty()) {
        model = load_model(a.fine_tune);
        if (model.horizon != horizon) throw ConfigError("--fine-tune checkpoint has a different horizon");
        if (a.hidden && *a.hidden != model.config.hidden_dim)
            throw ConfigError("--hidden differs from the fine-tuned checkpoint");
        if (cfg.bounds_explicit) model.config.bounds = cfg.tracker.predictor.bounds;
    } else {
        auto pc = cfg.tracker.predictor;
        if (a.hidden) pc.hidden_dim = *a.hidden;
        if (!cfg.bounds_explicit) {
            if (a.synthetic) {
                pc.bounds = cfg.scene.bounds;
            } else {
                std::vector<Point2> pts;
                for (const auto& ts : read_ground_truth(a.data))
                    for (const auto& [id, s] : ts) pts.insert(pts.end(), s.points().begin(), s.points().end());
                pc.bounds = io::infer_bounds(pts);
            }
        }
        model = predictor::make_predictor(pc, horizon, seed);
    }
    std::cerr << "bounds: " << bounds_text(model.config.bounds) << '\n';

    const sim::WindowOptions windows{cfg.train.stride, 0};
    std::vector<predictor::TrainingSample> samples;
    if (a.synthetic) {
        auto scenes = sim::training_scenes(*a.synthetic, seed);
        for (auto& s : scenes) s.bounds = cfg.scene.bounds;
        samples = sim::make_training_set(scenes, model.config, horizon, windows);
    } else {
        for (const auto& ts : read_ground_truth(a.data)) {
            auto part = sim::make_training_set(ts, model.config, horizon, windows);
            samples.insert(samples.end(), part.begin(), part.end());
        }
    }
    if (samples.empty()) throw Error("training data yields no windows for this horizon");

    predictor::TrainOptions opt;
    opt.epochs = a.epochs.value_or(cfg.train.epochs);
    opt.batch_size = cfg.train.batch_size;
    opt.learning_rate = a.lr.value_or(cfg.train.learning_rate);
    opt.grad_clip = cfg.train.grad_clip;
    opt.seed = seed;
    opt.on_epoch = [](std::size_t e, double loss) { std::cerr << "epoch " << e << " loss " << loss << '\n'; };
    std::cerr << "samples: " << samples.size() << '\n';
    const auto result = predictor::train(model, samples, opt);

    nn::save_checkpoint(a.out, predictor::to_checkpoint(model));
    const std::string curve_path = a.loss_curve.empty() ? a.out + ".loss" : a.loss_curve;
    std::ofstream curve(curve_path);
    if (!curve) throw Error("cannot write '" + curve_path + "'");
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu %.10g\n", e, result.loss_curve[e]);
        curve << buf;
    }
    // Judged on the full-data loss after training, computed like the initial one.
    const double first = result.loss_curve.front();
    const double last = opt.epochs == 0 ? first : predictor::mean_loss(model, samples);
    std::cout << "initial_loss " << first << "\nfinal_loss " << last << "\nsamples " << samples.size() << '\n';
    // A model that already fits the data exactly has nothing left to improve.
    if (opt.epochs > 0 && !(last < first) && !(first == 0.0 && last == 0.0)) {
        std::cerr << "error: final loss did not improve on the initial loss\n";
        return kCheckFailed;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
    Common common;
    std::string ckpt, tracks, out;
};

int predict(const PredictArgs& a) {
    auto cfg = resolve(a.common);
    auto model = load_model(a.ckpt);
    if (cfg.bounds_explicit) model.config.bounds = cfg.tracker.predictor.bounds;
    const auto& b = model.config.bounds;
    const auto tracks = io::to_tracks(io::read_mot_file(a.tracks));

    // Positions known at each frame, for the neighbour snapshot.
    TrackSet normalised;
    for (const auto& [id, s] : tracks) {
        PointSequence n;
        for (std::size_t i = 0; i < s.size(); ++i) n.push_back(b.normalize(s[i]), s.frames()[i]);
        normalised[id] = std::move(n);
    }
    TrackSet out;
    for (const auto& [id, s] : normalised) {
        const int last = s.frames().back();
        std::vector<std::vector<Point2>> neighbours;
        for (const auto& [oid, o] : normalised) {
            if (oid == id) continue;
            const auto& fr = o.frames();
            auto it = std::upper_bound(fr.begin(), fr.end(), last);
            if (it == fr.begin() || *(it - 1) != last) continue;
            const auto end = static_cast<std::size_t>(it - fr.begin());
            if (euclidean(o[end - 1], s.back()) > model.config.neighbour_radius) continue;
            const std::size_t k = std::min(end, model.obs_len());
            neighbours.emplace_back(o.points().begin() + static_cast<std::ptrdiff_t>(end - k),
                                    o.points().begin() + static_cast<std::ptrdiff_t>(end));
        }
        const auto r = predictor::predict(model, s, neighbours);
        PointSequence p;
        for (std::size_t i = 0; i < r.positions.size(); ++i) p.push_back(b.denormalize(r.positions[i]), r.positions.frames()[i]);
        out[id] = std::move(p);
    }
    const auto records = io::from_tracks(out, cfg.box_width, cfg.box_height);
    if (a.out.empty())
        std::cout << io::write_mot(records);
    else
        io::write_mot_file(a.out, records);
    return kOk;
}

// ---------------------------------------------------------------------------

struct TrackArgs {
    Common common;
    std::string det, short_ckpt, long_ckpt, out, mode;
};

int track(const TrackArgs& a) {
    auto cfg = resolve(a.common);
    if (!a.mode.empty()) cfg.tracker.mode = tracking::parse_mode(a.mode);
    auto short_model = load_model(a.short_ckpt);
    auto long_model = load_model(a.long_ckpt);
    if (short_model.horizon != predictor::Horizon::Short || long_model.horizon != predictor::Horizon::Long)
        throw ConfigError("--short and --long must be short- and long-horizon checkpoints");
    const auto tc = tracker_config(cfg, short_model, long_model);
    const auto stream = io::to_detections(io::read_mot_file(a.det));
    const auto tracks = tracking::run(stream, tc, short_model, long_model);
    io::write_mot_file(a.out, io::from_tracks(tracks, cfg.box_width, cfg.box_height));
    std::cout << "mode " << tracking::mode_name(tc.mode) << "\ntracks " << tracks.size() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    Common common;
    std::string gt, res;
    std::optional<double> threshold;
};

int evaluate(const EvaluateArgs& a) {
    auto cfg = resolve(a.common);
    const double thr = a.threshold.value_or(cfg.eval_threshold);
    const auto gt = io::to_tracks(io::read_mot_file(a.gt));
    const auto res = io::to_tracks(io::read_mot_file(a.res));
    if (gt.empty()) throw Error("ground truth file is empty");
    const auto gf = by_frame(gt), rf = by_frame(res);
    // Disjoint frame ranges almost always mean mismatched files.
    if (!rf.empty() && (rf.rbegin()->first < gf.begin()->first || rf.begin()->first > gf.rbegin()->first))
        throw Error("result frames [" + std::to_string(rf.begin()->first) + ", " + std::to_string(rf.rbegin()->first) +
                    "] do not overlap the ground-truth frames [" + std::to_string(gf.begin()->first) + ", " +
                    std::to_string(gf.rbegin()->first) + "]");
    const auto r = metrics::evaluate_tracking(gt, res, thr);
    std::cout << metrics::format_table_header() << metrics::format_table(r, fs::path(a.res).stem().string()) << '\n'
              << metrics::format_key_values(r);
    return kOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
    Common common;
    std::string suite = "standard", short_ckpt, long_ckpt;
    std::optional<double> threshold;
    bool assert_ordering = false;
};

int ablate(const AblateArgs& a) {
    auto cfg = resolve(a.common);
    if (a.suite != "standard") throw ConfigError("unknown suite '" + a.suite + "'");
    const double thr = a.threshold.value_or(cfg.eval_threshold);
    auto short_model = load_model(a.short_ckpt);
    auto long_model = load_model(a.long_ckpt);
    const auto base = tracker_config(cfg, short_model, long_model);
    const auto suite = sim::standard_benchmark();
    std::vector<sim::Scene> scenes;
    for (const auto& s : suite) scenes.push_back(sim::generate(s.config));

    const tracking::Mode modes[] = {tracking::Mode::T1, tracking::Mode::T2, tracking::Mode::T3, tracking::Mode::T4};
    std::map<tracking::Mode, metrics::EvalReport> pooled;
    std::cout << metrics::format_table_header();
    for (auto m : modes) {
        auto tc = base;
        tc.mode = m;
        std::vector<metrics::EvalReport> parts;
        for (const auto& s : scenes)
            parts.push_back(metrics::evaluate_tracking(s.ground_truth,
                                                       tracking::run(s.detections, tc, short_model, long_model), thr));
        pooled[m] = metrics::combine(parts);
        std::cout << metrics::format_table(pooled[m], std::string(tracking::mode_name(m)));
    }
    if (!a.assert_ordering) return kOk;

    const auto& t1 = pooled[tracking::Mode::T1];
    const auto& t2 = pooled[tracking::Mode::T2];
    const auto& t3 = pooled[tracking::Mode::T3];
    const auto& t4 = pooled[tracking::Mode::T4];
    struct Check {
        const char* name;
        bool ok;
    };
    const Check checks[] = {
        {"MOTA(T4) >= MOTA(T1) + 5 points", t4.mota >= t1.mota + 0.05},
        {"MOTA(T4) >= MOTA(T2)", t4.mota >= t2.mota},
        {"MOTA(T4) >= MOTA(T3)", t4.mota >= t3.mota},
        {"MOTA(T3) >= MOTA(T1) - 2 points", t3.mota >= t1.mota - 0.02},
        {"IDS(T4) < IDS(T1)", t4.ids < t1.ids},
        {"Frag(T4) < Frag(T1)", t4.frag < t1.frag},
    };
    bool all = true;
    std::cout << '\n';
    for (const auto& c : checks) {
        std::cout << (c.ok ? "ok     " : "FAILED ") << c.name << '\n';
        all = all && c.ok;
    }
    return all ? kOk : kCheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Tracking by trajectory prediction: simulate, train, predict, track, evaluate, ablate"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "tbp 1.0.0");

    SimulateArgs sa;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic scene: ground truth and detections");
    add_common(sim_cmd, sa.common);
    sim_cmd->add_option("--out-gt", sa.out_gt, "Ground-truth MOT file to write")->required();
    sim_cmd->add_option("--out-det", sa.out_det, "Detection MOT file to write")->required();
    sim_cmd->add_option("--benchmark", sa.benchmark, "Use a named scene of the standard suite instead of scene.*");

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train a trajectory predictor on ground-truth tracks");
    add_common(train_cmd, ta.common);
    train_cmd->add_option("--data", ta.data, "Ground-truth MOT file or directory of .txt files");
    train_cmd->add_option("--synthetic", ta.synthetic, "Train on N generated scenes instead of --data");
    train_cmd->add_option("--horizon", ta.horizon, "short or long")->check(CLI::IsMember({"short", "long"}));
    train_cmd->add_option("--out", ta.out, "Checkpoint to write")->required();
    train_cmd->add_option("--hidden", ta.hidden, "Hidden state size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", ta.lr, "Learning rate")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--epochs", ta.epochs, "Training epochs (0 writes the initial model)");
    train_cmd->add_option("--fine-tune", ta.fine_tune, "Start from this checkpoint");
    train_cmd->add_option("--loss-curve", ta.loss_curve, "Loss curve file (default: <out>.loss)");

    PredictArgs pa;
    auto* pred_cmd = app.add_subcommand("predict", "Predict the continuation of every track in a MOT file");
    add_common(pred_cmd, pa.common);
    pred_cmd->add_option("--ckpt", pa.ckpt, "Predictor checkpoint")->required();
    pred_cmd->add_option("--tracks", pa.tracks, "Track MOT file")->required();
    pred_cmd->add_option("--out", pa.out, "Output MOT file (default: stdout)");

    TrackArgs ka;
    auto* track_cmd = app.add_subcommand("track", "Track detections");
    add_common(track_cmd, ka.common);
    track_cmd->add_option("--det", ka.det, "Detection MOT file")->required();
    track_cmd->add_option("--short", ka.short_ckpt, "Short-horizon checkpoint")->required();
    track_cmd->add_option("--long", ka.long_ckpt, "Long-horizon checkpoint")->required();
    track_cmd->add_option("--out", ka.out, "Result MOT file to write")->required();
    track_cmd->add_option("--mode", ka.mode, "T1 association only, T2 +spatial merge, T3 +context merge, T4 both")
        ->check(CLI::IsMember({"T1", "T2", "T3", "T4", "t1", "t2", "t3", "t4"}));

    EvaluateArgs ea;
    auto* eval_cmd = app.add_subcommand("evaluate", "CLEAR-MOT metrics of a result file against ground truth");
    add_common(eval_cmd, ea.common);
    eval_cmd->add_option("--gt", ea.gt, "Ground-truth MOT file")->required();
    eval_cmd->add_option("--res", ea.res, "Result MOT file")->required();
    eval_cmd->add_option("--threshold", ea.threshold, "Match distance in scene units")->check(CLI::PositiveNumber);

    AblateArgs aa;
    auto* abl_cmd = app.add_subcommand("ablate", "Run modes T1-T4 over a benchmark suite");
    add_common(abl_cmd, aa.common);
    abl_cmd->add_option("--suite", aa.suite, "Benchmark suite")->check(CLI::IsMember({"standard"}));
    abl_cmd->add_option("--short", aa.short_ckpt, "Short-horizon checkpoint")->required();
    abl_cmd->add_option("--long", aa.long_ckpt, "Long-horizon checkpoint")->required();
    abl_cmd->add_option("--threshold", aa.threshold, "Match distance in scene units")->check(CLI::PositiveNumber);
    abl_cmd->add_flag("--assert-ordering", aa.assert_ordering, "Exit 3 unless the expected mode ordering holds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*sim_cmd) return simulate(sa);
        if (*train_cmd) return train(ta);
        if (*pred_cmd) return predict(pa);
        if (*track_cmd) return track(ka);
        if (*eval_cmd) return evaluate(ea);
        if (*abl_cmd) return ablate(aa);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace tbp::cli
