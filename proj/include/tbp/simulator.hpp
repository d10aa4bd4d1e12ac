#pragma once

// Synthetic pedestrian scenes: social-force agents walking waypoint routes
// across a rectangular arena, with ground truth and corrupted detections.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tbp/predictor.hpp"
#include "tbp/scene.hpp"

namespace tbp::sim {

// Detections of agent `agent` (a ground-truth id) are suppressed for frames
// [start_frame, start_frame + duration).
struct Occlusion {
    int agent = 1;
    int start_frame = 1;
    int duration = 1;

    friend bool operator==(const Occlusion&, const Occlusion&) = default;
};

// An agent with a fixed route. It appears at route[0] on start_frame and
// leaves once it reaches the last route point.
struct ScriptedAgent {
    int start_frame = 1;
    double speed = 0.5;
    std::vector<Point2> route;

    friend bool operator==(const ScriptedAgent&, const ScriptedAgent&) = default;
};

// Random: each agent walks edge -> random interior waypoints -> another edge.
// Paths: each agent follows one of a fixed set of bent walkways spanning the
// arena (scaled to the bounds), offset sideways by up to path_spread.
enum class RouteLayout { Random, Paths };

std::string_view layout_name(RouteLayout l);
RouteLayout parse_layout(std::string_view s);

struct SceneConfig {
    std::uint64_t seed = 1;
    predictor::SceneBounds bounds{0.0, 0.0, 30.0, 30.0};
    int frames = 120;

    // Agents on random routes, entering over the first entry_window of frames.
    int agents = 6;
    int groups = 0;          // groups sharing a route, in addition to `agents`
    int group_size = 3;
    RouteLayout layout = RouteLayout::Paths;
    int max_waypoints = 2;   // interior waypoints per random route
    double path_spread = 1.0;
    double entry_window = 0.6;

    // Dynamics, in scene units and frames.
    double speed_min = 0.4;
    double speed_max = 0.6;
    double max_speed = 0.8;
    double relaxation = 1.25;       // frames to reach the preferred velocity
    double repulsion = 0.15;        // peak repulsive acceleration
    double repulsion_range = 0.5;   // exponential fall-off length
    double agent_radius = 0.3;
    double cohesion = 0.1;          // pull towards the group centroid
    double cohesion_slack = 1.0;    // no pull inside this distance
    int substeps = 4;

    // Detection corruption.
    double p_miss = 0.0;
    double clutter_rate = 0.0;  // mean clutter detections per frame
    double jitter = 0.0;        // positional standard deviation

    std::vector<ScriptedAgent> scripted;
    std::vector<Occlusion> occlusions;

    void validate() const;
    friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

struct Scene {
    TrackSet ground_truth;           // ids 1.. : scripted, then groups, then random
    DetectionStream detections;      // one entry per frame 1..frames
    std::vector<int> group_of;       // per ground-truth id - 1; -1 = no group
    std::size_t clutter_count = 0;
};

Scene generate(const SceneConfig& config);

struct NamedScene {
    std::string name;
    SceneConfig config;
};

// Frozen benchmark suite used by the ablation.
std::vector<NamedScene> standard_benchmark();

// Random scenes for predictor training and evaluation; seeds are
// base_seed, base_seed + 1, ...
std::vector<SceneConfig> training_scenes(std::size_t count, std::uint64_t base_seed);

struct WindowOptions {
    std::size_t stride = 1;
    // Shortest history that still produces a (left-padded) window; 0 means
    // the full observation length.
    std::size_t min_history = 0;
};

// Sliding windows over ground-truth trajectories, normalised by cfg.bounds.
// Neighbours are the other trajectories present at the last observed frame
// within cfg.neighbour_radius of the subject.
std::vector<predictor::TrainingSample> make_training_set(const TrackSet& ground_truth,
                                                         const predictor::PredictorConfig& cfg,
                                                         predictor::Horizon horizon,
                                                         const WindowOptions& opt = {});

std::vector<predictor::TrainingSample> make_training_set(std::span<const SceneConfig> scenes,
                                                         const predictor::PredictorConfig& cfg,
                                                         predictor::Horizon horizon,
                                                         const WindowOptions& opt = {});

}  // namespace tbp::sim
