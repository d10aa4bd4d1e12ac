#include "tbp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tbp/error.hpp"

namespace tbp::sim {

namespace {

constexpr double kWaypointSwitch = 1.0;  // move on to the next waypoint inside this radius
constexpr double kArrival = 0.5;         // leave the scene inside this radius of the exit
constexpr double kEdgeInset = 0.1;

Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
Point2 operator*(double k, Point2 a) { return {k * a.x, k * a.y}; }
double norm(Point2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }

struct Agent {
    int id = 0;
    int start = 1;
    int group = -1;
    double speed = 0.5;
    std::vector<Point2> route;
    std::size_t next = 1;
    Point2 p, v;
    bool active = false;
    bool done = false;
};

bool inside(const predictor::SceneBounds& b, Point2 p) {
    return p.x >= b.xmin && p.x <= b.xmax && p.y >= b.ymin && p.y <= b.ymax;
}

Point2 clamp_inside(const predictor::SceneBounds& b, Point2 p) {
    return {std::clamp(p.x, b.xmin + kEdgeInset, b.xmax - kEdgeInset),
            std::clamp(p.y, b.ymin + kEdgeInset, b.ymax - kEdgeInset)};
}

Point2 edge_point(const predictor::SceneBounds& b, int edge, std::mt19937_64& rng) {
    const double mx = 0.1 * b.width(), my = 0.1 * b.height();
    std::uniform_real_distribution<double> ux(b.xmin + mx, b.xmax - mx), uy(b.ymin + my, b.ymax - my);
    switch (edge) {
        case 0: return {b.xmin + kEdgeInset, uy(rng)};
        case 1: return {b.xmax - kEdgeInset, uy(rng)};
        case 2: return {ux(rng), b.ymin + kEdgeInset};
        default: return {ux(rng), b.ymax - kEdgeInset};
    }
}

std::vector<Point2> random_route(const SceneConfig& c, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> edge(0, 3), other(1, 3), count(0, c.max_waypoints);
    const int in = edge(rng);
    const int out = (in + other(rng)) % 4;
    std::vector<Point2> route{edge_point(c.bounds, in, rng)};
    const double mx = 0.2 * c.bounds.width(), my = 0.2 * c.bounds.height();
    std::uniform_real_distribution<double> ux(c.bounds.xmin + mx, c.bounds.xmax - mx),
        uy(c.bounds.ymin + my, c.bounds.ymax - my);
    const int n = count(rng);
    for (int i = 0; i < n; ++i) route.push_back({ux(rng), uy(rng)});
    route.push_back(edge_point(c.bounds, out, rng));
    return route;
}

// Walkways in arena fractions; each is walked in either direction.
const std::vector<std::vector<Point2>>& walkways() {
    static const std::vector<std::vector<Point2>> w{
        {{0.0, 0.3}, {0.4, 0.3}, {0.6, 0.7}, {1.0, 0.7}},
        {{0.3, 0.0}, {0.3, 0.55}, {1.0, 0.55}},
        {{0.75, 1.0}, {0.75, 0.4}, {0.0, 0.4}},
        {{0.0, 0.85}, {0.5, 0.85}, {0.5, 0.0}},
        {{1.0, 0.15}, {0.2, 0.15}, {0.2, 1.0}},
        {{0.0, 0.5}, {1.0, 0.5}},
        {{0.1, 0.0}, {0.55, 0.45}, {0.9, 1.0}},
        {{0.9, 0.0}, {0.9, 0.3}, {0.6, 0.3}, {0.45, 1.0}},
    };
    return w;
}

std::vector<Point2> walkway_route(const SceneConfig& c, std::mt19937_64& rng) {
    const auto& all = walkways();
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    std::bernoulli_distribution flip(0.5);
    std::uniform_real_distribution<double> off(-c.path_spread, c.path_spread);
    auto w = all[pick(rng)];
    if (flip(rng)) std::reverse(w.begin(), w.end());
    const Point2 o{off(rng), off(rng)};
    std::vector<Point2> route;
    for (const auto& f : w) {
        const Point2 p{c.bounds.xmin + f.x * c.bounds.width(), c.bounds.ymin + f.y * c.bounds.height()};
        route.push_back(clamp_inside(c.bounds, p + o));
    }
    return route;
}

std::vector<Point2> make_route(const SceneConfig& c, std::mt19937_64& rng) {
    return c.layout == RouteLayout::Paths ? walkway_route(c, rng) : random_route(c, rng);
}

void start_agent(Agent& a) {
    a.active = true;
    a.p = a.route[0];
    const Point2 d = a.route[1] - a.route[0];
    const double len = norm(d);
    a.v = len > 0.0 ? (a.speed / len) * d : Point2{0.0, 0.0};
}

void integrate(std::vector<Agent>& agents, const SceneConfig& c) {
    const double h = 1.0 / c.substeps;
    const double reach = 2.0 * c.agent_radius + 8.0 * c.repulsion_range;
    std::vector<Point2> acc(agents.size());
    for (int sub = 0; sub < c.substeps; ++sub) {
        for (std::size_t i = 0; i < agents.size(); ++i) {
            const Agent& a = agents[i];
            acc[i] = {0.0, 0.0};
            if (!a.active) continue;
            const Point2 to_goal = a.route[a.next] - a.p;
            const double dist = norm(to_goal);
            const Point2 desired = dist > 0.0 ? (a.speed / dist) * to_goal : Point2{0.0, 0.0};
            acc[i] = (1.0 / c.relaxation) * (desired - a.v);

            Point2 centroid{0.0, 0.0};
            int mates = 0;
            for (std::size_t j = 0; j < agents.size(); ++j) {
                const Agent& b = agents[j];
                if (j == i || !b.active) continue;
                Point2 d = a.p - b.p;
                double r = norm(d);
                if (r < reach) {
                    if (r == 0.0) {
                        d = {a.id < b.id ? -1.0 : 1.0, 0.0};
                        r = 1.0;
                    }
                    const double mag = c.repulsion * std::exp((2.0 * c.agent_radius - r) / c.repulsion_range);
                    acc[i] = acc[i] + (mag / r) * d;
                }
                if (a.group >= 0 && b.group == a.group) {
                    centroid = centroid + b.p;
                    ++mates;
                }
            }
            if (mates > 0) {
                const Point2 to_c = (1.0 / mates) * centroid - a.p;
                const double r = norm(to_c);
                if (r > c.cohesion_slack) acc[i] = acc[i] + (c.cohesion * (r - c.cohesion_slack) / r) * to_c;
            }
        }
        for (std::size_t i = 0; i < agents.size(); ++i) {
            Agent& a = agents[i];
            if (!a.active) continue;
            a.v = a.v + h * acc[i];
            const double s = norm(a.v);
            if (s > c.max_speed) a.v = (c.max_speed / s) * a.v;
            a.p = a.p + h * a.v;
        }
    }
    for (Agent& a : agents) {
        if (!a.active) continue;
        const bool last = a.next + 1 == a.route.size();
        const double dist = norm(a.route[a.next] - a.p);
        if (!last && dist < kWaypointSwitch) ++a.next;
        if ((last && dist < kArrival) || !inside(c.bounds, a.p)) {
            a.active = false;
            a.done = true;
        }
    }
}

std::vector<Agent> make_agents(const SceneConfig& c, std::mt19937_64& rng) {
    std::vector<Agent> agents;
    for (const auto& s : c.scripted) {
        Agent a;
        a.start = s.start_frame;
        a.speed = s.speed;
        a.route = s.route;
        agents.push_back(a);
    }
    const int last_entry = std::max(1, static_cast<int>(c.entry_window * c.frames));
    std::uniform_int_distribution<int> start(1, last_entry);
    std::uniform_real_distribution<double> speed(c.speed_min, c.speed_max), off(-1.0, 1.0);
    for (int g = 0; g < c.groups; ++g) {
        const auto route = make_route(c, rng);
        const int t0 = start(rng);
        const double v = speed(rng);
        for (int m = 0; m < c.group_size; ++m) {
            Agent a;
            a.start = t0;
            a.speed = v;
            a.group = g;
            const Point2 o{off(rng), off(rng)};
            for (const auto& p : route) a.route.push_back(clamp_inside(c.bounds, p + o));
            agents.push_back(a);
        }
    }
    for (int i = 0; i < c.agents; ++i) {
        Agent a;
        a.route = make_route(c, rng);
        a.start = start(rng);
        a.speed = speed(rng);
        agents.push_back(a);
    }
    for (std::size_t i = 0; i < agents.size(); ++i) agents[i].id = static_cast<int>(i) + 1;
    return agents;
}

}  // namespace

std::string_view layout_name(RouteLayout l) { return l == RouteLayout::Paths ? "paths" : "random"; }

RouteLayout parse_layout(std::string_view s) {
    if (s == "paths") return RouteLayout::Paths;
    if (s == "random") return RouteLayout::Random;
    throw ConfigError("scene.layout must be 'paths' or 'random', got '" + std::string(s) + "'");
}

void SceneConfig::validate() const {
    if (frames < 1) throw ConfigError("scene.frames must be >= 1");
    if (agents < 0 || groups < 0 || group_size < 1 || max_waypoints < 0)
        throw ConfigError("scene agent counts must be non-negative");
    if (!(bounds.xmax > bounds.xmin) || !(bounds.ymax > bounds.ymin))
        throw ConfigError("scene bounds must have positive extent");
    if (!(p_miss >= 0.0 && p_miss <= 1.0)) throw ConfigError("scene.p_miss must lie in [0, 1]");
    if (!(clutter_rate >= 0.0)) throw ConfigError("scene.clutter_rate must be >= 0");
    if (!(jitter >= 0.0)) throw ConfigError("scene.jitter must be >= 0");
    if (!(path_spread >= 0.0)) throw ConfigError("scene.path_spread must be >= 0");
    if (!(speed_min > 0.0 && speed_max >= speed_min && max_speed >= speed_max))
        throw ConfigError("scene speeds must satisfy 0 < speed_min <= speed_max <= max_speed");
    if (!(relaxation > 0.0) || !(repulsion_range > 0.0) || repulsion < 0.0 || cohesion < 0.0 ||
        substeps < 1 || !(entry_window > 0.0 && entry_window <= 1.0))
        throw ConfigError("scene dynamics parameters out of range");
    for (const auto& s : scripted) {
        if (s.route.size() < 2) throw ConfigError("scripted agent route needs at least 2 points");
        if (!(s.speed > 0.0 && s.speed <= max_speed))
            throw ConfigError("scripted agent speed must lie in (0, max_speed]");
        if (s.start_frame < 1) throw ConfigError("scripted agent start frame must be >= 1");
    }
    for (const auto& o : occlusions)
        if (o.agent < 1 || o.duration < 1) throw ConfigError("occlusion needs agent >= 1 and duration >= 1");
}

Scene generate(const SceneConfig& c) {
    c.validate();
    // Separate streams so that corruption settings never change the motion.
    std::seed_seq motion_seed{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32), 1u};
    std::seed_seq sensor_seed{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32), 2u};
    std::mt19937_64 motion(motion_seed), sensor(sensor_seed);

    auto agents = make_agents(c, motion);
    Scene scene;
    for (const auto& a : agents) scene.group_of.push_back(a.group);

    std::normal_distribution<double> noise(0.0, c.jitter > 0.0 ? c.jitter : 1.0);
    std::bernoulli_distribution miss(c.p_miss);
    std::poisson_distribution<int> clutter(c.clutter_rate > 0.0 ? c.clutter_rate : 1.0);
    std::uniform_real_distribution<double> ux(c.bounds.xmin, c.bounds.xmax), uy(c.bounds.ymin, c.bounds.ymax);

    for (int f = 1; f <= c.frames; ++f) {
        integrate(agents, c);
        for (auto& a : agents)
            if (!a.active && !a.done && a.start == f) start_agent(a);

        DetectionFrame df{f, {}};
        for (const auto& a : agents) {
            if (!a.active) continue;
            scene.ground_truth[a.id].push_back(a.p, f);
            const bool occluded = std::any_of(c.occlusions.begin(), c.occlusions.end(), [&](const Occlusion& o) {
                return o.agent == a.id && f >= o.start_frame && f < o.start_frame + o.duration;
            });
            if (occluded || miss(sensor)) continue;
            Point2 q = a.p;
            if (c.jitter > 0.0) q = {q.x + noise(sensor), q.y + noise(sensor)};
            df.detections.push_back({q});
        }
        const int n_clutter = c.clutter_rate > 0.0 ? clutter(sensor) : 0;
        for (int k = 0; k < n_clutter; ++k) df.detections.push_back({{ux(sensor), uy(sensor)}});
        scene.clutter_count += static_cast<std::size_t>(n_clutter);
        std::shuffle(df.detections.begin(), df.detections.end(), sensor);
        scene.detections.push_back(std::move(df));
    }
    return scene;
}

// ---------------------------------------------------------------------------

std::vector<NamedScene> standard_benchmark() {
    std::vector<NamedScene> suite;
    auto base = [](std::uint64_t seed) {
        SceneConfig c;
        c.seed = seed;
        c.frames = 120;
        c.agents = 5;
        c.p_miss = 0.08;
        c.jitter = 0.05;
        c.clutter_rate = 0.2;
        return c;
    };
    auto walker = [](int start, Point2 from, Point2 to) {
        return ScriptedAgent{start, 0.5, {from, to}};
    };

    {
        auto c = base(101);
        c.scripted = {walker(5, {0.5, 10}, {29.5, 20}), walker(5, {0.5, 20}, {29.5, 10}),
                      walker(30, {10, 0.5}, {20, 29.5}), walker(30, {20, 0.5}, {10, 29.5})};
        suite.push_back({"crossing", c});
    }
    {
        auto c = base(102);
        c.groups = 1;
        c.group_size = 4;
        suite.push_back({"group", c});
    }
    for (auto [seed, gap] : {std::pair{103, 3}, {104, 8}, {105, 12}}) {
        auto c = base(static_cast<std::uint64_t>(seed));
        c.scripted = {walker(5, {0.5, 15}, {29.5, 15})};
        c.occlusions = {{1, 30, gap}};
        suite.push_back({"occlusion-" + std::to_string(gap), c});
    }
    {
        auto c = base(106);
        c.clutter_rate = 2.0;
        c.p_miss = 0.12;
        suite.push_back({"clutter", c});
    }
    {
        auto c = base(107);
        c.jitter = 0.2;
        suite.push_back({"jitter", c});
    }
    {
        auto c = base(108);
        c.agents = 8;
        c.groups = 1;
        c.p_miss = 0.1;
        c.clutter_rate = 0.5;
        c.occlusions = {{2, 40, 4}, {5, 50, 6}, {7, 35, 9}};
        suite.push_back({"mixed", c});
    }
    return suite;
}

std::vector<SceneConfig> training_scenes(std::size_t count, std::uint64_t base_seed) {
    std::vector<SceneConfig> out;
    for (std::size_t i = 0; i < count; ++i) {
        SceneConfig c;
        c.seed = base_seed + i;
        std::mt19937_64 rng(c.seed);
        c.agents = std::uniform_int_distribution<int>(4, 10)(rng);
        c.groups = std::uniform_int_distribution<int>(0, 1)(rng);
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<predictor::TrainingSample> make_training_set(const TrackSet& gt,
                                                         const predictor::PredictorConfig& cfg,
                                                         predictor::Horizon horizon,
                                                         const WindowOptions& opt) {
    const std::size_t T = cfg.obs_len(horizon), P = cfg.pred_len(horizon);
    const std::size_t min_hist = opt.min_history == 0 ? T : std::min(opt.min_history, T);
    const std::size_t stride = std::max<std::size_t>(opt.stride, 1);

    // Normalised copies plus a frame lookup for neighbour queries.
    std::map<int, std::vector<Point2>> norm;
    for (const auto& [id, seq] : gt) {
        auto& v = norm[id];
        for (const auto& p : seq.points()) v.push_back(cfg.bounds.normalize(p));
    }
    auto index_at = [&](const PointSequence& seq, int frame) -> std::ptrdiff_t {
        const auto& fr = seq.frames();
        auto it = std::lower_bound(fr.begin(), fr.end(), frame);
        return it != fr.end() && *it == frame ? it - fr.begin() : -1;
    };

    std::vector<predictor::TrainingSample> out;
    for (const auto& [id, seq] : gt) {
        const auto& pts = norm[id];
        const std::size_t n = pts.size();
        if (n < min_hist + P) continue;
        for (std::size_t end = min_hist - 1; end + P < n; end += stride) {
            predictor::TrainingSample s;
            const std::size_t first = end + 1 >= T ? end + 1 - T : 0;
            s.history = predictor::pad_window(std::span(pts).subspan(first, end + 1 - first), T);
            s.future.assign(pts.begin() + static_cast<std::ptrdiff_t>(end + 1),
                            pts.begin() + static_cast<std::ptrdiff_t>(end + 1 + P));
            const int frame = seq.frames()[end];
            for (const auto& [other, oseq] : gt) {
                if (other == id) continue;
                const auto k = index_at(oseq, frame);
                if (k < 0) continue;
                const auto& opts = norm[other];
                if (euclidean(opts[static_cast<std::size_t>(k)], pts[end]) > cfg.neighbour_radius) continue;
                const std::size_t kk = static_cast<std::size_t>(k);
                const std::size_t ofirst = kk + 1 >= T ? kk + 1 - T : 0;
                s.neighbours.push_back(predictor::pad_window(std::span(opts).subspan(ofirst, kk + 1 - ofirst), T));
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<predictor::TrainingSample> make_training_set(std::span<const SceneConfig> scenes,
                                                         const predictor::PredictorConfig& cfg,
                                                         predictor::Horizon horizon,
                                                         const WindowOptions& opt) {
    std::vector<predictor::TrainingSample> out;
    for (const auto& c : scenes) {
        auto part = make_training_set(generate(c).ground_truth, cfg, horizon, opt);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

}  // namespace tbp::sim
