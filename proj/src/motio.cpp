#include "tbp/motio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "tbp/error.hpp"

namespace tbp::io {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool to_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool to_int(std::string_view s, int& out) {
    double d = 0.0;
    if (!to_double(s, d) || d != std::floor(d) || std::abs(d) > std::numeric_limits<int>::max()) return false;
    out = static_cast<int>(d);
    return true;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

MotRecord parse_line(std::string_view line, std::size_t lineno) {
    const auto fields = split(line, ',');
    if (fields.size() != 10)
        throw ParseError(lineno, "expected 10 comma-separated fields, found " + std::to_string(fields.size()));
    MotRecord r;
    if (!to_int(fields[0], r.frame)) throw ParseError(lineno, "frame is not an integer");
    if (!to_int(fields[1], r.id)) throw ParseError(lineno, "id is not an integer");
    double* reals[] = {&r.bb_left, &r.bb_top, &r.bb_width, &r.bb_height, &r.conf, &r.x, &r.y, &r.z};
    static const char* names[] = {"bb_left", "bb_top", "bb_width", "bb_height", "conf", "x", "y", "z"};
    for (std::size_t i = 0; i < 8; ++i)
        if (!to_double(fields[i + 2], *reals[i]))
            throw ParseError(lineno, std::string(names[i]) + " is not a number: '" + std::string(trim(fields[i + 2])) +
                                         "'");
    if (r.frame < 1) throw ParseError(lineno, "frame must be >= 1");
    if (r.bb_width < 0.0 || r.bb_height < 0.0) throw ParseError(lineno, "box size must be non-negative");
    return r;
}

}  // namespace

std::vector<MotRecord> parse_mot(std::string_view text) {
    std::vector<MotRecord> out;
    std::size_t lineno = 0, start = 0;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        const auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++lineno;
        if (!trim(line).empty()) out.push_back(parse_line(line, lineno));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

std::vector<MotRecord> parse_mot(std::istream& in) {
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_mot(ss.str());
}

std::vector<MotRecord> read_mot_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return parse_mot(in);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.detail() + " in '" + path + "'");
    }
}

std::string write_mot(std::span<const MotRecord> records) {
    std::vector<const MotRecord*> order;
    for (const auto& r : records) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const MotRecord* a, const MotRecord* b) {
        return std::pair(a->frame, a->id) < std::pair(b->frame, b->id);
    });
    std::string out;
    char buf[256];
    for (const auto* r : order) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", r->frame, r->id, r->bb_left,
                      r->bb_top, r->bb_width, r->bb_height, r->conf, r->x, r->y, r->z);
        out += buf;
    }
    return out;
}

void write_mot_file(const std::string& path, std::span<const MotRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << write_mot(records);
    if (!out) throw Error("write failed for '" + path + "'");
}

DetectionStream to_detections(std::span<const MotRecord> records) {
    std::map<int, DetectionFrame> frames;
    for (const auto& r : records) {
        auto& df = frames[r.frame];
        df.frame = r.frame;
        df.detections.push_back({r.centroid(), r.bb_width, r.bb_height, r.conf});
    }
    DetectionStream out;
    for (auto& [f, df] : frames) out.push_back(std::move(df));
    return out;
}

std::vector<MotRecord> from_detections(const DetectionStream& stream) {
    std::vector<MotRecord> out;
    for (const auto& df : stream)
        for (const auto& d : df.detections)
            out.push_back({df.frame, -1, d.centroid.x - d.width / 2.0, d.centroid.y - d.height / 2.0, d.width,
                           d.height, d.confidence, -1.0, -1.0, -1.0});
    return out;
}

TrackSet to_tracks(std::span<const MotRecord> records) {
    std::map<int, std::map<int, Point2>> by_id;
    for (const auto& r : records)
        if (!by_id[r.id].emplace(r.frame, r.centroid()).second)
            throw Error("track " + std::to_string(r.id) + " has two records for frame " + std::to_string(r.frame));
    TrackSet out;
    for (const auto& [id, pts] : by_id) {
        PointSequence s;
        for (const auto& [f, p] : pts) s.push_back(p, f);
        out[id] = std::move(s);
    }
    return out;
}

std::vector<MotRecord> from_tracks(const TrackSet& tracks, double box_width, double box_height) {
    std::vector<MotRecord> out;
    for (const auto& [id, s] : tracks)
        for (std::size_t i = 0; i < s.size(); ++i)
            out.push_back({s.frames()[i], id, s[i].x - box_width / 2.0, s[i].y - box_height / 2.0, box_width,
                           box_height, 1.0, -1.0, -1.0, -1.0});
    return out;
}

predictor::SceneBounds infer_bounds(std::span<const Point2> points, double margin) {
    if (points.empty()) throw Error("cannot infer scene bounds from no points");
    double x0 = points[0].x, x1 = x0, y0 = points[0].y, y1 = y0;
    for (const auto& p : points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    auto grow = [margin](double& lo, double& hi) {
        if (hi - lo <= 0.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double m = margin * (hi - lo);
        lo -= m;
        hi += m;
    };
    grow(x0, x1);
    grow(y0, y1);
    return {x0, y0, x1, y1};
}

// ---------------------------------------------------------------------------
// Configuration.

void RunConfig::validate() const {
    tracker.validate();
    scene.validate();
    if (!(eval_threshold > 0.0)) throw ConfigError("eval.threshold must be > 0");
    if (!(box_width >= 0.0) || !(box_height >= 0.0)) throw ConfigError("output box size must be >= 0");
    if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (train.stride < 1) throw ConfigError("train.stride must be >= 1");
    if (!(train.learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
}

namespace {

double need_double(const std::string& key, const std::string& v) {
    double d = 0.0;
    if (!to_double(v, d)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return d;
}

long long need_integer(const std::string& key, const std::string& v) {
    double d = 0.0;
    if (!to_double(v, d) || d != std::floor(d) || std::abs(d) > 9e15)
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return static_cast<long long>(d);
}

int need_int(const std::string& key, const std::string& v) {
    const long long n = need_integer(key, v);
    if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max())
        throw ConfigError(key + ": integer out of range");
    return static_cast<int>(n);
}

std::size_t need_size(const std::string& key, const std::string& v) {
    const long long n = need_integer(key, v);
    if (n < 0) throw ConfigError(key + ": must be >= 0");
    return static_cast<std::size_t>(n);
}

std::vector<double> need_numbers(const std::string& key, const std::string& v, std::size_t min_count) {
    std::vector<double> out;
    std::string s = v;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(need_double(key, tok));
    if (out.size() < min_count)
        throw ConfigError(key + ": expected at least " + std::to_string(min_count) + " numbers, got '" + v + "'");
    return out;
}

predictor::SceneBounds need_bounds(const std::string& key, const std::string& v) {
    const auto n = need_numbers(key, v, 4);
    if (n.size() != 4) throw ConfigError(key + ": expected xmin,ymin,xmax,ymax");
    return {n[0], n[1], n[2], n[3]};
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, bool strict,
                   std::vector<std::string>* warnings) {
    auto& t = cfg.tracker;
    auto& p = cfg.tracker.predictor;
    auto& s = cfg.scene;
    const std::string& v = value;

    if (key == "tracker.assoc_gate") t.assoc_gate = need_double(key, v);
    else if (key == "tracker.sd_threshold") t.sd_threshold = need_double(key, v);
    else if (key == "tracker.cd_threshold") t.cd_threshold = need_double(key, v);
    else if (key == "tracker.termination_age") t.termination_age = need_int(key, v);
    else if (key == "tracker.mode") t.mode = tracking::parse_mode(v);
    else if (key == "tracker.association") t.association = tracking::parse_association(v);
    else if (key == "predictor.hidden_dim") p.hidden_dim = need_size(key, v);
    else if (key == "predictor.attention_dim") p.attention_dim = need_size(key, v);
    else if (key == "predictor.obs_short") p.obs_short = need_size(key, v);
    else if (key == "predictor.pred_short") p.pred_short = need_size(key, v);
    else if (key == "predictor.obs_long") p.obs_long = need_size(key, v);
    else if (key == "predictor.pred_long") p.pred_long = need_size(key, v);
    else if (key == "predictor.neighbour_radius") p.neighbour_radius = need_double(key, v);
    else if (key == "predictor.dist_epsilon") p.dist_epsilon = need_double(key, v);
    else if (key == "predictor.velocity_scale") p.velocity_scale = need_double(key, v);
    else if (key == "predictor.bounds") {
        if (v == "auto") {
            cfg.bounds_explicit = false;
            p.bounds = {};
        } else {
            p.bounds = need_bounds(key, v);
            cfg.bounds_explicit = true;
        }
    }
    else if (key == "scene.seed") s.seed = static_cast<std::uint64_t>(need_size(key, v));
    else if (key == "scene.bounds") s.bounds = need_bounds(key, v);
    else if (key == "scene.frames") s.frames = need_int(key, v);
    else if (key == "scene.agents") s.agents = need_int(key, v);
    else if (key == "scene.groups") s.groups = need_int(key, v);
    else if (key == "scene.group_size") s.group_size = need_int(key, v);
    else if (key == "scene.layout") s.layout = sim::parse_layout(v);
    else if (key == "scene.max_waypoints") s.max_waypoints = need_int(key, v);
    else if (key == "scene.path_spread") s.path_spread = need_double(key, v);
    else if (key == "scene.entry_window") s.entry_window = need_double(key, v);
    else if (key == "scene.speed_min") s.speed_min = need_double(key, v);
    else if (key == "scene.speed_max") s.speed_max = need_double(key, v);
    else if (key == "scene.max_speed") s.max_speed = need_double(key, v);
    else if (key == "scene.relaxation") s.relaxation = need_double(key, v);
    else if (key == "scene.repulsion") s.repulsion = need_double(key, v);
    else if (key == "scene.repulsion_range") s.repulsion_range = need_double(key, v);
    else if (key == "scene.agent_radius") s.agent_radius = need_double(key, v);
    else if (key == "scene.cohesion") s.cohesion = need_double(key, v);
    else if (key == "scene.cohesion_slack") s.cohesion_slack = need_double(key, v);
    else if (key == "scene.substeps") s.substeps = need_int(key, v);
    else if (key == "scene.p_miss") s.p_miss = need_double(key, v);
    else if (key == "scene.clutter_rate") s.clutter_rate = need_double(key, v);
    else if (key == "scene.jitter") s.jitter = need_double(key, v);
    else if (key == "scene.occlusion") {
        if (v == "none") {
            s.occlusions.clear();
        } else {
            const auto n = need_numbers(key, v, 3);
            if (n.size() != 3) throw ConfigError(key + ": expected agent,start_frame,duration");
            s.occlusions.push_back({need_int(key, fmt(n[0])), need_int(key, fmt(n[1])), need_int(key, fmt(n[2]))});
        }
    }
    else if (key == "scene.agent") {
        if (v == "none") {
            s.scripted.clear();
        } else {
            // start_frame speed x1 y1 x2 y2 ...
            const auto n = need_numbers(key, v, 6);
            if (n.size() % 2 != 0) throw ConfigError(key + ": expected start_frame speed followed by x y pairs");
            sim::ScriptedAgent a;
            a.start_frame = need_int(key, fmt(n[0]));
            a.speed = n[1];
            for (std::size_t i = 2; i < n.size(); i += 2) a.route.push_back({n[i], n[i + 1]});
            s.scripted.push_back(std::move(a));
        }
    }
    else if (key == "train.epochs") cfg.train.epochs = need_size(key, v);
    else if (key == "train.batch_size") cfg.train.batch_size = need_size(key, v);
    else if (key == "train.learning_rate") cfg.train.learning_rate = need_double(key, v);
    else if (key == "train.grad_clip") cfg.train.grad_clip = need_double(key, v);
    else if (key == "train.stride") cfg.train.stride = need_size(key, v);
    else if (key == "train.seed") cfg.train.seed = static_cast<std::uint64_t>(need_size(key, v));
    else if (key == "eval.threshold") cfg.eval_threshold = need_double(key, v);
    else if (key == "output.box_width") cfg.box_width = need_double(key, v);
    else if (key == "output.box_height") cfg.box_height = need_double(key, v);
    else if (strict) throw ConfigError("unknown config key '" + key + "'");
    else if (warnings) warnings->push_back("ignoring unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, std::string_view text, bool strict, std::vector<std::string>* warnings,
                       const std::string& source) {
    std::size_t lineno = 0, start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            const std::string where = source + ":" + std::to_string(lineno) + ": ";
            if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) throw ConfigError(where + "missing key");
            try {
                apply_setting(cfg, key, value, strict, warnings);
            } catch (const Error& e) {
                throw ConfigError(where + e.what());
            }
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
}

void apply_overrides(RunConfig& cfg, std::span<const std::string> overrides, bool strict,
                     std::vector<std::string>* warnings) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
        try {
            apply_setting(cfg, std::string(trim(std::string_view(o).substr(0, eq))),
                          std::string(trim(std::string_view(o).substr(eq + 1))), strict, warnings);
        } catch (const Error& e) {
            throw ConfigError(std::string("--set ") + e.what());
        }
    }
}

RunConfig load_config(const std::string& path, bool strict, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg;
    apply_config_text(cfg, ss.str(), strict, warnings, path);
    cfg.validate();
    return cfg;
}

std::optional<std::string> resolve_config_path(const std::optional<std::string>& explicit_path) {
    if (explicit_path && !explicit_path->empty()) return explicit_path;
    if (const char* env = std::getenv("TBP_CONFIG"); env && *env) return std::string(env);
    return std::nullopt;
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream o;
    const auto& t = cfg.tracker;
    const auto& p = cfg.tracker.predictor;
    const auto& s = cfg.scene;
    auto bounds = [](const predictor::SceneBounds& b) {
        return fmt(b.xmin) + "," + fmt(b.ymin) + "," + fmt(b.xmax) + "," + fmt(b.ymax);
    };
    o << "tracker.assoc_gate = " << fmt(t.assoc_gate) << '\n';
    o << "tracker.sd_threshold = " << fmt(t.sd_threshold) << '\n';
    o << "tracker.cd_threshold = " << fmt(t.cd_threshold) << '\n';
    o << "tracker.termination_age = " << t.termination_age << '\n';
    o << "tracker.mode = " << tracking::mode_name(t.mode) << '\n';
    o << "tracker.association = " << tracking::association_name(t.association) << '\n';
    o << "predictor.hidden_dim = " << p.hidden_dim << '\n';
    o << "predictor.attention_dim = " << p.attention_dim << '\n';
    o << "predictor.obs_short = " << p.obs_short << '\n';
    o << "predictor.pred_short = " << p.pred_short << '\n';
    o << "predictor.obs_long = " << p.obs_long << '\n';
    o << "predictor.pred_long = " << p.pred_long << '\n';
    o << "predictor.neighbour_radius = " << fmt(p.neighbour_radius) << '\n';
    o << "predictor.dist_epsilon = " << fmt(p.dist_epsilon) << '\n';
    o << "predictor.velocity_scale = " << fmt(p.velocity_scale) << '\n';
    o << "predictor.bounds = " << (cfg.bounds_explicit ? bounds(p.bounds) : "auto") << '\n';
    o << "scene.seed = " << s.seed << '\n';
    o << "scene.bounds = " << bounds(s.bounds) << '\n';
    o << "scene.frames = " << s.frames << '\n';
    o << "scene.agents = " << s.agents << '\n';
    o << "scene.groups = " << s.groups << '\n';
    o << "scene.group_size = " << s.group_size << '\n';
    o << "scene.layout = " << sim::layout_name(s.layout) << '\n';
    o << "scene.max_waypoints = " << s.max_waypoints << '\n';
    o << "scene.path_spread = " << fmt(s.path_spread) << '\n';
    o << "scene.entry_window = " << fmt(s.entry_window) << '\n';
    o << "scene.speed_min = " << fmt(s.speed_min) << '\n';
    o << "scene.speed_max = " << fmt(s.speed_max) << '\n';
    o << "scene.max_speed = " << fmt(s.max_speed) << '\n';
    o << "scene.relaxation = " << fmt(s.relaxation) << '\n';
    o << "scene.repulsion = " << fmt(s.repulsion) << '\n';
    o << "scene.repulsion_range = " << fmt(s.repulsion_range) << '\n';
    o << "scene.agent_radius = " << fmt(s.agent_radius) << '\n';
    o << "scene.cohesion = " << fmt(s.cohesion) << '\n';
    o << "scene.cohesion_slack = " << fmt(s.cohesion_slack) << '\n';
    o << "scene.substeps = " << s.substeps << '\n';
    o << "scene.p_miss = " << fmt(s.p_miss) << '\n';
    o << "scene.clutter_rate = " << fmt(s.clutter_rate) << '\n';
    o << "scene.jitter = " << fmt(s.jitter) << '\n';
    for (const auto& a : s.scripted) {
        o << "scene.agent = " << a.start_frame << ' ' << fmt(a.speed);
        for (const auto& q : a.route) o << ' ' << fmt(q.x) << ' ' << fmt(q.y);
        o << '\n';
    }
    for (const auto& oc : s.occlusions)
        o << "scene.occlusion = " << oc.agent << ',' << oc.start_frame << ',' << oc.duration << '\n';
    o << "train.epochs = " << cfg.train.epochs << '\n';
    o << "train.batch_size = " << cfg.train.batch_size << '\n';
    o << "train.learning_rate = " << fmt(cfg.train.learning_rate) << '\n';
    o << "train.grad_clip = " << fmt(cfg.train.grad_clip) << '\n';
    o << "train.stride = " << cfg.train.stride << '\n';
    o << "train.seed = " << cfg.train.seed << '\n';
    o << "eval.threshold = " << fmt(cfg.eval_threshold) << '\n';
    o << "output.box_width = " << fmt(cfg.box_width) << '\n';
    o << "output.box_height = " << fmt(cfg.box_height) << '\n';
    return o.str();
}

}  // namespace tbp::io
