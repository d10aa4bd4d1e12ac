#include "tbp/tracker.hpp"

#include <algorithm>
#include <map>

#include "tbp/error.hpp"

namespace tbp::tracking {

std::string_view mode_name(Mode m) {
    switch (m) {
        case Mode::T1: return "T1";
        case Mode::T2: return "T2";
        case Mode::T3: return "T3";
        default: return "T4";
    }
}

Mode parse_mode(std::string_view s) {
    if (s == "T1" || s == "t1") return Mode::T1;
    if (s == "T2" || s == "t2") return Mode::T2;
    if (s == "T3" || s == "t3") return Mode::T3;
    if (s == "T4" || s == "t4") return Mode::T4;
    throw ConfigError("tracker mode must be one of T1, T2, T3, T4; got '" + std::string(s) + "'");
}

std::string_view association_name(Association a) {
    return a == Association::Greedy ? "greedy" : "hungarian";
}

Association parse_association(std::string_view s) {
    if (s == "hungarian") return Association::Hungarian;
    if (s == "greedy") return Association::Greedy;
    throw ConfigError("tracker association must be 'hungarian' or 'greedy'; got '" + std::string(s) + "'");
}

void TrackerConfig::validate() const {
    if (!(assoc_gate > 0.0)) throw ConfigError("tracker.assoc_gate must be > 0");
    if (!(sd_threshold > 0.0)) throw ConfigError("tracker.sd_threshold must be > 0");
    if (!(cd_threshold > 0.0)) throw ConfigError("tracker.cd_threshold must be > 0");
    if (termination_age < 1) throw ConfigError("tracker.termination_age must be >= 1");
    predictor.validate();
}

namespace {

void drop_trailing_predictions(Track& t) {
    std::size_t keep = t.history.size();
    while (keep > 0 && t.predicted[keep - 1]) --keep;
    if (keep == t.history.size()) return;
    std::vector<Point2> pts(t.history.points().begin(), t.history.points().begin() + static_cast<std::ptrdiff_t>(keep));
    std::vector<int> frames(t.history.frames().begin(), t.history.frames().begin() + static_cast<std::ptrdiff_t>(keep));
    t.history = PointSequence(std::move(pts), std::move(frames));
    t.predicted.resize(keep);
}

// Once a coasting track is observed again, the coasted run between the two
// observations is replaced by a straight line in frame time. Left in place, a
// lagging coast would show up as a velocity jump at the reacquired point.
void reanchor_coasted(Track& t) {
    const std::size_t last = t.history.size() - 1;
    std::size_t anchor = last;
    while (anchor > 0 && t.predicted[anchor - 1]) --anchor;
    if (anchor == last || anchor == 0) return;
    --anchor;
    std::vector<Point2> pts = t.history.points();
    const auto& frames = t.history.frames();
    const Point2 a = pts[anchor], b = pts[last];
    const double span = frames[last] - frames[anchor];
    for (std::size_t i = anchor + 1; i < last; ++i) {
        const double u = (frames[i] - frames[anchor]) / span;
        pts[i] = {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
    }
    t.history = PointSequence(std::move(pts), frames);
}

// Elder keeps its observed points; the younger track's observed points fill
// frames the elder lacks or only has coasted points for.
void fuse(Track& elder, const Track& young) {
    std::map<int, std::pair<Point2, bool>> merged;
    for (std::size_t i = 0; i < elder.history.size(); ++i)
        merged[elder.history.frames()[i]] = {elder.history[i], elder.predicted[i]};
    for (std::size_t i = 0; i < young.history.size(); ++i) {
        if (young.predicted[i]) continue;
        auto it = merged.find(young.history.frames()[i]);
        if (it == merged.end() || it->second.second) merged[young.history.frames()[i]] = {young.history[i], false};
    }
    PointSequence h;
    std::vector<bool> flags;
    for (const auto& [f, v] : merged) {
        h.push_back(v.first, f);
        flags.push_back(v.second);
    }
    elder.history = std::move(h);
    elder.predicted = std::move(flags);
    elder.last_update_frame = std::max(elder.last_update_frame, young.last_update_frame);
    elder.frames_since_update = std::min(elder.frames_since_update, young.frames_since_update);
}

std::vector<Point2> tail(const PointSequence& s, std::size_t n) {
    const auto& p = s.points();
    const std::size_t k = std::min(n, p.size());
    return {p.end() - static_cast<std::ptrdiff_t>(k), p.end()};
}

}  // namespace

Tracker::Tracker(TrackerConfig config, predictor::Predictor short_model, predictor::Predictor long_model)
    : config_(std::move(config)), short_(std::move(short_model)), long_(std::move(long_model)) {
    config_.validate();
    short_.horizon = predictor::Horizon::Short;
    long_.horizon = predictor::Horizon::Long;
}

Point2 Tracker::gating_position(const Track& t, int frame) const {
    if (!t.has_predictions || t.short_pred.positions.empty()) return t.history.back();
    const int offset = frame - t.history.frames().back();
    const int steps = static_cast<int>(t.short_pred.positions.size());
    const int k = std::clamp(offset, 1, steps) - 1;
    return t.short_pred.positions[static_cast<std::size_t>(k)];
}

std::vector<int> Tracker::neighbours_of(const Track& t) const {
    std::vector<int> out;
    for (const auto& o : pool_.live)
        if (o.id != t.id && euclidean(o.history.back(), t.history.back()) <= config_.predictor.neighbour_radius)
            out.push_back(o.id);
    return out;
}

void Tracker::predict_track(Track& t) const {
    std::vector<std::vector<Point2>> short_nb, long_nb;
    for (int id : neighbours_of(t)) {
        auto it = std::find_if(pool_.live.begin(), pool_.live.end(), [&](const Track& o) { return o.id == id; });
        short_nb.push_back(tail(it->history, short_.obs_len()));
        long_nb.push_back(tail(it->history, long_.obs_len()));
    }
    t.short_pred = predictor::predict(short_, t.history, short_nb);
    t.long_pred = predictor::predict(long_, t.history, long_nb);
    t.has_predictions = true;
}

void Tracker::coast(Track& t) const {
    if (!t.has_predictions || t.history.frames().back() >= frame_) return;
    const auto& pos = t.long_pred.positions;
    for (std::size_t i = 0; i < pos.size(); ++i)
        if (pos.frames()[i] == frame_) {
            t.history.push_back(pos[i], frame_);
            t.predicted.push_back(true);
            return;
        }
}

void Tracker::initialise(const DetectionFrame& frame) {
    if (!pool_.live.empty()) throw Error("initialise: pool is not empty");
    frame_ = frame.frame;
    std::vector<std::size_t> all(frame.detections.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    spawn(frame, all);
    refresh_predictions();
}

AssociationResult Tracker::associate(const DetectionFrame& frame) {
    frame_ = frame.frame;
    auto& live = pool_.live;
    CostMatrix m(live.size(), frame.detections.size());
    std::vector<Point2> dets;
    for (const auto& d : frame.detections) dets.push_back(config_.predictor.bounds.normalize(d.centroid));
    for (std::size_t r = 0; r < live.size(); ++r) {
        const Point2 g = gating_position(live[r], frame_);
        for (std::size_t c = 0; c < dets.size(); ++c) m(r, c) = euclidean(g, dets[c]);
    }
    const Assignment a = config_.association == Association::Greedy
                             ? solve_greedy_assignment(m, config_.assoc_gate)
                             : solve_gated_assignment(m, config_.assoc_gate);

    AssociationResult out;
    for (auto [r, c] : a.pairs) {
        Track& t = live[r];
        t.history.push_back(dets[c], frame_);
        t.predicted.push_back(false);
        reanchor_coasted(t);
        t.last_update_frame = frame_;
        t.frames_since_update = 0;
        out.pairs.push_back({t.id, c, m(r, c)});
    }
    for (std::size_t r : a.unmatched_rows) {
        Track& t = live[r];
        t.frames_since_update = frame_ - t.last_update_frame;
        out.unmatched_tracks.push_back(t.id);
    }
    out.unmatched_detections = a.unmatched_cols;
    return out;
}

std::size_t Tracker::spawn(const DetectionFrame& frame, const std::vector<std::size_t>& detections) {
    for (std::size_t i : detections) {
        Track t;
        t.id = pool_.next_id++;
        t.birth_frame = frame_;
        t.history.push_back(config_.predictor.bounds.normalize(frame.detections[i].centroid), frame_);
        t.predicted.push_back(false);
        t.last_update_frame = frame_;
        pool_.live.push_back(std::move(t));
    }
    return detections.size();
}

std::size_t Tracker::merge_pass() {
    if (!config_.merge_on_sd() && !config_.merge_on_cd()) return 0;
    auto& live = pool_.live;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < live.size(); ++i)
        if (live[i].has_predictions) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::pair(live[a].birth_frame, live[a].id) < std::pair(live[b].birth_frame, live[b].id);
    });

    std::vector<bool> removed(live.size(), false);
    std::size_t merges = 0;
    for (std::size_t ia = 0; ia < order.size(); ++ia) {
        const std::size_t a = order[ia];
        if (removed[a]) continue;
        for (std::size_t ib = ia + 1; ib < order.size(); ++ib) {
            const std::size_t b = order[ib];
            if (removed[b]) continue;
            bool similar = true;
            if (config_.merge_on_sd())
                similar = spatial_dissimilarity(live[a].long_pred.positions, live[b].long_pred.positions) <
                          config_.sd_threshold;
            if (similar && config_.merge_on_cd()) {
                try {
                    similar = context_dissimilarity(live[a].long_pred.contexts, live[b].long_pred.contexts) <
                              config_.cd_threshold;
                } catch (const ZeroNorm&) {
                    similar = false;  // direction undefined: never evidence of similarity
                }
            }
            if (!similar) continue;
            fuse(live[a], live[b]);
            removed[b] = true;
            ++merges;
        }
    }
    std::vector<Track> kept;
    for (std::size_t i = 0; i < live.size(); ++i)
        if (!removed[i]) kept.push_back(std::move(live[i]));
    live = std::move(kept);
    return merges;
}

std::size_t Tracker::terminate() {
    auto& live = pool_.live;
    std::vector<Track> kept;
    std::size_t n = 0;
    for (auto& t : live) {
        if (t.frames_since_update >= config_.termination_age) {
            drop_trailing_predictions(t);
            t.terminated = true;
            pool_.archive.push_back(std::move(t));
            ++n;
        } else {
            kept.push_back(std::move(t));
        }
    }
    live = std::move(kept);
    return n;
}

void Tracker::refresh_predictions() {
    if (config_.uses_long_term())
        for (auto& t : pool_.live) coast(t);
    for (auto& t : pool_.live) predict_track(t);
}

FrameReport Tracker::step(const DetectionFrame& frame) {
    if (frame.frame <= frame_) throw Error("tracker: frames must be strictly increasing");
    FrameReport r;
    r.frame = frame.frame;
    r.live_before = pool_.live.size();
    r.association = associate(frame);
    r.spawned = spawn(frame, r.association.unmatched_detections);
    r.merged = merge_pass();
    r.terminated = terminate();
    refresh_predictions();
    r.live_after = pool_.live.size();
    return r;
}

TrackSet Tracker::finish() const {
    TrackSet out;
    auto emit = [&](Track t) {
        drop_trailing_predictions(t);
        PointSequence s;
        for (std::size_t i = 0; i < t.history.size(); ++i)
            s.push_back(config_.predictor.bounds.denormalize(t.history[i]), t.history.frames()[i]);
        out[t.id] = std::move(s);
    };
    for (const auto& t : pool_.archive) emit(t);
    for (const auto& t : pool_.live) emit(t);
    return out;
}

TrackSet run(const DetectionStream& stream, const TrackerConfig& config, const predictor::Predictor& short_model,
             const predictor::Predictor& long_model, std::vector<FrameReport>* reports) {
    for (std::size_t i = 1; i < stream.size(); ++i)
        if (stream[i].frame <= stream[i - 1].frame)
            throw Error("tracker: detection frames out of order at frame " + std::to_string(stream[i].frame));
    Tracker tracker(config, short_model, long_model);
    if (stream.empty()) return {};
    std::size_t next = 0;
    for (int f = stream.front().frame; f <= stream.back().frame; ++f) {
        const bool have = next < stream.size() && stream[next].frame == f;
        const DetectionFrame empty{f, {}};
        auto r = tracker.step(have ? stream[next] : empty);
        if (have) ++next;
        if (reports) reports->push_back(std::move(r));
    }
    return tracker.finish();
}

}  // namespace tbp::tracking
