#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "tbp/error.hpp"
#include "tbp/metrics.hpp"
#include "tbp/simulator.hpp"
#include "tbp/tracker.hpp"

using namespace tbp;
using namespace tbp::tracking;

namespace {

// Small untrained models: the zero output head extrapolates the last
// displacement, so predictions are exact on straight constant-speed paths.
TrackerConfig small_config(Mode mode = Mode::T4) {
    TrackerConfig c;
    c.mode = mode;
    c.predictor.hidden_dim = 4;
    c.predictor.attention_dim = 3;
    return c;
}

Tracker make_tracker(const TrackerConfig& c) {
    return Tracker(c, predictor::make_predictor(c.predictor, predictor::Horizon::Short, 11),
                   predictor::make_predictor(c.predictor, predictor::Horizon::Long, 12));
}

DetectionFrame frame_of(int f, std::vector<Point2> pts) {
    DetectionFrame df;
    df.frame = f;
    for (auto p : pts) df.detections.push_back({p});
    return df;
}

std::vector<int> live_ids(const Tracker& t) {
    std::vector<int> ids;
    for (const auto& tr : t.pool().live) ids.push_back(tr.id);
    return ids;
}

// A track with hand-set long-horizon outputs for merge tests.
Track synthetic_track(int id, int birth, std::vector<Point2> pred, std::vector<std::vector<double>> ctx) {
    Track t;
    t.id = id;
    t.birth_frame = birth;
    t.history.push_back(pred.front(), birth);
    t.predicted.push_back(false);
    t.last_update_frame = birth;
    int f = birth + 1;
    for (auto p : pred) t.long_pred.positions.push_back(p, f++);
    t.long_pred.contexts = VectorSequence(ctx.front().size());
    for (const auto& v : ctx) t.long_pred.contexts.push_back(v);
    t.has_predictions = true;
    return t;
}

struct Setup {
    TrackerConfig config;
    predictor::Predictor short_model, long_model;
};

Setup scene_setup(const sim::SceneConfig& scene, Mode mode) {
    Setup s;
    s.config = small_config(mode);
    s.config.predictor.bounds = scene.bounds;
    s.short_model = predictor::make_predictor(s.config.predictor, predictor::Horizon::Short, 11);
    s.long_model = predictor::make_predictor(s.config.predictor, predictor::Horizon::Long, 12);
    return s;
}

sim::SceneConfig corridor_with_gap(int gap) {
    sim::SceneConfig c;
    c.agents = 0;
    c.frames = 70;
    c.scripted = {{1, 0.5, {{0.5, 15.0}, {29.5, 15.0}}}};
    c.occlusions = {{1, 20, gap}};
    return c;
}

}  // namespace

TEST_CASE("initialise creates one track per detection") {
    auto t = make_tracker(small_config());
    SUBCASE("three detections") {
        t.initialise(frame_of(1, {{0.1, 0.1}, {0.5, 0.5}, {0.9, 0.9}}));
        CHECK(live_ids(t) == std::vector<int>{1, 2, 3});
        for (const auto& tr : t.pool().live) {
            CHECK(tr.history.size() == 1);
            CHECK(tr.birth_frame == 1);
            CHECK(tr.has_predictions);
        }
    }
    SUBCASE("no detections") {
        t.initialise(frame_of(1, {}));
        CHECK(t.pool().live.empty());
    }
    SUBCASE("duplicate detections are not deduplicated") {
        t.initialise(frame_of(1, {{0.4, 0.4}, {0.4, 0.4}}));
        CHECK(live_ids(t) == std::vector<int>{1, 2});
    }
}

TEST_CASE("association gate") {
    auto t = make_tracker(small_config(Mode::T1));
    t.initialise(frame_of(1, {{0.50, 0.50}}));
    REQUIRE(t.gating_position(t.pool().live[0], 2) == Point2{0.50, 0.50});
    SUBCASE("inside the gate") {
        auto a = t.associate(frame_of(2, {{0.51, 0.50}}));
        REQUIRE(a.pairs.size() == 1);
        CHECK(a.pairs[0].track_id == 1);
        CHECK(a.pairs[0].cost == doctest::Approx(0.01));
        CHECK(a.unmatched_detections.empty());
        CHECK(t.pool().live[0].history.size() == 2);
        CHECK(t.pool().live[0].frames_since_update == 0);
    }
    SUBCASE("outside the gate") {
        auto a = t.associate(frame_of(2, {{0.60, 0.50}}));
        CHECK(a.pairs.empty());
        CHECK(a.unmatched_detections == std::vector<std::size_t>{0});
        CHECK(a.unmatched_tracks == std::vector<int>{1});
        CHECK(t.pool().live[0].frames_since_update == 1);
    }
}

TEST_CASE("association matches the exhaustive optimum") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> count(0, 6);
    std::uniform_real_distribution<double> u(0.3, 0.7);
    std::uniform_real_distribution<double> jitter(-0.04, 0.04);
    auto config = small_config(Mode::T1);
    config.assoc_gate = 0.05;
    for (int trial = 0; trial < 200; ++trial) {
        auto t = make_tracker(config);
        std::vector<Point2> starts(static_cast<std::size_t>(count(rng)));
        for (auto& p : starts) p = {u(rng), u(rng)};
        t.initialise(frame_of(1, starts));
        std::vector<Point2> dets(static_cast<std::size_t>(count(rng)));
        for (std::size_t i = 0; i < dets.size(); ++i)
            dets[i] = i < starts.size() ? Point2{starts[i].x + jitter(rng), starts[i].y + jitter(rng)}
                                        : Point2{u(rng), u(rng)};
        std::shuffle(dets.begin(), dets.end(), rng);

        std::vector<std::vector<double>> cost(starts.size(), std::vector<double>(dets.size()));
        for (std::size_t r = 0; r < starts.size(); ++r)
            for (std::size_t c = 0; c < dets.size(); ++c) cost[r][c] = oracle::dist(starts[r], dets[c]);
        const auto best = oracle::brute_force_match(cost, config.assoc_gate);

        const auto a = t.associate(frame_of(2, dets));
        CHECK(static_cast<int>(a.pairs.size()) == best.count);
        double total = 0.0;
        std::set<std::size_t> used;
        for (const auto& p : a.pairs) {
            CHECK(p.cost <= config.assoc_gate);
            CHECK(used.insert(p.detection).second);
            total += cost[static_cast<std::size_t>(p.track_id - 1)][p.detection];
        }
        CHECK(total == doctest::Approx(best.cost).epsilon(1e-12));
        CHECK(a.pairs.size() + a.unmatched_detections.size() == dets.size());
        CHECK(a.pairs.size() + a.unmatched_tracks.size() == starts.size());
    }
}

TEST_CASE("greedy association is available behind a flag") {
    auto c = small_config(Mode::T1);
    c.association = Association::Greedy;
    auto greedy = make_tracker(c);
    auto optimal = make_tracker(small_config(Mode::T1));
    const auto first = frame_of(1, {{0.50, 0.50}, {0.535, 0.50}});
    const auto second = frame_of(2, {{0.51, 0.50}, {0.48, 0.50}});
    greedy.initialise(first);
    optimal.initialise(first);
    // Greedy takes the cheapest pair first and strands the second track.
    CHECK(greedy.associate(second).pairs.size() == 1);
    CHECK(optimal.associate(second).pairs.size() == 2);
    CHECK(parse_association("greedy") == Association::Greedy);
    CHECK_THROWS_AS(parse_association("nearest"), ConfigError);
}

TEST_CASE("spawn issues fresh increasing ids") {
    auto t = make_tracker(small_config(Mode::T1));
    t.initialise(frame_of(1, {{0.1, 0.1}}));
    CHECK(t.spawn(frame_of(2, {{0.5, 0.5}, {0.8, 0.8}}), {0, 1}) == 2);
    CHECK(live_ids(t) == std::vector<int>{1, 2, 3});
    CHECK(t.spawn(frame_of(2, {}), {}) == 0);
    CHECK(live_ids(t) == std::vector<int>{1, 2, 3});
    CHECK(t.pool().next_id == 4);
}

TEST_CASE("merge pass") {
    auto t = make_tracker(small_config(Mode::T4));
    auto& live = t.pool().live;
    const std::vector<Point2> path{{0.2, 0.2}, {0.21, 0.2}, {0.22, 0.2}};
    const std::vector<std::vector<double>> ctx{{1.0, 0.5}, {0.5, 1.0}, {0.2, 0.1}};

    SUBCASE("identical predictions merge into the elder") {
        live.push_back(synthetic_track(1, 1, path, ctx));
        live.push_back(synthetic_track(2, 3, path, ctx));
        live[1].history.push_back({0.3, 0.3}, 4);
        live[1].predicted.push_back(false);
        CHECK(t.merge_pass() == 1);
        REQUIRE(live_ids(t) == std::vector<int>{1});
        CHECK(live[0].history.frames() == std::vector<int>{1, 3, 4});
    }
    SUBCASE("spatially close but orthogonal contexts do not merge") {
        std::vector<std::vector<double>> other{{-0.5, 1.0}, {1.0, -0.5}, {-0.1, 0.2}};
        live.push_back(synthetic_track(1, 1, path, ctx));
        live.push_back(synthetic_track(2, 1, path, other));
        REQUIRE(context_dissimilarity(live[0].long_pred.contexts, live[1].long_pred.contexts) ==
                doctest::Approx(1.0));
        CHECK(t.merge_pass() == 0);
        CHECK(live_ids(t) == std::vector<int>{1, 2});
    }
    SUBCASE("three similar tracks leave only the eldest") {
        live.push_back(synthetic_track(1, 5, path, ctx));
        live.push_back(synthetic_track(2, 2, path, ctx));
        live.push_back(synthetic_track(3, 2, path, ctx));
        CHECK(t.merge_pass() == 2);
        CHECK(live_ids(t) == std::vector<int>{2});
    }
    SUBCASE("zero contexts are never evidence of similarity") {
        std::vector<std::vector<double>> zero{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
        live.push_back(synthetic_track(1, 1, path, zero));
        live.push_back(synthetic_track(2, 1, path, zero));
        CHECK(t.merge_pass() == 0);
    }
    SUBCASE("tracks without predictions are skipped") {
        live.push_back(synthetic_track(1, 1, path, ctx));
        live.push_back(synthetic_track(2, 1, path, ctx));
        live[1].has_predictions = false;
        CHECK(t.merge_pass() == 0);
    }
}

TEST_CASE("merge flags follow the mode") {
    const std::vector<Point2> path{{0.2, 0.2}, {0.21, 0.2}};
    const std::vector<Point2> far{{0.8, 0.8}, {0.81, 0.8}};
    const std::vector<std::vector<double>> ctx{{1.0, 0.5}, {0.5, 1.0}};
    const std::vector<std::vector<double>> orth{{-0.5, 1.0}, {1.0, -0.5}};
    auto merges = [&](Mode m, const std::vector<Point2>& p2, const std::vector<std::vector<double>>& c2) {
        auto t = make_tracker(small_config(m));
        t.pool().live.push_back(synthetic_track(1, 1, path, ctx));
        t.pool().live.push_back(synthetic_track(2, 1, p2, c2));
        return t.merge_pass();
    };
    CHECK(merges(Mode::T1, path, ctx) == 0);
    CHECK(merges(Mode::T2, path, orth) == 1);
    CHECK(merges(Mode::T2, far, ctx) == 0);
    CHECK(merges(Mode::T3, far, ctx) == 1);
    CHECK(merges(Mode::T3, path, orth) == 0);
    CHECK(merges(Mode::T4, far, ctx) == 0);
    CHECK(merges(Mode::T4, path, orth) == 0);
    CHECK(merges(Mode::T4, path, ctx) == 1);
}

TEST_CASE("terminate retires tracks at the termination age") {
    auto t = make_tracker(small_config());
    t.initialise(frame_of(1, {{0.2, 0.2}, {0.6, 0.6}}));
    t.pool().live[0].frames_since_update = 10;
    t.pool().live[1].frames_since_update = 9;
    CHECK(t.terminate() == 1);
    CHECK(live_ids(t) == std::vector<int>{2});
    REQUIRE(t.pool().archive.size() == 1);
    CHECK(t.pool().archive[0].id == 1);
    CHECK(t.pool().archive[0].terminated);
}

TEST_CASE("refresh predictions") {
    auto t = make_tracker(small_config());
    const std::size_t h = t.config().predictor.hidden_dim;
    SUBCASE("an isolated track has a zero neighbour context") {
        t.initialise(frame_of(1, {{0.2, 0.2}, {0.8, 0.8}}));
        for (const auto& tr : t.pool().live) {
            CHECK(t.neighbours_of(tr).empty());
            const auto& ctx = tr.long_pred.contexts;
            REQUIRE(ctx.dim() == 2 * h);
            REQUIRE(ctx.steps() == t.config().predictor.pred_long);
            for (std::size_t s = 0; s < ctx.steps(); ++s)
                for (std::size_t i = h; i < 2 * h; ++i) CHECK(ctx.step(s)[i] == 0.0);
            CHECK(tr.short_pred.positions.size() == t.config().predictor.pred_short);
        }
    }
    SUBCASE("only prediction fields change") {
        t.initialise(frame_of(1, {{0.2, 0.2}, {0.25, 0.2}}));
        const auto before = t.pool().live;
        t.refresh_predictions();
        REQUIRE(t.pool().live.size() == before.size());
        for (std::size_t i = 0; i < before.size(); ++i) {
            CHECK(t.pool().live[i].id == before[i].id);
            CHECK(t.pool().live[i].history == before[i].history);
            CHECK(t.pool().live[i].frames_since_update == before[i].frames_since_update);
            CHECK(t.pool().live[i].long_pred.positions == before[i].long_pred.positions);
        }
    }
    SUBCASE("neighbour snapshot matches a linear radius scan") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<Point2> pts(25);
        for (auto& p : pts) p = {u(rng), u(rng)};
        t.initialise(frame_of(1, pts));
        const double r = t.config().predictor.neighbour_radius;
        std::size_t pairs = 0;
        for (const auto& a : t.pool().live) {
            std::vector<int> expect;
            for (const auto& b : t.pool().live)
                if (b.id != a.id && oracle::dist(a.history.back(), b.history.back()) <= r) expect.push_back(b.id);
            CHECK(t.neighbours_of(a) == expect);
            pairs += expect.size();
            if (expect.empty()) continue;
            // A neighbour makes the hardwired half nonzero.
            const auto ctx = a.long_pred.contexts.step(0);
            CHECK(std::any_of(ctx.begin() + static_cast<std::ptrdiff_t>(h), ctx.end(),
                              [](double v) { return v != 0.0; }));
        }
        CHECK(pairs > 0);
        CHECK(pairs % 2 == 0);
    }
}

TEST_CASE("step composes the stages") {
    SUBCASE("ten empty frames terminate every track") {
        auto t = make_tracker(small_config());
        t.initialise(frame_of(1, {{0.2, 0.2}, {0.7, 0.3}}));
        for (int f = 2; f <= 10; ++f) {
            t.step(frame_of(f, {}));
            CHECK(t.pool().live.size() == 2);
        }
        auto r = t.step(frame_of(11, {}));
        CHECK(r.terminated == 2);
        CHECK(t.pool().live.empty());
        // Coasted points never reach the output on their own.
        for (const auto& [id, seq] : t.finish()) CHECK(seq.size() == 1);
    }
    SUBCASE("frames must increase") {
        auto t = make_tracker(small_config());
        t.initialise(frame_of(3, {{0.2, 0.2}}));
        CHECK_THROWS_AS(t.step(frame_of(3, {})), Error);
        CHECK_THROWS_AS(t.step(frame_of(2, {})), Error);
    }
    SUBCASE("a stale track is gated at its prediction for the current frame") {
        auto t = make_tracker(small_config(Mode::T1));
        t.initialise(frame_of(1, {{0.20, 0.5}}));
        t.step(frame_of(2, {{0.21, 0.5}}));
        const auto& tr = t.pool().live[0];
        CHECK(t.gating_position(tr, 3).x == doctest::Approx(0.22));
        CHECK(t.gating_position(tr, 4).x == doctest::Approx(0.23));
        CHECK(t.gating_position(tr, 9).x == doctest::Approx(0.23));
    }
}

TEST_CASE("pool conservation and gating hold on a corrupted scene") {
    sim::SceneConfig scene;
    scene.seed = 31;
    scene.agents = 8;
    scene.p_miss = 0.1;
    scene.clutter_rate = 1.0;
    scene.jitter = 0.1;
    const auto s = sim::generate(scene);
    for (Mode m : {Mode::T1, Mode::T2, Mode::T3, Mode::T4}) {
        CAPTURE(mode_name(m));
        auto setup = scene_setup(scene, m);
        std::vector<FrameReport> reports;
        const auto out = run(s.detections, setup.config, setup.short_model, setup.long_model, &reports);
        REQUIRE(reports.size() == s.detections.size());
        std::set<int> ids;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const auto& r = reports[i];
            CHECK(static_cast<long>(r.live_after) - static_cast<long>(r.live_before) ==
                  static_cast<long>(r.spawned) - static_cast<long>(r.merged) - static_cast<long>(r.terminated));
            std::set<std::size_t> dets;
            std::set<int> tracks;
            for (const auto& p : r.association.pairs) {
                CHECK(p.cost <= setup.config.assoc_gate);
                CHECK(dets.insert(p.detection).second);
                CHECK(tracks.insert(p.track_id).second);
            }
        }
        for (const auto& [id, seq] : out) {
            CHECK(ids.insert(id).second);
            CHECK(!seq.empty());
        }
        if (m == Mode::T1) CHECK(reports.back().merged == 0);
    }
}

TEST_CASE("run") {
    sim::SceneConfig scene;
    scene.seed = 4;
    scene.agents = 5;
    const auto s = sim::generate(scene);
    auto setup = scene_setup(scene, Mode::T4);

    SUBCASE("deterministic") {
        const auto a = run(s.detections, setup.config, setup.short_model, setup.long_model);
        const auto b = run(s.detections, setup.config, setup.short_model, setup.long_model);
        CHECK(a == b);
    }
    SUBCASE("one frame gives one track per detection") {
        DetectionStream one{frame_of(1, {{3.0, 4.0}, {10.0, 20.0}})};
        const auto out = run(one, setup.config, setup.short_model, setup.long_model);
        REQUIRE(out.size() == 2);
        CHECK(out.at(1).size() == 1);
        CHECK(out.at(1)[0].x == doctest::Approx(3.0));
        CHECK(out.at(1)[0].y == doctest::Approx(4.0));
        CHECK(out.at(2)[0].x == doctest::Approx(10.0));
        CHECK(out.at(2).frames()[0] == 1);
    }
    SUBCASE("out-of-order frames are rejected") {
        DetectionStream bad{frame_of(2, {}), frame_of(1, {})};
        CHECK_THROWS_AS(run(bad, setup.config, setup.short_model, setup.long_model), Error);
    }
    SUBCASE("empty stream") {
        CHECK(run({}, setup.config, setup.short_model, setup.long_model).empty());
    }
}

TEST_CASE("clean parallel walkers are tracked without identity switches") {
    sim::SceneConfig scene;
    scene.agents = 0;
    scene.frames = 70;
    for (int i = 0; i < 4; ++i)
        scene.scripted.push_back({1 + 3 * i, 0.5, {{0.5, 5.0 + 6.0 * i}, {29.5, 5.0 + 6.0 * i}}});
    const auto s = sim::generate(scene);
    for (Mode m : {Mode::T1, Mode::T4}) {
        auto setup = scene_setup(scene, m);
        const auto out = run(s.detections, setup.config, setup.short_model, setup.long_model);
        const auto r = metrics::evaluate_tracking(s.ground_truth, out, 1.0);
        CHECK(r.ids == 0);
        CHECK(r.fp == 0);
        CHECK(r.fn == 0);
        CHECK(r.mota == 1.0);
    }
}

TEST_CASE("occlusion gaps") {
    SUBCASE("an 8-frame gap is bridged under one id") {
        const auto scene = corridor_with_gap(8);
        const auto s = sim::generate(scene);
        auto setup = scene_setup(scene, Mode::T4);
        const auto out = run(s.detections, setup.config, setup.short_model, setup.long_model);
        REQUIRE(out.size() == 1);
        const auto& seq = out.begin()->second;
        CHECK(seq.size() == s.ground_truth.at(1).size());
        const auto r = metrics::evaluate_tracking(s.ground_truth, out, 1.0);
        CHECK(r.ids == 0);
        CHECK(r.frag == 0);
        CHECK(r.fn == 0);
    }
    SUBCASE("a bridged gap is filled on the line between its observations") {
        auto scene = corridor_with_gap(8);
        scene.jitter = 0.0;
        scene.p_miss = 0.0;
        scene.clutter_rate = 0.0;
        const auto s = sim::generate(scene);
        auto setup = scene_setup(scene, Mode::T4);
        const auto out = run(s.detections, setup.config, setup.short_model, setup.long_model);
        REQUIRE(out.size() == 1);
        const auto& seq = out.begin()->second;
        const auto& gt = s.ground_truth.at(1);
        REQUIRE(seq.frames() == gt.frames());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            CHECK(seq[i].x == doctest::Approx(gt[i].x).epsilon(1e-9));
            CHECK(seq[i].y == doctest::Approx(gt[i].y).epsilon(1e-9));
        }
    }
    SUBCASE("a 12-frame gap retires the id and spawns a new one") {
        const auto scene = corridor_with_gap(12);
        const auto s = sim::generate(scene);
        auto setup = scene_setup(scene, Mode::T4);
        const auto out = run(s.detections, setup.config, setup.short_model, setup.long_model);
        REQUIRE(out.size() == 2);
        CHECK(out.at(1).frames().back() == 19);
        CHECK(out.at(2).frames().front() == 32);
    }
    SUBCASE("association-only mode cannot bridge a long gap") {
        const auto scene = corridor_with_gap(8);
        const auto s = sim::generate(scene);
        auto setup = scene_setup(scene, Mode::T1);
        const auto out = run(s.detections, setup.config, setup.short_model, setup.long_model);
        CHECK(out.size() == 2);
    }
}
