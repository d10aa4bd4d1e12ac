#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tbp/error.hpp"
#include "tbp/predictor.hpp"

using namespace tbp;
using namespace tbp::predictor;

namespace {

PredictorConfig small_config(std::size_t hidden = 4) {
    PredictorConfig c;
    c.hidden_dim = hidden;
    c.obs_short = 3;
    c.pred_short = 2;
    c.obs_long = 5;
    c.pred_long = 4;
    return c;
}

std::vector<Point2> line(Point2 start, Point2 step, std::size_t n) {
    std::vector<Point2> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = {start.x + step.x * i, start.y + step.y * i};
    return p;
}

PointSequence as_sequence(const std::vector<Point2>& pts, int first_frame = 1) {
    PointSequence s;
    for (std::size_t i = 0; i < pts.size(); ++i) s.push_back(pts[i], first_frame + static_cast<int>(i));
    return s;
}

void randomize(PredictorParams& p, std::uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& t : p.tensors())
        for (std::size_t i = 0; i < t.tensor->size(); ++i) (*t.tensor)[i] = u(rng);
}

EncodedHistory random_encoding(std::mt19937_64& rng, std::size_t T, std::size_t H) {
    std::uniform_real_distribution<double> u(-1, 1);
    EncodedHistory e;
    e.hidden_dim = H;
    e.hidden.resize(T * H);
    for (auto& v : e.hidden) v = u(rng);
    return e;
}

}  // namespace

TEST_CASE("an untrained head extrapolates the last displacement") {
    auto m = make_predictor(small_config(), Horizon::Long, 1);
    auto window = line({0.2, 0.3}, {0.01, 0.02}, 5);
    auto r = predict(m, as_sequence(window), {});
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(r.positions[t].x == doctest::Approx(0.24 + 0.01 * (t + 1)).epsilon(1e-12));
        CHECK(r.positions[t].y == doctest::Approx(0.38 + 0.02 * (t + 1)).epsilon(1e-12));
    }
    auto still = line({0.6, 0.1}, {0, 0}, 3);
    r = predict(m, as_sequence(still), {});
    for (std::size_t t = 0; t < 4; ++t) CHECK(r.positions[t] == still.back());
}

TEST_CASE("zero parameters give a zero encoding and a constant prediction at rest") {
    auto m = make_predictor(small_config(), Horizon::Long, 1);
    m.params.zero();
    auto window = line({0.2, 0.3}, {0.0, 0.0}, 5);
    auto enc = encode(m, window);
    REQUIRE(enc.steps() == 5);
    for (double h : enc.hidden) CHECK(h == 0.0);

    auto r = predict(m, as_sequence(window, 10), {});
    REQUIRE(r.positions.size() == 4);
    CHECK(r.contexts.steps() == 4);
    CHECK(r.contexts.dim() == 8);
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(r.positions[t] == window.back());
        CHECK(r.positions.frames()[t] == 15 + static_cast<int>(t));
    }
}

TEST_CASE("encode rejects a window of the wrong length") {
    auto m = make_predictor(small_config(), Horizon::Long, 1);
    CHECK_THROWS_AS(encode(m, line({0, 0}, {0, 0}, 4)), tbp::DimensionMismatch);
    CHECK_THROWS_AS(predict(m, PointSequence{}, {}), tbp::EmptySequence);
}

TEST_CASE("encoding a constant trajectory settles with shrinking step differences") {
    auto cfg = small_config(8);
    cfg.obs_long = 40;
    auto m = make_predictor(cfg, Horizon::Long, 3);
    auto enc = encode(m, line({0.4, 0.6}, {0, 0}, 40));
    std::vector<double> diffs;
    for (std::size_t t = 1; t < enc.steps(); ++t) {
        double sq = 0;
        for (std::size_t i = 0; i < 8; ++i) {
            const double d = enc.step(t)[i] - enc.step(t - 1)[i];
            sq += d * d;
        }
        diffs.push_back(std::sqrt(sq));
    }
    for (std::size_t t = 2; t < diffs.size(); ++t) {
        CAPTURE(t);
        CHECK(diffs[t] <= diffs[t - 1] + 1e-15);
    }
    CHECK(diffs.back() < 1e-6);
    CHECK(encode(m, line({0.4, 0.6}, {0, 0}, 40)).hidden == enc.hidden);
}

TEST_CASE("soft attention") {
    const std::size_t T = 5, H = 4;
    auto cfg = small_config(H);
    std::mt19937_64 rng(8);

    SUBCASE("zero scorer gives uniform weights and the mean hidden state") {
        PredictorParams p(cfg);
        auto e = random_encoding(rng, T, H);
        auto a = soft_attention(p, e, std::vector<double>(H, 0.3));
        for (double w : a.weights) CHECK(w == doctest::Approx(1.0 / T).epsilon(1e-15));
        for (std::size_t i = 0; i < H; ++i) {
            double mean = 0;
            for (std::size_t j = 0; j < T; ++j) mean += e.step(j)[i];
            CHECK(a.context[i] == doctest::Approx(mean / T).epsilon(1e-12));
        }
    }
    SUBCASE("one dominant score saturates the softmax") {
        // Scores: v . tanh(W_k h_j) with W_k = 100 I picks out h_j[0]; v = 50 e_0 / tanh(100).
        PredictorParams p(cfg);
        for (std::size_t i = 0; i < H; ++i) p.scorer.W.at(i, H + i) = 100.0;
        p.scorer.v[0] = 50.0 / std::tanh(100.0);
        EncodedHistory e;
        e.hidden_dim = H;
        e.hidden.assign(T * H, 0.0);
        e.hidden[2 * H] = 1.0;  // step 2 scores +50, the rest score 0
        auto a = soft_attention(p, e, std::vector<double>(H, 0.0));
        CHECK(a.weights[2] > 1.0 - 1e-15);
    }
    SUBCASE("context equals an explicit weighted sum") {
        auto m = make_predictor(cfg, Horizon::Long, 21);
        auto e = random_encoding(rng, T, H);
        std::vector<double> hd{0.1, -0.4, 0.7, 0.2};
        auto a = soft_attention(m.params, e, hd);
        const auto& s = m.params.scorer;
        std::vector<double> score(T);
        double mx = -1e300;
        for (std::size_t j = 0; j < T; ++j) {
            double acc = s.d[0];
            for (std::size_t r = 0; r < cfg.attn_dim(); ++r) {
                double z = s.c[r];
                for (std::size_t i = 0; i < H; ++i) z += s.W.at(r, i) * hd[i] + s.W.at(r, H + i) * e.step(j)[i];
                acc += s.v[r] * std::tanh(z);
            }
            score[j] = acc;
            mx = std::max(mx, acc);
        }
        double z = 0;
        for (double& v : score) z += (v = std::exp(v - mx));
        double wsum = 0;
        for (std::size_t j = 0; j < T; ++j) {
            CHECK(a.weights[j] == doctest::Approx(score[j] / z).epsilon(1e-12));
            CHECK(a.weights[j] > 0.0);
            wsum += a.weights[j];
        }
        CHECK(std::abs(wsum - 1.0) <= 1e-9);
        for (std::size_t i = 0; i < H; ++i) {
            double c = 0;
            for (std::size_t j = 0; j < T; ++j) c += a.weights[j] * e.step(j)[i];
            CHECK(a.context[i] == doctest::Approx(c).epsilon(1e-12));
        }
    }
}

TEST_CASE("hardwired attention") {
    const std::size_t T = 6, H = 3;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> du(0.01, 0.5);
    auto neighbour = [&] {
        NeighbourEncoding n;
        n.encoded = random_encoding(rng, T, H);
        n.distances.resize(T);
        for (auto& d : n.distances) d = du(rng);
        return n;
    };

    CHECK(hardwired_attention({}, H, 1e-3) == std::vector<double>(H, 0.0));

    NeighbourEncoding flat;
    flat.encoded.hidden_dim = H;
    const std::vector<double> v{0.5, -0.25, 0.75};
    for (std::size_t j = 0; j < T; ++j) flat.encoded.hidden.insert(flat.encoded.hidden.end(), v.begin(), v.end());
    flat.distances.assign(T, 2.0);
    auto c = hardwired_attention(std::vector{flat}, H, 1e-3);
    for (std::size_t i = 0; i < H; ++i) CHECK(c[i] == doctest::Approx(T / 2.0 * v[i]).epsilon(1e-15));

    std::vector<NeighbourEncoding> three{neighbour(), neighbour(), neighbour()};
    three[1].distances[0] = 0.0;  // clamped to eps
    auto got = hardwired_attention(three, H, 1e-3);
    for (std::size_t i = 0; i < H; ++i) {
        double want = 0;
        for (const auto& n : three)
            for (std::size_t j = 0; j < T; ++j) want += n.encoded.step(j)[i] / std::max(n.distances[j], 1e-3);
        CHECK(got[i] == doctest::Approx(want).epsilon(1e-12));
    }

    std::vector<NeighbourEncoding> s1{neighbour()}, s2{neighbour(), neighbour()}, both{s1[0], s2[0], s2[1]};
    auto c1 = hardwired_attention(s1, H, 1e-3), c2 = hardwired_attention(s2, H, 1e-3),
         c12 = hardwired_attention(both, H, 1e-3);
    for (std::size_t i = 0; i < H; ++i) CHECK(c12[i] == doctest::Approx(c1[i] + c2[i]).epsilon(1e-12));

    auto doubled = both;
    for (auto& n : doubled)
        for (auto& d : n.distances) d *= 2.0;
    auto half = hardwired_attention(doubled, H, 1e-3);
    for (std::size_t i = 0; i < H; ++i) CHECK(half[i] == doctest::Approx(c12[i] / 2.0).epsilon(1e-12));

    flat.distances.pop_back();
    CHECK_THROWS_AS(hardwired_attention(std::vector{flat}, H, 1e-3), tbp::DimensionMismatch);
}

TEST_CASE("merge_context") {
    CHECK(merge_context(std::vector<double>(3, 0.0), std::vector<double>(3, 0.0)) ==
          std::vector<double>(6, 0.0));
    auto m = merge_context(std::vector<double>(2, std::log(3.0) / 2.0), std::vector<double>(2, 0.0));
    CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m[2] == 0.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-30, 30);
    std::vector<double> a(8), b(8);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    for (double x : merge_context(a, b)) CHECK(std::abs(x) <= 1.0);
    CHECK_THROWS_AS(merge_context(a, std::vector<double>(7)), tbp::DimensionMismatch);
}

TEST_CASE("first decode context is the merged soft and hardwired contexts") {
    auto cfg = small_config(5);
    auto m = make_predictor(cfg, Horizon::Long, 13);
    auto self = line({0.3, 0.3}, {0.02, 0.01}, 5);
    std::vector<std::vector<Point2>> nb{line({0.35, 0.3}, {0.02, 0.0}, 5), line({0.2, 0.4}, {0.0, -0.01}, 5)};
    auto r = predict(m, as_sequence(self), nb);

    auto enc = encode(m, self);
    std::vector<NeighbourEncoding> ne;
    for (const auto& w : nb) {
        NeighbourEncoding n{encode(m, w), {}};
        for (std::size_t j = 0; j < w.size(); ++j) n.distances.push_back(euclidean(w[j], self[j]));
        ne.push_back(n);
    }
    auto soft = soft_attention(m.params, enc, enc.step(4));
    auto want = merge_context(soft.context, hardwired_attention(ne, 5, cfg.dist_epsilon));
    auto got = r.contexts.step(0);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("full predictor gradient matches finite differences") {
    auto cfg = small_config(4);
    cfg.attention_dim = 3;
    for (Horizon h : {Horizon::Short, Horizon::Long}) {
        auto m = make_predictor(cfg, h, 77);
        randomize(m.params, 78);
        const std::size_t T = m.obs_len(), P = m.pred_len();
        TrainingSample s;
        s.history = line({0.3, 0.5}, {0.015, -0.01}, T);
        s.neighbours = {line({0.32, 0.52}, {0.01, -0.012}, T), line({0.25, 0.45}, {0.02, 0.0}, T)};
        s.future = line({0.3 + 0.015 * T, 0.5 - 0.01 * T}, {0.017, -0.006}, P);

        PredictorParams grads(cfg);
        accumulate_gradient(m, s, grads);
        auto params = m.params.tensors();
        auto gviews = grads.tensors();
        double worst = 0;
        std::string worst_name;
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& t = *params[k].tensor;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double num = oracle::central_difference([&] { return sample_loss(m, s); }, t[i], 1e-5);
                const double ana = (*gviews[k].tensor)[i];
                // Entries whose true gradient is at round-off scale are
                // judged on absolute error.
                const double err = std::abs(ana - num) < 1e-10 ? 0.0 : oracle::relative_error(ana, num);
                if (err > worst) {
                    worst = err;
                    worst_name = params[k].name;
                }
            }
        }
        CAPTURE(worst_name);
        CHECK(worst < 1e-4);
        // The score offset shifts every logit equally, so the softmax ignores it.
        CHECK(std::abs(grads.scorer.d[0]) < 1e-12);
    }
}

TEST_CASE("prediction is deterministic and survives a checkpoint round trip") {
    auto cfg = small_config(6);
    auto a = make_predictor(cfg, Horizon::Short, 5), b = make_predictor(cfg, Horizon::Short, 5);
    auto traj = as_sequence(line({0.5, 0.5}, {0.01, 0.01}, 7));
    std::vector<std::vector<Point2>> nb{line({0.55, 0.5}, {0.0, 0.01}, 3)};
    auto ra = predict(a, traj, nb), rb = predict(b, traj, nb);
    CHECK(ra.positions == rb.positions);
    CHECK(ra.contexts == rb.contexts);

    auto c = from_checkpoint(to_checkpoint(a));
    CHECK(c.config == a.config);
    CHECK(c.horizon == Horizon::Short);
    auto rc = predict(c, traj, nb);
    CHECK(rc.positions == ra.positions);

    auto ck = to_checkpoint(a);
    ck.tensors[3].second = nn::Tensor(2);
    CHECK_THROWS_AS(from_checkpoint(ck), tbp::Error);
    ck = to_checkpoint(a);
    ck.meta.erase("hidden_dim");
    CHECK_THROWS_AS(from_checkpoint(ck), tbp::Error);
}

TEST_CASE("training") {
    auto cfg = small_config(8);
    SUBCASE("identical constant trajectories converge below 1e-3") {
        auto m = make_predictor(cfg, Horizon::Long, 4);
        randomize(m.params, 4);  // start visibly away from the answer
        TrainingSample s{line({0.4, 0.7}, {0, 0}, 5), {}, line({0.4, 0.7}, {0, 0}, 4)};
        std::vector<TrainingSample> data(16, s);
        TrainOptions opt;
        opt.epochs = 200;
        opt.batch_size = 8;
        opt.learning_rate = 1e-2;
        auto r = train(m, data, opt);
        CHECK(r.loss_curve.size() == 201);
        CHECK(r.loss_curve.front() > 1e-3);
        CHECK(mean_loss(m, data) < 1e-3);
    }
    SUBCASE("a single sample is memorised") {
        auto m = make_predictor(cfg, Horizon::Long, 6);
        TrainingSample s{line({0.2, 0.3}, {0.02, 0.01}, 5),
                         {line({0.25, 0.3}, {0.02, 0.0}, 5)},
                         {{0.32, 0.36}, {0.35, 0.40}, {0.37, 0.45}, {0.38, 0.51}}};
        std::vector<TrainingSample> data{s};
        TrainOptions opt;
        opt.epochs = 400;
        opt.learning_rate = 1e-2;
        const double before = mean_loss(m, data);
        train(m, data, opt);
        const double after = mean_loss(m, data);
        CHECK(after < 1e-6);
        CHECK(after < before * 1e-3);
    }
    SUBCASE("zero learning rate leaves parameters unchanged") {
        auto m = make_predictor(cfg, Horizon::Short, 9);
        const auto before = m.params.tensors();
        std::vector<nn::Tensor> snapshot;
        for (const auto& t : before) snapshot.push_back(*t.tensor);
        std::vector<TrainingSample> data{{line({0.1, 0.1}, {0.01, 0.0}, 3), {}, line({0.13, 0.1}, {0.01, 0.0}, 2)}};
        TrainOptions opt;
        opt.epochs = 5;
        opt.learning_rate = 0.0;
        auto r = train(m, data, opt);
        auto after = m.params.tensors();
        for (std::size_t i = 0; i < after.size(); ++i) CHECK(*after[i].tensor == snapshot[i]);
        for (double l : r.loss_curve) CHECK(l == r.loss_curve.front());
    }
    SUBCASE("training is bitwise reproducible for a fixed seed") {
        std::vector<TrainingSample> data;
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.2, 0.8), v(-0.02, 0.02);
        for (int i = 0; i < 20; ++i) {
            const Point2 p{u(rng), u(rng)}, d{v(rng), v(rng)};
            data.push_back({line(p, d, 3), {}, line({p.x + 3 * d.x, p.y + 3 * d.y}, d, 2)});
        }
        TrainOptions opt;
        opt.epochs = 3;
        opt.batch_size = 4;
        opt.seed = 11;
        auto m1 = make_predictor(cfg, Horizon::Short, 2), m2 = make_predictor(cfg, Horizon::Short, 2);
        auto r1 = train(m1, data, opt), r2 = train(m2, data, opt);
        CHECK(r1.loss_curve == r2.loss_curve);
        auto t1 = m1.params.tensors(), t2 = m2.params.tensors();
        for (std::size_t i = 0; i < t1.size(); ++i) CHECK(*t1[i].tensor == *t2[i].tensor);
    }
    SUBCASE("invalid datasets are rejected") {
        auto m = make_predictor(cfg, Horizon::Short, 2);
        CHECK_THROWS_AS(train(m, std::vector<TrainingSample>{}, {}), tbp::Error);
        std::vector<TrainingSample> bad{{line({0, 0}, {0, 0}, 4), {}, line({0, 0}, {0, 0}, 2)}};
        CHECK_THROWS_AS(train(m, bad, {}), tbp::DimensionMismatch);
    }
}

TEST_CASE("a model trained on straight lines beats the constant-position baseline") {
    auto cfg = small_config(8);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.25, 0.75), ang(0, 2 * M_PI), spd(0.005, 0.02);
    auto sample = [&] {
        const Point2 p{u(rng), u(rng)};
        const double a = ang(rng), s = spd(rng);
        const Point2 d{s * std::cos(a), s * std::sin(a)};
        return TrainingSample{line(p, d, 5), {}, line({p.x + 5 * d.x, p.y + 5 * d.y}, d, 4)};
    };
    std::vector<TrainingSample> train_set, test_set;
    for (int i = 0; i < 300; ++i) train_set.push_back(sample());
    for (int i = 0; i < 50; ++i) test_set.push_back(sample());

    auto m = make_predictor(cfg, Horizon::Long, 1);
    randomize(m.params, 1);  // start from an arbitrary network, not the extrapolating head
    TrainOptions opt;
    opt.epochs = 40;
    opt.learning_rate = 5e-3;
    auto r = train(m, train_set, opt);
    CHECK(r.loss_curve.back() < r.loss_curve.front());

    double model_err = 0, still_err = 0;
    for (const auto& s : test_set) {
        auto pred = predict(m, as_sequence(s.history), {});
        for (std::size_t t = 0; t < 4; ++t) {
            model_err += euclidean(pred.positions[t], s.future[t]);
            still_err += euclidean(s.history.back(), s.future[t]);
        }
    }
    MESSAGE("model ADE " << model_err / 200 << " vs constant-position " << still_err / 200);
    CHECK(model_err < still_err);
}
