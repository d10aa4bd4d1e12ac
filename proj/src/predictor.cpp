#include "tbp/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tbp/error.hpp"
#include "tbp/simd.hpp"

namespace tbp::predictor {

std::string_view horizon_name(Horizon h) { return h == Horizon::Short ? "short" : "long"; }

Horizon parse_horizon(std::string_view s) {
    if (s == "short") return Horizon::Short;
    if (s == "long") return Horizon::Long;
    throw ConfigError("horizon must be 'short' or 'long', got '" + std::string(s) + "'");
}

void PredictorConfig::validate() const {
    if (hidden_dim == 0) throw ConfigError("predictor.hidden_dim must be >= 1");
    if (obs_short < 1 || pred_short < 1 || obs_long < 1 || pred_long < 1)
        throw ConfigError("predictor horizons must all be >= 1");
    if (!(neighbour_radius > 0.0)) throw ConfigError("predictor.radius must be > 0");
    if (!(dist_epsilon > 0.0)) throw ConfigError("predictor.dist_epsilon must be > 0");
    if (!(velocity_scale > 0.0)) throw ConfigError("predictor.velocity_scale must be > 0");
    if (!(bounds.xmax > bounds.xmin) || !(bounds.ymax > bounds.ymin))
        throw ConfigError("scene bounds must have positive extent");
}

PredictorParams::PredictorParams(const PredictorConfig& cfg)
    : encoder(kEncoderInputDim, cfg.hidden_dim),
      scorer(2 * cfg.hidden_dim, cfg.attn_dim()),
      decoder(4 + 2 * cfg.hidden_dim, cfg.hidden_dim),
      head(cfg.hidden_dim, 2) {}

std::vector<nn::NamedTensor> PredictorParams::tensors() {
    return {{"encoder.W", &encoder.W}, {"encoder.U", &encoder.U}, {"encoder.b", &encoder.b},
            {"scorer.W", &scorer.W},   {"scorer.c", &scorer.c},   {"scorer.v", &scorer.v},
            {"scorer.d", &scorer.d},   {"decoder.W", &decoder.W}, {"decoder.U", &decoder.U},
            {"decoder.b", &decoder.b}, {"head.W", &head.W},       {"head.b", &head.b}};
}

void PredictorParams::zero() {
    for (auto& t : tensors()) t.tensor->fill(0.0);
}

Predictor make_predictor(const PredictorConfig& cfg, Horizon horizon, std::uint64_t seed) {
    cfg.validate();
    Predictor m{cfg, horizon, PredictorParams(cfg)};
    std::mt19937_64 rng(seed);
    const std::size_t H = cfg.hidden_dim;
    auto& p = m.params;
    nn::init_uniform(p.encoder.W, kEncoderInputDim, rng);
    nn::init_uniform(p.encoder.U, H, rng);
    nn::init_uniform(p.encoder.b, H, rng);
    nn::init_uniform(p.scorer.W, 2 * H, rng);
    nn::init_uniform(p.scorer.c, 2 * H, rng);
    nn::init_uniform(p.scorer.v, cfg.attn_dim(), rng);
    nn::init_uniform(p.scorer.d, cfg.attn_dim(), rng);
    nn::init_uniform(p.decoder.W, p.decoder.input_dim, rng);
    nn::init_uniform(p.decoder.U, H, rng);
    nn::init_uniform(p.decoder.b, H, rng);
    // The head starts at zero, so an untrained model extrapolates the last
    // observed displacement.
    return m;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double meta_double(const nn::Checkpoint& ck, const std::string& key) {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw Error("checkpoint missing meta '" + key + "'");
    return std::stod(it->second);
}

std::size_t meta_size(const nn::Checkpoint& ck, const std::string& key) {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw Error("checkpoint missing meta '" + key + "'");
    return static_cast<std::size_t>(std::stoull(it->second));
}

}  // namespace

nn::Checkpoint to_checkpoint(const Predictor& p) {
    nn::Checkpoint ck;
    const auto& c = p.config;
    ck.meta["model"] = "trajectory-predictor";
    ck.meta["horizon"] = std::string(horizon_name(p.horizon));
    ck.meta["hidden_dim"] = std::to_string(c.hidden_dim);
    ck.meta["attention_dim"] = std::to_string(c.attention_dim);
    ck.meta["obs_short"] = std::to_string(c.obs_short);
    ck.meta["pred_short"] = std::to_string(c.pred_short);
    ck.meta["obs_long"] = std::to_string(c.obs_long);
    ck.meta["pred_long"] = std::to_string(c.pred_long);
    ck.meta["radius"] = fmt_double(c.neighbour_radius);
    ck.meta["dist_epsilon"] = fmt_double(c.dist_epsilon);
    ck.meta["velocity_scale"] = fmt_double(c.velocity_scale);
    ck.meta["bounds.xmin"] = fmt_double(c.bounds.xmin);
    ck.meta["bounds.ymin"] = fmt_double(c.bounds.ymin);
    ck.meta["bounds.xmax"] = fmt_double(c.bounds.xmax);
    ck.meta["bounds.ymax"] = fmt_double(c.bounds.ymax);
    auto& params = const_cast<PredictorParams&>(p.params);
    for (const auto& t : params.tensors()) ck.tensors.emplace_back(t.name, *t.tensor);
    return ck;
}

Predictor from_checkpoint(const nn::Checkpoint& ck) {
    if (auto it = ck.meta.find("model"); it == ck.meta.end() || it->second != "trajectory-predictor")
        throw Error("checkpoint does not hold a trajectory predictor");
    PredictorConfig c;
    c.hidden_dim = meta_size(ck, "hidden_dim");
    c.attention_dim = meta_size(ck, "attention_dim");
    c.obs_short = meta_size(ck, "obs_short");
    c.pred_short = meta_size(ck, "pred_short");
    c.obs_long = meta_size(ck, "obs_long");
    c.pred_long = meta_size(ck, "pred_long");
    c.neighbour_radius = meta_double(ck, "radius");
    c.dist_epsilon = meta_double(ck, "dist_epsilon");
    c.velocity_scale = meta_double(ck, "velocity_scale");
    c.bounds = {meta_double(ck, "bounds.xmin"), meta_double(ck, "bounds.ymin"),
                meta_double(ck, "bounds.xmax"), meta_double(ck, "bounds.ymax")};
    c.validate();
    Predictor m{c, parse_horizon(ck.meta.at("horizon")), PredictorParams(c)};
    auto named = m.params.tensors();
    if (named.size() != ck.tensors.size())
        throw Error("checkpoint tensor count does not match the model");
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& [name, t] = ck.tensors[i];
        if (name != named[i].name || !t.same_shape(*named[i].tensor))
            throw Error("checkpoint tensor '" + name + "' does not match the model layout");
        *named[i].tensor = t;
    }
    return m;
}

// ---------------------------------------------------------------------------

std::vector<Point2> pad_window(std::span<const Point2> points, std::size_t len) {
    if (points.empty()) throw EmptySequence();
    std::vector<Point2> w(len);
    const std::size_t have = std::min(points.size(), len);
    const std::size_t pad = len - have;
    for (std::size_t i = 0; i < pad; ++i) w[i] = points[points.size() - have];
    std::copy(points.end() - static_cast<std::ptrdiff_t>(have), points.end(),
              w.begin() + static_cast<std::ptrdiff_t>(pad));
    return w;
}

namespace {

struct EncoderTrace {
    std::vector<nn::CellCache> steps;
};

void encoder_input(const Predictor& m, std::span<const Point2> w, std::size_t t, double* x) {
    const double s = m.config.velocity_scale;
    x[0] = 2.0 * w[t].x - 1.0;
    x[1] = 2.0 * w[t].y - 1.0;
    x[2] = t == 0 ? 0.0 : s * (w[t].x - w[t - 1].x);
    x[3] = t == 0 ? 0.0 : s * (w[t].y - w[t - 1].y);
}

void run_encoder(const Predictor& m, std::span<const Point2> window, EncoderTrace& trace) {
    const std::size_t H = m.config.hidden_dim;
    trace.steps.resize(window.size());
    std::vector<double> zero(H, 0.0);
    double x[kEncoderInputDim];
    for (std::size_t t = 0; t < window.size(); ++t) {
        encoder_input(m, window, t, x);
        const auto& prev_h = t == 0 ? zero : trace.steps[t - 1].h;
        const auto& prev_c = t == 0 ? zero : trace.steps[t - 1].c;
        nn::cell_forward(m.params.encoder, {x, kEncoderInputDim}, prev_h, prev_c, trace.steps[t]);
    }
}

EncodedHistory to_encoded(const EncoderTrace& trace, std::size_t H) {
    EncodedHistory e;
    e.hidden_dim = H;
    e.hidden.reserve(trace.steps.size() * H);
    for (const auto& s : trace.steps) e.hidden.insert(e.hidden.end(), s.h.begin(), s.h.end());
    if (!trace.steps.empty()) e.cell = trace.steps.back().c;
    return e;
}

// Softmax of scores in place, shifted by the maximum.
void softmax(std::vector<double>& e) {
    const double mx = *std::max_element(e.begin(), e.end());
    double sum = 0.0;
    for (double& v : e) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : e) v /= sum;
}

struct DecodeStep {
    std::vector<double> u;      // T x A, tanh(W_q hd + W_k h_j + c)
    std::vector<double> alpha;  // T
    std::vector<double> soft;   // H
    std::vector<double> merged; // 2H
    nn::CellCache cell;
    std::vector<double> out;    // 2, scaled displacement
    Point2 q_prev, dq_prev, q;
};

struct ForwardRecord {
    std::vector<Point2> window;
    EncoderTrace self;
    std::vector<EncoderTrace> neighbours;
    std::vector<double> inv_dist;  // N x T
    std::vector<double> hard;      // H
    std::vector<double> keys;      // T x A
    std::vector<DecodeStep> steps;
};

void forward(const Predictor& m, std::span<const Point2> window,
             std::span<const std::vector<Point2>> neighbour_windows, ForwardRecord& rec) {
    const auto& cfg = m.config;
    const auto& P = m.params;
    const std::size_t H = cfg.hidden_dim, A = cfg.attn_dim();
    const std::size_t T = m.obs_len(), steps = m.pred_len();
    const double s = cfg.velocity_scale;
    const auto& k = simd::kernels();
    if (window.size() != T) throw DimensionMismatch("predictor: window length != obs_len");

    rec.window.assign(window.begin(), window.end());
    run_encoder(m, window, rec.self);

    rec.neighbours.resize(neighbour_windows.size());
    rec.inv_dist.assign(neighbour_windows.size() * T, 0.0);
    rec.hard.assign(H, 0.0);
    for (std::size_t n = 0; n < neighbour_windows.size(); ++n) {
        const auto& nw = neighbour_windows[n];
        if (nw.size() != T) throw DimensionMismatch("predictor: neighbour window length != obs_len");
        run_encoder(m, nw, rec.neighbours[n]);
        for (std::size_t j = 0; j < T; ++j) {
            const double w = 1.0 / std::max(euclidean(nw[j], window[j]), cfg.dist_epsilon);
            rec.inv_dist[n * T + j] = w;
            k.axpy(H, w, rec.neighbours[n].steps[j].h.data(), rec.hard.data());
        }
    }

    // Key projections of the encoded history are shared by all decode steps.
    const std::size_t lda = 2 * H;
    rec.keys.assign(T * A, 0.0);
    for (std::size_t j = 0; j < T; ++j)
        k.gemv(P.scorer.W.data() + H, A, H, lda, rec.self.steps[j].h.data(), rec.keys.data() + j * A);

    rec.steps.resize(steps);
    std::vector<double> hd = rec.self.steps.back().h;
    std::vector<double> cd = rec.self.steps.back().c;
    Point2 q = window[T - 1];
    Point2 dq = T > 1 ? Point2{window[T - 1].x - window[T - 2].x, window[T - 1].y - window[T - 2].y}
                      : Point2{0.0, 0.0};
    std::vector<double> query(A), x(4 + 2 * H), scores(T);
    for (std::size_t t = 0; t < steps; ++t) {
        DecodeStep& st = rec.steps[t];
        std::copy(P.scorer.c.data(), P.scorer.c.data() + A, query.begin());
        k.gemv(P.scorer.W.data(), A, H, lda, hd.data(), query.data());
        st.u.resize(T * A);
        for (std::size_t j = 0; j < T; ++j) {
            double* u = st.u.data() + j * A;
            const double* key = rec.keys.data() + j * A;
            for (std::size_t a = 0; a < A; ++a) u[a] = std::tanh(query[a] + key[a]);
            scores[j] = k.dot(P.scorer.v.data(), u, A) + P.scorer.d[0];
        }
        st.alpha = scores;
        softmax(st.alpha);
        st.soft.assign(H, 0.0);
        for (std::size_t j = 0; j < T; ++j)
            k.axpy(H, st.alpha[j], rec.self.steps[j].h.data(), st.soft.data());
        st.merged = merge_context(st.soft, rec.hard);

        x[0] = 2.0 * q.x - 1.0;
        x[1] = 2.0 * q.y - 1.0;
        x[2] = s * dq.x;
        x[3] = s * dq.y;
        std::copy(st.merged.begin(), st.merged.end(), x.begin() + 4);
        nn::cell_forward(P.decoder, x, hd, cd, st.cell);
        st.out.resize(2);
        nn::linear_forward(P.head, st.cell.h, st.out);

        st.q_prev = q;
        st.dq_prev = dq;
        dq = {dq.x + st.out[0] / s, dq.y + st.out[1] / s};
        q = {q.x + dq.x, q.y + dq.y};
        st.q = q;
        hd = st.cell.h;
        cd = st.cell.c;
    }
}

void encoder_backward(const Predictor& m, const EncoderTrace& trace, const std::vector<double>& dh_ext,
                      const std::vector<double>* dc_last, PredictorParams& grads) {
    const std::size_t H = m.config.hidden_dim;
    const std::size_t T = trace.steps.size();
    std::vector<double> dh(H), dh_next(H, 0.0), dc_next(H, 0.0), dh_prev(H), dc_prev(H),
        dx(kEncoderInputDim);
    if (dc_last) dc_next = *dc_last;
    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t i = 0; i < H; ++i) dh[i] = dh_ext[t * H + i] + dh_next[i];
        nn::cell_backward(m.params.encoder, trace.steps[t], dh, dc_next, grads.encoder, dx, dh_prev,
                          dc_prev);
        dh_next.swap(dh_prev);
        dc_next.swap(dc_prev);
    }
}

// dq_ext[t]: gradient of the loss with respect to predicted position t.
void backward(const Predictor& m, const ForwardRecord& rec, std::span<const Point2> dq_ext,
              PredictorParams& grads) {
    const auto& cfg = m.config;
    const auto& P = m.params;
    const std::size_t H = cfg.hidden_dim, A = cfg.attn_dim();
    const std::size_t T = rec.window.size(), steps = rec.steps.size();
    const double s = cfg.velocity_scale;
    const std::size_t lda = 2 * H;
    const auto& k = simd::kernels();

    // gq[t], gd[t]: gradients w.r.t. position q_t and displacement dq_t
    // (index 0 is the last observation, which is data).
    std::vector<Point2> gq(steps + 1), gd(steps + 1);
    for (std::size_t t = 0; t < steps; ++t) gq[t + 1] = dq_ext[t];

    std::vector<double> dhd(H, 0.0), dcd(H, 0.0), dh_prev(H), dc_prev(H), dx(4 + 2 * H);
    std::vector<double> dK(T * A, 0.0), dh_self(T * H, 0.0), dhard(H, 0.0);
    std::vector<double> dalpha(T), de(T), sum_da(A);
    double dout[2];

    for (std::size_t t = steps; t >= 1; --t) {
        const DecodeStep& st = rec.steps[t - 1];
        gd[t].x += gq[t].x;
        gd[t].y += gq[t].y;
        gq[t - 1].x += gq[t].x;
        gq[t - 1].y += gq[t].y;
        gd[t - 1].x += gd[t].x;
        gd[t - 1].y += gd[t].y;

        dout[0] = gd[t].x / s;
        dout[1] = gd[t].y / s;
        nn::linear_backward(P.head, st.cell.h, {dout, 2}, grads.head, dhd);

        nn::cell_backward(P.decoder, st.cell, dhd, dcd, grads.decoder, dx, dh_prev, dc_prev);
        gq[t - 1].x += 2.0 * dx[0];
        gq[t - 1].y += 2.0 * dx[1];
        gd[t - 1].x += s * dx[2];
        gd[t - 1].y += s * dx[3];

        // merged = tanh([soft; hard])
        const double* dmerged = dx.data() + 4;
        std::vector<double> dsoft(H);
        for (std::size_t i = 0; i < H; ++i) {
            const double ms = st.merged[i], mh = st.merged[H + i];
            dsoft[i] = dmerged[i] * (1.0 - ms * ms);
            dhard[i] += dmerged[H + i] * (1.0 - mh * mh);
        }

        // soft = sum_j alpha_j h_j
        double weighted = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
            const double* hj = rec.self.steps[j].h.data();
            dalpha[j] = k.dot(hj, dsoft.data(), H);
            weighted += st.alpha[j] * dalpha[j];
            k.axpy(H, st.alpha[j], dsoft.data(), dh_self.data() + j * H);
        }
        std::fill(sum_da.begin(), sum_da.end(), 0.0);
        for (std::size_t j = 0; j < T; ++j) {
            de[j] = st.alpha[j] * (dalpha[j] - weighted);
            const double* u = st.u.data() + j * A;
            k.axpy(A, de[j], u, grads.scorer.v.data());
            grads.scorer.d[0] += de[j];
            double* dkj = dK.data() + j * A;
            for (std::size_t a = 0; a < A; ++a) {
                const double da = de[j] * P.scorer.v[a] * (1.0 - u[a] * u[a]);
                dkj[a] += da;
                sum_da[a] += da;
            }
        }
        k.axpy(A, 1.0, sum_da.data(), grads.scorer.c.data());
        k.ger(grads.scorer.W.data(), A, H, lda, 1.0, sum_da.data(), st.cell.h_prev.data());
        k.gemv_t(P.scorer.W.data(), A, H, lda, sum_da.data(), dh_prev.data());

        dhd.swap(dh_prev);
        dcd.swap(dc_prev);
    }

    // Decoder state was initialised from the final encoder state.
    k.axpy(H, 1.0, dhd.data(), dh_self.data() + (T - 1) * H);
    for (std::size_t j = 0; j < T; ++j) {
        const double* hj = rec.self.steps[j].h.data();
        const double* dkj = dK.data() + j * A;
        k.ger(grads.scorer.W.data() + H, A, H, lda, 1.0, dkj, hj);
        k.gemv_t(P.scorer.W.data() + H, A, H, lda, dkj, dh_self.data() + j * H);
    }
    encoder_backward(m, rec.self, dh_self, &dcd, grads);

    std::vector<double> dh_n(T * H);
    for (std::size_t n = 0; n < rec.neighbours.size(); ++n) {
        for (std::size_t j = 0; j < T; ++j)
            for (std::size_t i = 0; i < H; ++i) dh_n[j * H + i] = rec.inv_dist[n * T + j] * dhard[i];
        encoder_backward(m, rec.neighbours[n], dh_n, nullptr, grads);
    }
}

double loss_and_grad(const ForwardRecord& rec, std::span<const Point2> future,
                     std::vector<Point2>* dq, double weight) {
    const std::size_t steps = rec.steps.size();
    if (future.size() != steps) throw DimensionMismatch("predictor: future length != pred_len");
    double sum = 0.0;
    if (dq) dq->resize(steps);
    const double norm = 1.0 / static_cast<double>(2 * steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const double ex = rec.steps[t].q.x - future[t].x;
        const double ey = rec.steps[t].q.y - future[t].y;
        sum += ex * ex + ey * ey;
        if (dq) (*dq)[t] = {2.0 * norm * weight * ex, 2.0 * norm * weight * ey};
    }
    return sum * norm;
}

std::vector<std::vector<Point2>> padded_neighbours(std::span<const std::vector<Point2>> nws,
                                                   std::size_t T) {
    std::vector<std::vector<Point2>> out;
    out.reserve(nws.size());
    for (const auto& nw : nws) out.push_back(nw.size() == T ? nw : pad_window(nw, T));
    return out;
}

}  // namespace

EncodedHistory encode(const Predictor& model, std::span<const Point2> window) {
    if (window.size() != model.obs_len())
        throw DimensionMismatch("encode: trajectory length must equal the observation window");
    EncoderTrace trace;
    run_encoder(model, window, trace);
    return to_encoded(trace, model.config.hidden_dim);
}

SoftAttention soft_attention(const PredictorParams& params, const EncodedHistory& encoded,
                             std::span<const double> decoder_hidden) {
    const std::size_t H = encoded.hidden_dim;
    if (decoder_hidden.size() != H) throw DimensionMismatch("soft_attention: hidden dimension");
    SoftAttention out;
    out.weights.resize(encoded.steps());
    for (std::size_t j = 0; j < encoded.steps(); ++j)
        out.weights[j] = nn::ffn_score(params.scorer, decoder_hidden, encoded.step(j));
    softmax(out.weights);
    out.context.assign(H, 0.0);
    for (std::size_t j = 0; j < encoded.steps(); ++j)
        simd::kernels().axpy(H, out.weights[j], encoded.step(j).data(), out.context.data());
    return out;
}

std::vector<double> hardwired_attention(std::span<const NeighbourEncoding> neighbours,
                                        std::size_t hidden_dim, double eps) {
    std::vector<double> c(hidden_dim, 0.0);
    for (const auto& n : neighbours) {
        if (n.encoded.hidden_dim != hidden_dim || n.distances.size() != n.encoded.steps())
            throw DimensionMismatch("hardwired_attention: neighbour shape");
        for (std::size_t j = 0; j < n.encoded.steps(); ++j)
            simd::kernels().axpy(hidden_dim, 1.0 / std::max(n.distances[j], eps),
                                 n.encoded.step(j).data(), c.data());
    }
    return c;
}

std::vector<double> merge_context(std::span<const double> soft, std::span<const double> hard) {
    if (soft.size() != hard.size()) throw DimensionMismatch("merge_context: dimension mismatch");
    std::vector<double> out(soft.size() + hard.size());
    for (std::size_t i = 0; i < soft.size(); ++i) out[i] = std::tanh(soft[i]);
    for (std::size_t i = 0; i < hard.size(); ++i) out[soft.size() + i] = std::tanh(hard[i]);
    return out;
}

PredictionResult predict(const Predictor& model, const PointSequence& trajectory,
                         std::span<const std::vector<Point2>> neighbour_windows) {
    if (trajectory.empty()) throw EmptySequence();
    const std::size_t T = model.obs_len();
    const auto window = pad_window(trajectory.points(), T);
    const auto neigh = padded_neighbours(neighbour_windows, T);

    ForwardRecord rec;
    forward(model, window, neigh, rec);

    PredictionResult r;
    r.contexts = VectorSequence(2 * model.config.hidden_dim);
    const int last = trajectory.frames().back();
    for (std::size_t t = 0; t < rec.steps.size(); ++t) {
        r.positions.push_back(rec.steps[t].q, last + static_cast<int>(t) + 1);
        r.contexts.push_back(rec.steps[t].merged);
    }
    return r;
}

double sample_loss(const Predictor& model, const TrainingSample& s) {
    thread_local ForwardRecord rec;
    forward(model, s.history, s.neighbours, rec);
    return loss_and_grad(rec, s.future, nullptr, 1.0);
}

double accumulate_gradient(const Predictor& model, const TrainingSample& s, PredictorParams& grads,
                           double weight) {
    thread_local ForwardRecord rec;
    thread_local std::vector<Point2> dq;
    forward(model, s.history, s.neighbours, rec);
    const double loss = loss_and_grad(rec, s.future, &dq, weight);
    backward(model, rec, dq, grads);
    return loss;
}

double mean_loss(const Predictor& model, std::span<const TrainingSample> data) {
    if (data.empty()) throw Error("mean_loss: empty dataset");
    double sum = 0.0;
    for (const auto& s : data) sum += sample_loss(model, s);
    return sum / static_cast<double>(data.size());
}

TrainResult train(Predictor& model, std::span<const TrainingSample> data, const TrainOptions& opt) {
    if (data.empty()) throw Error("train: empty dataset");
    if (opt.batch_size == 0) throw ConfigError("train: batch size must be >= 1");
    for (const auto& s : data)
        if (s.history.size() != model.obs_len() || s.future.size() != model.pred_len())
            throw DimensionMismatch("train: sample horizons do not match the model");

    TrainResult result;
    result.loss_curve.push_back(mean_loss(model, data));

    auto params = model.params.tensors();
    PredictorParams grads(model.config);
    auto grad_views = grads.tensors();
    nn::AdamState adam({opt.learning_rate}, params);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(opt.seed);

    for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            const std::size_t end = std::min(order.size(), start + opt.batch_size);
            const double w = 1.0 / static_cast<double>(end - start);
            grads.zero();
            for (std::size_t i = start; i < end; ++i)
                epoch_loss += accumulate_gradient(model, data[order[i]], grads, w);
            if (opt.grad_clip > 0.0) {
                double sq = 0.0;
                for (const auto& g : grad_views)
                    sq += simd::kernels().dot(g.tensor->data(), g.tensor->data(), g.tensor->size());
                const double norm = std::sqrt(sq);
                if (norm > opt.grad_clip)
                    for (const auto& g : grad_views)
                        for (std::size_t i = 0; i < g.tensor->size(); ++i)
                            (*g.tensor)[i] *= opt.grad_clip / norm;
            }
            adam.step(params, grad_views);
            ++result.steps;
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(data.size()));
        if (opt.on_epoch) opt.on_epoch(epoch, result.loss_curve.back());
    }
    return result;
}

}  // namespace tbp::predictor
