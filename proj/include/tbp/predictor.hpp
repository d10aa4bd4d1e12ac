#pragma once

// Attention-based trajectory predictor.
//
// A pedestrian's recent trajectory is encoded by an LSTM. At every decode
// step a soft attention over the pedestrian's own encoded history is merged
// with a fixed inverse-distance ("hardwired") attention over the encoded
// histories of its neighbours, and an LSTM decoder emits the next position.
//
// All positions handled here are normalised to [0,1]^2 by SceneBounds.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tbp/geometry.hpp"
#include "tbp/nn.hpp"

namespace tbp::predictor {

enum class Horizon { Short, Long };

std::string_view horizon_name(Horizon h);
Horizon parse_horizon(std::string_view s);

struct SceneBounds {
    double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;

    Point2 normalize(Point2 p) const {
        return {(p.x - xmin) / (xmax - xmin), (p.y - ymin) / (ymax - ymin)};
    }
    Point2 denormalize(Point2 p) const {
        return {xmin + p.x * (xmax - xmin), ymin + p.y * (ymax - ymin)};
    }
    // Scene-unit length of a normalised x-extent (used for reporting only).
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }

    friend bool operator==(const SceneBounds&, const SceneBounds&) = default;
};

struct PredictorConfig {
    std::size_t hidden_dim = 32;
    std::size_t attention_dim = 0;  // 0 means hidden_dim
    std::size_t obs_short = 3;
    std::size_t pred_short = 2;
    std::size_t obs_long = 10;
    std::size_t pred_long = 10;
    double neighbour_radius = 0.2;  // normalised units
    double dist_epsilon = 1e-3;     // normalised units
    // Displacements are multiplied by this before entering the network and
    // the output head is divided by it.
    double velocity_scale = 20.0;
    SceneBounds bounds;

    std::size_t obs_len(Horizon h) const { return h == Horizon::Short ? obs_short : obs_long; }
    std::size_t pred_len(Horizon h) const { return h == Horizon::Short ? pred_short : pred_long; }
    std::size_t attn_dim() const { return attention_dim == 0 ? hidden_dim : attention_dim; }
    void validate() const;

    friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

// Encoder input: [2p - 1 ; s * (p_t - p_{t-1})].
inline constexpr std::size_t kEncoderInputDim = 4;

struct PredictorParams {
    nn::RecurrentCellParams encoder;  // input 4
    nn::FeedForwardParams scorer;     // input [decoder hidden ; encoder hidden]
    nn::RecurrentCellParams decoder;  // input [2q - 1 ; s * dq ; merged context]
    nn::LinearParams head;            // hidden -> scaled change of displacement

    PredictorParams() = default;
    explicit PredictorParams(const PredictorConfig& cfg);

    std::vector<nn::NamedTensor> tensors();
    void zero();
};

struct Predictor {
    PredictorConfig config;
    Horizon horizon = Horizon::Long;
    PredictorParams params;

    std::size_t obs_len() const { return config.obs_len(horizon); }
    std::size_t pred_len() const { return config.pred_len(horizon); }
};

// Seeded uniform initialisation of every block except the output head, which
// starts at zero.
Predictor make_predictor(const PredictorConfig& cfg, Horizon horizon, std::uint64_t seed);
nn::Checkpoint to_checkpoint(const Predictor& p);
Predictor from_checkpoint(const nn::Checkpoint& ck);

// ---------------------------------------------------------------------------
// Individual stages.

struct EncodedHistory {
    std::size_t hidden_dim = 0;
    std::vector<double> hidden;  // steps x hidden_dim, time order
    std::vector<double> cell;    // final cell state

    std::size_t steps() const { return hidden_dim == 0 ? 0 : hidden.size() / hidden_dim; }
    std::span<const double> step(std::size_t j) const {
        return {hidden.data() + j * hidden_dim, hidden_dim};
    }
};

// Last `len` points, left-padded by repeating the earliest one.
std::vector<Point2> pad_window(std::span<const Point2> points, std::size_t len);

EncodedHistory encode(const Predictor& model, std::span<const Point2> window);

struct SoftAttention {
    std::vector<double> context;  // hidden_dim
    std::vector<double> weights;  // one per encoded step
};

SoftAttention soft_attention(const PredictorParams& params, const EncodedHistory& encoded,
                             std::span<const double> decoder_hidden);

struct NeighbourEncoding {
    EncodedHistory encoded;
    std::vector<double> distances;  // per step, to the subject
};

// sum_n sum_j h^n_j / max(dist(n, j), eps). Zero vector when empty.
std::vector<double> hardwired_attention(std::span<const NeighbourEncoding> neighbours,
                                        std::size_t hidden_dim, double eps);

// Elementwise tanh of [soft ; hard].
std::vector<double> merge_context(std::span<const double> soft, std::span<const double> hard);

// ---------------------------------------------------------------------------
// Recorded forward pass and its backward.

struct PredictionResult {
    PointSequence positions;   // normalised, frames last+1 .. last+pred_len
    VectorSequence contexts;   // merged context per decode step
};

// Predicts from the subject's trajectory (any length >= 1; padded or truncated
// to the model's observation window) and the neighbours' trajectories. Each
// neighbour window is aligned point-by-point with the subject window.
// Each decode step updates the displacement, dq_t = dq_{t-1} + head(h_t) / s,
// and moves q_t = q_{t-1} + dq_t, seeded with the last observed point and the
// last observed displacement.
PredictionResult predict(const Predictor& model, const PointSequence& trajectory,
                         std::span<const std::vector<Point2>> neighbour_windows);

struct TrainingSample {
    std::vector<Point2> history;                  // obs_len points
    std::vector<std::vector<Point2>> neighbours;  // obs_len points each
    std::vector<Point2> future;                   // pred_len points
};

// Mean squared error over predicted coordinates.
double sample_loss(const Predictor& model, const TrainingSample& s);

// Gradient of sample_loss with respect to every parameter, accumulated
// (scaled by `weight`) into grads. Returns the loss.
double accumulate_gradient(const Predictor& model, const TrainingSample& s, PredictorParams& grads,
                           double weight = 1.0);

struct TrainOptions {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double grad_clip = 5.0;  // global L2 norm, <= 0 disables
    std::uint64_t seed = 1;
    std::function<void(std::size_t epoch, double loss)> on_epoch;
};

struct TrainResult {
    // Entry 0 is the loss before any update; entry e is the mean minibatch
    // loss during epoch e.
    std::vector<double> loss_curve;
    std::uint64_t steps = 0;
};

TrainResult train(Predictor& model, std::span<const TrainingSample> data, const TrainOptions& opt);

double mean_loss(const Predictor& model, std::span<const TrainingSample> data);

}  // namespace tbp::predictor
