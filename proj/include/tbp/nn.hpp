#pragma once

// Minimal differentiable building blocks: a gated recurrent (LSTM) cell, a
// one-hidden-layer scoring network, a linear layer and the Adam optimiser.
// Each block has an explicit forward that fills a cache and a backward that
// consumes it; the predictor composes them into its own recorded graph.

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tbp::nn {

// Rank-1 or rank-2 tensor with a row-major buffer.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::size_t n) : shape_{n}, data_(n, 0.0) {}
    Tensor(std::size_t rows, std::size_t cols) : shape_{rows, cols}, data_(rows * cols, 0.0) {}
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> span() { return data_; }
    std::span<const double> span() const { return data_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    void fill(double v);
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
void init_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// LSTM cell. Gate blocks are stacked [input; forget; output; candidate].

struct RecurrentCellParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Tensor W;  // 4H x I
    Tensor U;  // 4H x H
    Tensor b;  // 4H

    RecurrentCellParams() = default;
    RecurrentCellParams(std::size_t in, std::size_t hid);
};

struct CellState {
    std::vector<double> hidden;
    std::vector<double> cell;
};

// Everything the backward pass needs from one forward step.
struct CellCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> gates;  // activated i, f, o, g (4H)
    std::vector<double> c, tanh_c, h;
};

void cell_forward(const RecurrentCellParams& p, std::span<const double> x,
                  std::span<const double> h_prev, std::span<const double> c_prev, CellCache& cache);

// dh, dc: gradients flowing into this step's outputs. Accumulates parameter
// gradients into grad and writes dx, dh_prev, dc_prev (overwritten).
void cell_backward(const RecurrentCellParams& p, const CellCache& cache, std::span<const double> dh,
                   std::span<const double> dc, RecurrentCellParams& grad, std::span<double> dx,
                   std::span<double> dh_prev, std::span<double> dc_prev);

CellState cell_step(const RecurrentCellParams& p, std::span<const double> input,
                    const CellState& state);

// ---------------------------------------------------------------------------
// score(a, b) = v . tanh(W [a; b] + c) + d

struct FeedForwardParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Tensor W;  // A x input_dim
    Tensor c;  // A
    Tensor v;  // A
    Tensor d;  // 1

    FeedForwardParams() = default;
    FeedForwardParams(std::size_t in, std::size_t hid);
};

double ffn_score(const FeedForwardParams& p, std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// y = W x + b

struct LinearParams {
    Tensor W;  // out x in
    Tensor b;  // out

    LinearParams() = default;
    LinearParams(std::size_t in, std::size_t out) : W(out, in), b(out) {}
};

void linear_forward(const LinearParams& p, std::span<const double> x, std::span<double> y);
// Accumulates into grad; adds W^T dy into dx.
void linear_backward(const LinearParams& p, std::span<const double> x, std::span<const double> dy,
                     LinearParams& grad, std::span<double> dx);

// ---------------------------------------------------------------------------
// Named parameter views, used by the optimiser, checkpoints and grad checks.

struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class AdamState {
public:
    AdamState() = default;
    AdamState(AdamConfig cfg, const std::vector<NamedTensor>& params);

    // params and grads must line up with the constructor's list.
    void step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads);

    std::uint64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// ---------------------------------------------------------------------------
// Checkpoint: text file, one header line, metadata lines, then one block per
// tensor with values as C99 hex floats (exact round trip).
//
//   tbp-checkpoint 1
//   meta <key> <value>
//   tensor <name> <rank> <dim...>
//   <values, whitespace separated>
//   end

struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tbp::nn
