#include "tbp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tbp/error.hpp"
#include "tbp/simd.hpp"

namespace tbp::nn {

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    std::size_t n = shape_.empty() ? 0 : 1;
    for (std::size_t d : shape_) n *= d;
    if (shape_.empty() || shape_.size() > 2 || n != data_.size())
        throw DimensionMismatch("Tensor: shape does not match buffer length");
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void init_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DimensionMismatch(what);
}

}  // namespace

RecurrentCellParams::RecurrentCellParams(std::size_t in, std::size_t hid)
    : input_dim(in), hidden_dim(hid), W(4 * hid, in), U(4 * hid, hid), b(4 * hid) {}

void cell_forward(const RecurrentCellParams& p, std::span<const double> x,
                  std::span<const double> h_prev, std::span<const double> c_prev, CellCache& cache) {
    const std::size_t H = p.hidden_dim;
    require(x.size() == p.input_dim, "cell_forward: input dimension");
    require(h_prev.size() == H && c_prev.size() == H, "cell_forward: state dimension");
    const auto& k = simd::kernels();

    cache.x.assign(x.begin(), x.end());
    cache.h_prev.assign(h_prev.begin(), h_prev.end());
    cache.c_prev.assign(c_prev.begin(), c_prev.end());
    cache.gates.assign(p.b.data(), p.b.data() + 4 * H);
    double* z = cache.gates.data();
    k.gemv(p.W.data(), 4 * H, p.input_dim, p.input_dim, x.data(), z);
    k.gemv(p.U.data(), 4 * H, H, H, h_prev.data(), z);

    cache.c.resize(H);
    cache.tanh_c.resize(H);
    cache.h.resize(H);
    for (std::size_t j = 0; j < H; ++j) {
        const double i = sigmoid(z[j]);
        const double f = sigmoid(z[H + j]);
        const double o = sigmoid(z[2 * H + j]);
        const double g = std::tanh(z[3 * H + j]);
        z[j] = i;
        z[H + j] = f;
        z[2 * H + j] = o;
        z[3 * H + j] = g;
        const double c = f * c_prev[j] + i * g;
        cache.c[j] = c;
        cache.tanh_c[j] = std::tanh(c);
        cache.h[j] = o * cache.tanh_c[j];
    }
}

void cell_backward(const RecurrentCellParams& p, const CellCache& cache, std::span<const double> dh,
                   std::span<const double> dc, RecurrentCellParams& grad, std::span<double> dx,
                   std::span<double> dh_prev, std::span<double> dc_prev) {
    const std::size_t H = p.hidden_dim;
    require(dh.size() == H && dc.size() == H && dh_prev.size() == H && dc_prev.size() == H &&
                dx.size() == p.input_dim,
            "cell_backward: dimension");
    const auto& k = simd::kernels();
    const double* g = cache.gates.data();

    std::vector<double> dz(4 * H);
    for (std::size_t j = 0; j < H; ++j) {
        const double i = g[j], f = g[H + j], o = g[2 * H + j], cand = g[3 * H + j];
        const double tc = cache.tanh_c[j];
        const double dcell = dc[j] + dh[j] * o * (1.0 - tc * tc);
        dz[j] = dcell * cand * i * (1.0 - i);
        dz[H + j] = dcell * cache.c_prev[j] * f * (1.0 - f);
        dz[2 * H + j] = dh[j] * tc * o * (1.0 - o);
        dz[3 * H + j] = dcell * i * (1.0 - cand * cand);
        dc_prev[j] = dcell * f;
    }
    k.ger(grad.W.data(), 4 * H, p.input_dim, p.input_dim, 1.0, dz.data(), cache.x.data());
    k.ger(grad.U.data(), 4 * H, H, H, 1.0, dz.data(), cache.h_prev.data());
    k.axpy(4 * H, 1.0, dz.data(), grad.b.data());

    std::fill(dx.begin(), dx.end(), 0.0);
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    k.gemv_t(p.W.data(), 4 * H, p.input_dim, p.input_dim, dz.data(), dx.data());
    k.gemv_t(p.U.data(), 4 * H, H, H, dz.data(), dh_prev.data());
}

CellState cell_step(const RecurrentCellParams& p, std::span<const double> input,
                    const CellState& state) {
    CellCache cache;
    cell_forward(p, input, state.hidden, state.cell, cache);
    return {std::move(cache.h), std::move(cache.c)};
}

FeedForwardParams::FeedForwardParams(std::size_t in, std::size_t hid)
    : input_dim(in), hidden_dim(hid), W(hid, in), c(hid), v(hid), d(1) {}

double ffn_score(const FeedForwardParams& p, std::span<const double> a, std::span<const double> b) {
    require(a.size() + b.size() == p.input_dim, "ffn_score: input dimension");
    const auto& k = simd::kernels();
    std::vector<double> hidden(p.c.data(), p.c.data() + p.hidden_dim);
    k.gemv(p.W.data(), p.hidden_dim, a.size(), p.input_dim, a.data(), hidden.data());
    k.gemv(p.W.data() + a.size(), p.hidden_dim, b.size(), p.input_dim, b.data(), hidden.data());
    for (double& h : hidden) h = std::tanh(h);
    return k.dot(p.v.data(), hidden.data(), p.hidden_dim) + p.d[0];
}

void linear_forward(const LinearParams& p, std::span<const double> x, std::span<double> y) {
    require(x.size() == p.W.cols() && y.size() == p.W.rows(), "linear_forward: dimension");
    std::copy(p.b.data(), p.b.data() + p.b.size(), y.begin());
    simd::kernels().gemv(p.W.data(), p.W.rows(), p.W.cols(), p.W.cols(), x.data(), y.data());
}

void linear_backward(const LinearParams& p, std::span<const double> x, std::span<const double> dy,
                     LinearParams& grad, std::span<double> dx) {
    require(x.size() == p.W.cols() && dy.size() == p.W.rows() && dx.size() == x.size(),
            "linear_backward: dimension");
    const auto& k = simd::kernels();
    k.ger(grad.W.data(), p.W.rows(), p.W.cols(), p.W.cols(), 1.0, dy.data(), x.data());
    k.axpy(dy.size(), 1.0, dy.data(), grad.b.data());
    k.gemv_t(p.W.data(), p.W.rows(), p.W.cols(), p.W.cols(), dy.data(), dx.data());
}

AdamState::AdamState(AdamConfig cfg, const std::vector<NamedTensor>& params) : cfg_(cfg) {
    for (const auto& p : params) {
        m_.emplace_back(p.tensor->shape(), std::vector<double>(p.tensor->size(), 0.0));
        v_.emplace_back(p.tensor->shape(), std::vector<double>(p.tensor->size(), 0.0));
    }
}

void AdamState::step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw DimensionMismatch("AdamState::step: parameter list length");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < m_.size(); ++k) {
        Tensor& p = *params[k].tensor;
        const Tensor& g = *grads[k].tensor;
        if (!p.same_shape(m_[k]) || !g.same_shape(m_[k]))
            throw DimensionMismatch("AdamState::step: shape of " + params[k].name);
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

}  // namespace tbp::nn
