#include "tbp/simd.hpp"

#include <limits>

namespace tbp::simd {
namespace {

double dot_ref(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void gemv_ref(const double* A, std::size_t rows, std::size_t cols, std::size_t lda,
              const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot_ref(A + r * lda, x, cols);
}

void gemv_t_ref(const double* A, std::size_t rows, std::size_t cols, std::size_t lda,
                const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double xr = x[r];
        const double* row = A + r * lda;
        for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * xr;
    }
}

void ger_ref(double* A, std::size_t rows, std::size_t cols, std::size_t lda, double alpha,
             const double* x, const double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double ax = alpha * x[r];
        double* row = A + r * lda;
        for (std::size_t c = 0; c < cols; ++c) row[c] += ax * y[c];
    }
}

void axpy_ref(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double min_sq_dist_ref(double px, double py, const double* xs, const double* ys,
                       std::size_t n) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = px - xs[i];
        const double dy = py - ys[i];
        const double d = dx * dx + dy * dy;
        if (d < best) best = d;
    }
    return best;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::Scalar, dot_ref, gemv_ref, gemv_t_ref,
                                   ger_ref,     axpy_ref, min_sq_dist_ref};
    return table;
}

}  // namespace tbp::simd
