// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered through the dispatch table after a CPU check.

#include "tbp/simd.hpp"

#include <immintrin.h>

#include <limits>

namespace tbp::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void gemv(const double* A, std::size_t rows, std::size_t cols, std::size_t lda, const double* x,
          double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot(A + r * lda, x, cols);
}

void axpy(std::size_t n, double a, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void gemv_t(const double* A, std::size_t rows, std::size_t cols, std::size_t lda,
            const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy(cols, x[r], A + r * lda, y);
}

void ger(double* A, std::size_t rows, std::size_t cols, std::size_t lda, double alpha,
         const double* x, const double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy(cols, alpha * x[r], y, A + r * lda);
}

// No FMA here: the squared distances must round exactly like the scalar path
// so that the Hausdorff result is bit-identical across kernels.
double min_sq_dist(double px, double py, const double* xs, const double* ys, std::size_t n) {
    const __m256d vx = _mm256_set1_pd(px);
    const __m256d vy = _mm256_set1_pd(py);
    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(vx, _mm256_loadu_pd(xs + i));
        const __m256d dy = _mm256_sub_pd(vy, _mm256_loadu_pd(ys + i));
        const __m256d d = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
        best = _mm256_min_pd(best, d);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, best);
    double m = lanes[0];
    for (int k = 1; k < 4; ++k)
        if (lanes[k] < m) m = lanes[k];
    for (; i < n; ++i) {
        const double dx = px - xs[i];
        const double dy = py - ys[i];
        const double d = dx * dx + dy * dy;
        if (d < m) m = d;
    }
    return m;
}

}  // namespace

const KernelTable& table() {
    static const KernelTable t{Isa::Avx2, dot, gemv, gemv_t, ger, axpy, min_sq_dist};
    return t;
}

}  // namespace tbp::simd::avx2
