#pragma once

// Dense double-precision kernels used by the recurrent network and the
// Hausdorff distance. A scalar reference implementation always exists; an
// AVX2 variant is selected at runtime when the CPU supports it.
//
// Set TBP_SIMD=scalar in the environment to force the reference path.

#include <cstddef>
#include <string_view>

namespace tbp::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    Isa isa;

    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);

    // y[r] += sum_c A[r * lda + c] * x[c]
    void (*gemv)(const double* A, std::size_t rows, std::size_t cols, std::size_t lda,
                 const double* x, double* y);

    // y[c] += sum_r A[r * lda + c] * x[r]
    void (*gemv_t)(const double* A, std::size_t rows, std::size_t cols, std::size_t lda,
                   const double* x, double* y);

    // A[r * lda + c] += alpha * x[r] * y[c]
    void (*ger)(double* A, std::size_t rows, std::size_t cols, std::size_t lda, double alpha,
                const double* x, const double* y);

    // y += a * x
    void (*axpy)(std::size_t n, double a, const double* x, double* y);

    // min_i (px - xs[i])^2 + (py - ys[i])^2; +inf when n == 0.
    double (*min_sq_dist)(double px, double py, const double* xs, const double* ys,
                          std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// Table chosen once per process.
const KernelTable& kernels();

std::string_view isa_name(Isa isa);

}  // namespace tbp::simd
