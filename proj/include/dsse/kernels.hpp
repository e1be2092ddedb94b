#pragma once

#include <complex>
#include <cstddef>

// Dense double-precision primitives behind the solver and training inner
// loops.  Every operation has a scalar reference implementation; on
// x86-64 an AVX2+FMA variant is selected at runtime when the CPU supports
// it.  Variants agree to rounding (FMA contraction and reduction order
// differ), which the equivalence tests pin down; a given binary on a
// given machine always dispatches the same way, so end-to-end runs stay
// reproducible.

namespace dsse::kernels {

using cplx = std::complex<double>;

struct Ops {
    const char* name;

    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = A x, A row-major (rows x cols)
    void (*matvec)(const double* A, std::size_t rows, std::size_t cols,
                   const double* x, double* y);
    // y += A^T x, A row-major (rows x cols), y has cols entries
    void (*matvec_t_acc)(const double* A, std::size_t rows, std::size_t cols,
                         const double* x, double* y);
    // A += alpha * u v^T
    void (*ger_acc)(double* A, std::size_t rows, std::size_t cols,
                    double alpha, const double* u, const double* v);
    // A += alpha * x x^T (full square matrix, n x n)
    void (*syr_acc)(double* A, std::size_t n, double alpha, const double* x);
    // y[i] = 1 / (1 + exp(-x[i]))
    void (*logistic)(const double* x, double* y, std::size_t n);
    // Adam parameter update; b1t/b2t are beta1^t/beta2^t for bias correction
    void (*adam_step)(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double b1, double b2,
                      double b1t, double b2t, double eps);
    // y += a * x (complex)
    void (*caxpy)(cplx a, const cplx* x, cplx* y, std::size_t n);
};

const Ops& scalar_ops();

bool avx2_supported();
// Defined only when the build produced the AVX2 translation unit; check
// avx2_supported() before calling through the result on this CPU.
const Ops* avx2_ops();

// Runtime-selected implementation.  Honors DSSE_KERNELS=scalar|avx2 for
// tests and debugging; unknown values fall back to auto selection.
const Ops& active_ops();

} // namespace dsse::kernels
