#pragma once

#include "dsse/common.hpp"

#include <cstddef>

namespace dsse {

// Row-major dense real matrix.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }
    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

// Row-major dense complex matrix.
struct CMat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    CVec a;

    CMat() = default;
    CMat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}

    cplx* row(std::size_t r) { return a.data() + r * cols; }
    const cplx* row(std::size_t r) const { return a.data() + r * cols; }
    cplx& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    cplx at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

// In-place Cholesky solve of the symmetric positive definite system
// A x = b.  A is overwritten with its lower factor.  Returns false when a
// pivot drops below `pivot_floor` (A not numerically PD).
bool cholesky_solve_inplace(Mat& A, Vec& b, double pivot_floor = 0.0);

// LU factorization with partial pivoting of a square complex matrix.
class CLu {
public:
    // Throws Error(numeric) on a numerically singular pivot.
    explicit CLu(CMat m);

    // Solve A x = b; b is overwritten with x.
    void solve(CVec& b) const;

    std::size_t dim() const { return lu_.rows; }

private:
    CMat lu_;
    std::vector<std::size_t> perm_;
};

// 1-norm condition estimate via explicit inverse; intended for the small
// per-branch impedance blocks (n <= 3).
double cond_1norm_small(const CMat& m);

// Invert a small complex matrix (n <= 4) by Gauss-Jordan with partial
// pivoting.  Throws Error(numeric) when singular.
CMat invert_small(const CMat& m);

// Eigenvalues of a symmetric real matrix by cyclic Jacobi rotations,
// ascending.  Used for rank diagnostics on normal matrices.
Vec symmetric_eigenvalues(Mat m);

} // namespace dsse
