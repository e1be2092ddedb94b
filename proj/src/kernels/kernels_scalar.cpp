#include "dsse/kernels.hpp"

#include <cmath>

namespace dsse::kernels {
namespace {

double s_dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_matvec(const double* A, std::size_t rows, std::size_t cols,
              const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = s_dot(A + r * cols, x, cols);
}

void s_matvec_t_acc(const double* A, std::size_t rows, std::size_t cols,
                    const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r)
        s_axpy(x[r], A + r * cols, y, cols);
}

void s_ger_acc(double* A, std::size_t rows, std::size_t cols, double alpha,
               const double* u, const double* v) {
    for (std::size_t r = 0; r < rows; ++r)
        s_axpy(alpha * u[r], v, A + r * cols, cols);
}

void s_syr_acc(double* A, std::size_t n, double alpha, const double* x) {
    for (std::size_t r = 0; r < n; ++r)
        s_axpy(alpha * x[r], x, A + r * n, n);
}

void s_logistic(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void s_adam_step(double* p, double* m, double* v, const double* g,
                 std::size_t n, double lr, double b1, double b2, double b1t,
                 double b2t, double eps) {
    const double mc = 1.0 / (1.0 - b1t);
    const double vc = 1.0 / (1.0 - b2t);
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] * mc) / (std::sqrt(v[i] * vc) + eps);
    }
}

void s_caxpy(cplx a, const cplx* x, cplx* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",   s_dot,      s_axpy,     s_matvec,
        s_matvec_t_acc, s_ger_acc, s_syr_acc, s_logistic,
        s_adam_step, s_caxpy,
    };
    return ops;
}

} // namespace dsse::kernels
