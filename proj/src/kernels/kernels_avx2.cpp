// AVX2+FMA variants.  This translation unit is compiled with
// -mavx2 -mfma and must only be reached through the runtime dispatch in
// kernels_dispatch.cpp.

#include "dsse/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <cmath>
#include <immintrin.h>

namespace dsse::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swap = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

double a_dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i),
                               _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                               _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i),
                               _mm256_loadu_pd(y + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void a_axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void a_matvec(const double* A, std::size_t rows, std::size_t cols,
              const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = a_dot(A + r * cols, x, cols);
}

void a_matvec_t_acc(const double* A, std::size_t rows, std::size_t cols,
                    const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r)
        a_axpy(x[r], A + r * cols, y, cols);
}

void a_ger_acc(double* A, std::size_t rows, std::size_t cols, double alpha,
               const double* u, const double* v) {
    for (std::size_t r = 0; r < rows; ++r)
        a_axpy(alpha * u[r], v, A + r * cols, cols);
}

void a_syr_acc(double* A, std::size_t n, double alpha, const double* x) {
    for (std::size_t r = 0; r < n; ++r)
        a_axpy(alpha * x[r], x, A + r * n, n);
}

// exp() on 4 lanes, Cephes-style rational approximation: reduce by
// factoring powers of two, evaluate the degree-6 rational on the
// remainder, rescale through the exponent bits.
inline __m256d vec_exp(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);

    x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
    x = _mm256_min_pd(x, _mm256_set1_pd(709.0));

    __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                _MM_FROUND_TO_NEAREST_INT |
                                    _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, c1, x);
    r = _mm256_fnmadd_pd(n, c2, r);
    __m256d rr = _mm256_mul_pd(r, r);

    __m256d px = _mm256_fmadd_pd(p0, rr, p1);
    px = _mm256_fmadd_pd(px, rr, p2);
    px = _mm256_mul_pd(px, r);
    __m256d qx = _mm256_fmadd_pd(q0, rr, q1);
    qx = _mm256_fmadd_pd(qx, rr, q2);
    qx = _mm256_fmadd_pd(qx, rr, q3);

    __m256d e = _mm256_add_pd(
        one,
        _mm256_div_pd(_mm256_mul_pd(two, px), _mm256_sub_pd(qx, px)));

    __m128i n32 = _mm256_cvtpd_epi32(n);
    __m256i n64 = _mm256_cvtepi32_epi64(n32);
    n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
    n64 = _mm256_slli_epi64(n64, 52);
    return _mm256_mul_pd(e, _mm256_castsi256_pd(n64));
}

void a_logistic(const double* x, double* y, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d e = vec_exp(_mm256_sub_pd(zero, v));
        _mm256_storeu_pd(y + i, _mm256_div_pd(one, _mm256_add_pd(one, e)));
    }
    for (; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void a_adam_step(double* p, double* m, double* v, const double* g,
                 std::size_t n, double lr, double b1, double b2, double b1t,
                 double b2t, double eps) {
    const double mcs = 1.0 / (1.0 - b1t);
    const double vcs = 1.0 / (1.0 - b2t);
    const __m256d vb1 = _mm256_set1_pd(b1);
    const __m256d vb2 = _mm256_set1_pd(b2);
    const __m256d v1m = _mm256_set1_pd(1.0 - b1);
    const __m256d v2m = _mm256_set1_pd(1.0 - b2);
    const __m256d vmc = _mm256_set1_pd(mcs);
    const __m256d vvc = _mm256_set1_pd(vcs);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(v1m, vg));
        vv = _mm256_fmadd_pd(vb2, vv,
                             _mm256_mul_pd(v2m, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        __m256d den = _mm256_add_pd(
            _mm256_sqrt_pd(_mm256_mul_pd(vv, vvc)), veps);
        __m256d step =
            _mm256_div_pd(_mm256_mul_pd(vlr, _mm256_mul_pd(vm, vmc)), den);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] * mcs) / (std::sqrt(v[i] * vcs) + eps);
    }
}

void a_caxpy(cplx a, const cplx* x, cplx* y, std::size_t n) {
    const double* xp = reinterpret_cast<const double*>(x);
    double* yp = reinterpret_cast<double*>(y);
    const __m256d var = _mm256_set1_pd(a.real());
    const __m256d vai = _mm256_set1_pd(a.imag());
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d vx = _mm256_loadu_pd(xp + 2 * i);
        __m256d vxs = _mm256_permute_pd(vx, 0x5);
        __m256d t = _mm256_mul_pd(vxs, vai);
        __m256d prod = _mm256_fmaddsub_pd(vx, var, t);
        _mm256_storeu_pd(yp + 2 * i,
                         _mm256_add_pd(_mm256_loadu_pd(yp + 2 * i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

} // namespace

namespace detail {

const Ops& avx2_impl() {
    static const Ops ops = {
        "avx2",     a_dot,      a_axpy,     a_matvec,
        a_matvec_t_acc, a_ger_acc, a_syr_acc, a_logistic,
        a_adam_step, a_caxpy,
    };
    return ops;
}

} // namespace detail
} // namespace dsse::kernels

#endif // __AVX2__ && __FMA__
