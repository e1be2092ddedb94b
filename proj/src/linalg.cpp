#include "dsse/linalg.hpp"

#include "dsse/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace dsse {

bool cholesky_solve_inplace(Mat& A, Vec& b, double pivot_floor) {
    const auto& K = kernels::active_ops();
    const std::size_t n = A.rows;
    for (std::size_t j = 0; j < n; ++j) {
        double* rj = A.row(j);
        double d = A.at(j, j) - K.dot(rj, rj, j);
        if (!(d > pivot_floor) || !std::isfinite(d)) return false;
        d = std::sqrt(d);
        A.at(j, j) = d;
        const double inv = 1.0 / d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double* ri = A.row(i);
            ri[j] = (ri[j] - K.dot(ri, rj, j)) * inv;
        }
    }
    // forward substitution L y = b
    for (std::size_t i = 0; i < n; ++i)
        b[i] = (b[i] - K.dot(A.row(i), b.data(), i)) / A.at(i, i);
    // back substitution L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= A.at(k, ii) * b[k];
        b[ii] = s / A.at(ii, ii);
    }
    return true;
}

CLu::CLu(CMat m) : lu_(std::move(m)), perm_(lu_.rows) {
    const auto& K = kernels::active_ops();
    const std::size_t n = lu_.rows;
    if (lu_.cols != n) fail_numeric("CLu: matrix not square");
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t piv = j;
        double best = std::abs(lu_.at(j, j));
        for (std::size_t i = j + 1; i < n; ++i) {
            const double cand = std::abs(lu_.at(i, j));
            if (cand > best) {
                best = cand;
                piv = i;
            }
        }
        if (!(best > 1e-14) || !std::isfinite(best))
            fail_numeric("CLu: singular matrix");
        if (piv != j) {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(lu_.at(j, c), lu_.at(piv, c));
            std::swap(perm_[j], perm_[piv]);
        }
        const cplx inv = 1.0 / lu_.at(j, j);
        for (std::size_t i = j + 1; i < n; ++i) {
            const cplx f = lu_.at(i, j) * inv;
            lu_.at(i, j) = f;
            K.caxpy(-f, lu_.row(j) + j + 1, lu_.row(i) + j + 1, n - j - 1);
        }
    }
}

void CLu::solve(CVec& b) const {
    const std::size_t n = lu_.rows;
    CVec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 1; i < n; ++i) {
        cplx s = x[i];
        const cplx* ri = lu_.row(i);
        for (std::size_t k = 0; k < i; ++k) s -= ri[k] * x[k];
        x[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
        cplx s = x[ii];
        const cplx* ri = lu_.row(ii);
        for (std::size_t k = ii + 1; k < n; ++k) s -= ri[k] * x[k];
        x[ii] = s / ri[ii];
    }
    b = std::move(x);
}

static double norm_1(const CMat& m) {
    double best = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) s += std::abs(m.at(r, c));
        best = std::max(best, s);
    }
    return best;
}

CMat invert_small(const CMat& m) {
    const std::size_t n = m.rows;
    if (m.cols != n) fail_numeric("invert_small: matrix not square");
    CMat w(n, 2 * n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) w.at(r, c) = m.at(r, c);
        w.at(r, n + r) = 1.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t piv = j;
        double best = std::abs(w.at(j, j));
        for (std::size_t i = j + 1; i < n; ++i)
            if (std::abs(w.at(i, j)) > best) {
                best = std::abs(w.at(i, j));
                piv = i;
            }
        if (!(best > 0.0) || !std::isfinite(best))
            fail_numeric("invert_small: singular matrix");
        if (piv != j)
            for (std::size_t c = 0; c < 2 * n; ++c)
                std::swap(w.at(j, c), w.at(piv, c));
        const cplx inv = 1.0 / w.at(j, j);
        for (std::size_t c = 0; c < 2 * n; ++c) w.at(j, c) *= inv;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            const cplx f = w.at(i, j);
            if (f == cplx(0.0, 0.0)) continue;
            for (std::size_t c = 0; c < 2 * n; ++c)
                w.at(i, c) -= f * w.at(j, c);
        }
    }
    CMat out(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) out.at(r, c) = w.at(r, n + c);
    return out;
}

double cond_1norm_small(const CMat& m) {
    CMat inv = invert_small(m);
    return norm_1(m) * norm_1(inv);
}

Vec symmetric_eigenvalues(Mat m) {
    const std::size_t n = m.rows;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                off += m.at(p, q) * m.at(p, q);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) +
                                  std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m.at(k, p);
                    const double mkq = m.at(k, q);
                    m.at(k, p) = c * mkp - s * mkq;
                    m.at(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m.at(p, k);
                    const double mqk = m.at(q, k);
                    m.at(p, k) = c * mpk - s * mqk;
                    m.at(q, k) = s * mpk + c * mqk;
                }
            }
        }
    }
    Vec ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = m.at(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

} // namespace dsse
