#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsse/linalg.hpp"
#include "dsse/rng.hpp"

#include <algorithm>
#include <cmath>

using namespace dsse;

namespace {

Mat random_spd(Rng& rng, std::size_t n, double ridge) {
    Mat b(n, n);
    for (double& x : b.a) x = rng.uniform(-1.0, 1.0);
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                acc += b.at(i, k) * b.at(j, k);
            a.at(i, j) = acc + (i == j ? ridge : 0.0);
        }
    return a;
}

CMat random_cmat(Rng& rng, std::size_t n, double diag_boost) {
    CMat m(n, n);
    for (cplx& x : m.a) x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) += diag_boost;
    return m;
}

} // namespace

TEST_CASE("cholesky solves random spd systems") {
    Rng rng(21);
    for (std::size_t n : {std::size_t{1}, std::size_t{3}, std::size_t{10},
                          std::size_t{40}}) {
        Mat a = random_spd(rng, n, 0.5);
        Vec x_true(n);
        for (double& x : x_true) x = rng.uniform(-2.0, 2.0);
        Vec b(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                b[i] += a.at(i, j) * x_true[j];
        Mat work = a;
        REQUIRE(cholesky_solve_inplace(work, b));
        for (std::size_t i = 0; i < n; ++i)
            CHECK(b[i] == doctest::Approx(x_true[i]).epsilon(1e-9));
    }
}

TEST_CASE("cholesky rejects singular and indefinite matrices") {
    // rank-1 outer product: pivot hits zero at the second column
    Mat r1(3, 3);
    const double u[3] = {1.0, 2.0, -1.0};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) r1.at(i, j) = u[i] * u[j];
    Vec b = {1.0, 0.0, 0.0};
    CHECK_FALSE(cholesky_solve_inplace(r1, b, 1e-12));

    Mat neg(2, 2);
    neg.at(0, 0) = -1.0;
    neg.at(1, 1) = 1.0;
    Vec b2 = {1.0, 1.0};
    CHECK_FALSE(cholesky_solve_inplace(neg, b2));
}

TEST_CASE("cholesky pivot floor separates near-singular from healthy") {
    Mat a(2, 2);
    a.at(0, 0) = 1.0;
    a.at(1, 1) = 1e-14; // tiny but positive pivot
    Mat a1 = a, a2 = a;
    Vec b1 = {1.0, 1.0}, b2 = {1.0, 1.0};
    CHECK(cholesky_solve_inplace(a1, b1, 0.0));
    CHECK_FALSE(cholesky_solve_inplace(a2, b2, 1e-10));
}

TEST_CASE("complex lu factors and solves well conditioned systems") {
    Rng rng(22);
    for (std::size_t n : {std::size_t{1}, std::size_t{4}, std::size_t{12},
                          std::size_t{30}}) {
        CMat a = random_cmat(rng, n, 4.0);
        CVec x_true(n);
        for (cplx& x : x_true)
            x = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        CVec b(n, cplx{});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                b[i] += a.at(i, j) * x_true[j];
        CLu lu(a);
        CHECK(lu.dim() == n);
        lu.solve(b);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(b[i] - x_true[i]) <= 1e-10);
    }
}

TEST_CASE("complex lu needs pivoting and rejects singular input") {
    // zero leading pivot: solvable only with row exchange
    CMat a(2, 2);
    a.at(0, 0) = 0.0;
    a.at(0, 1) = 1.0;
    a.at(1, 0) = 1.0;
    a.at(1, 1) = 1.0;
    CLu lu(a);
    CVec b = {cplx{2.0, 0.0}, cplx{3.0, 0.0}};
    lu.solve(b); // x = (1, 2)
    CHECK(std::abs(b[0] - cplx{1.0, 0.0}) <= 1e-14);
    CHECK(std::abs(b[1] - cplx{2.0, 0.0}) <= 1e-14);

    CMat s(2, 2);
    s.at(0, 0) = {1.0, 1.0};
    s.at(0, 1) = {2.0, 2.0};
    s.at(1, 0) = {0.5, 0.5};
    s.at(1, 1) = {1.0, 1.0}; // row 2 = 0.5 * row 1
    CHECK_THROWS_AS(CLu{s}, Error);
}

TEST_CASE("invert_small produces true inverses and flags singular blocks") {
    Rng rng(23);
    for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
        CMat a = random_cmat(rng, n, 2.0);
        CMat inv = invert_small(a);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                cplx acc{};
                for (std::size_t k = 0; k < n; ++k)
                    acc += a.at(i, k) * inv.at(k, j);
                CHECK(std::abs(acc - (i == j ? cplx{1.0, 0.0} : cplx{})) <=
                      1e-12);
            }
    }
    CMat z(2, 2); // all zeros
    CHECK_THROWS_AS(invert_small(z), Error);
}

TEST_CASE("cond_1norm_small reports known condition numbers") {
    CMat eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    CHECK(cond_1norm_small(eye) == doctest::Approx(1.0));

    CMat scaled = eye;
    for (std::size_t i = 0; i < 3; ++i) scaled.at(i, i) = {0.0, 5.0};
    CHECK(cond_1norm_small(scaled) == doctest::Approx(1.0));

    CMat stiff(2, 2);
    stiff.at(0, 0) = 1.0;
    stiff.at(1, 1) = 1e-6;
    CHECK(cond_1norm_small(stiff) == doctest::Approx(1e6).epsilon(1e-9));
}

TEST_CASE("jacobi eigenvalues recover a planted spectrum") {
    Rng rng(24);
    const std::size_t n = 12;
    Vec spectrum(n);
    for (std::size_t i = 0; i < n; ++i)
        spectrum[i] = -3.0 + 0.7 * static_cast<double>(i);

    // orthonormal basis from Gram-Schmidt on a random matrix
    Mat q(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) q.at(i, j) = rng.uniform(-1, 1);
        for (std::size_t p = 0; p < i; ++p) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                dot += q.at(i, j) * q.at(p, j);
            for (std::size_t j = 0; j < n; ++j) q.at(i, j) -= dot * q.at(p, j);
        }
        double nrm = 0.0;
        for (std::size_t j = 0; j < n; ++j) nrm += q.at(i, j) * q.at(i, j);
        nrm = std::sqrt(nrm);
        for (std::size_t j = 0; j < n; ++j) q.at(i, j) /= nrm;
    }
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                acc += q.at(k, i) * spectrum[k] * q.at(k, j);
            a.at(i, j) = acc;
        }

    Vec ev = symmetric_eigenvalues(a);
    REQUIRE(ev.size() == n);
    CHECK(std::is_sorted(ev.begin(), ev.end()));
    for (std::size_t i = 0; i < n; ++i)
        CHECK(ev[i] == doctest::Approx(spectrum[i]).epsilon(1e-9));

    double tr_a = 0.0, tr_ev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tr_a += a.at(i, i);
        tr_ev += ev[i];
    }
    CHECK(tr_a == doctest::Approx(tr_ev).epsilon(1e-12));
}

TEST_CASE("jacobi eigenvalues of a diagonal matrix are its sorted entries") {
    Mat d(4, 4);
    d.at(0, 0) = 2.0;
    d.at(1, 1) = -1.0;
    d.at(2, 2) = 0.0;
    d.at(3, 3) = 7.5;
    Vec ev = symmetric_eigenvalues(d);
    REQUIRE(ev.size() == 4);
    CHECK(ev[0] == doctest::Approx(-1.0));
    CHECK(ev[1] == doctest::Approx(0.0));
    CHECK(ev[2] == doctest::Approx(2.0));
    CHECK(ev[3] == doctest::Approx(7.5));
}
