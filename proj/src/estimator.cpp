#include "dsse/estimator.hpp"

#include "dsse/kernels.hpp"
#include "dsse/linalg.hpp"

#include <cmath>

namespace dsse {

Vec pack_state(const CVec& v) {
    Vec x(2 * v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        x[k] = v[k].real();
        x[v.size() + k] = v[k].imag();
    }
    return x;
}

CVec unpack_state(const Vec& x) {
    const std::size_t K = x.size() / 2;
    CVec v(K);
    for (std::size_t k = 0; k < K; ++k) v[k] = cplx(x[k], x[K + k]);
    return v;
}

double wls_cost(const MeasurementSet& set, const CVec& v) {
    double cost = 0.0;
    for (std::size_t i = 0; i < set.fns.size(); ++i) {
        const double r = set.z[i] - evaluate(set.fns[i], v);
        cost += set.fns[i].weight * r * r;
    }
    return cost;
}

double nu_index(const CVec& v_hat, const CVec& v_true) {
    if (v_hat.size() != v_true.size())
        fail_input("nu_index: state length mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < v_hat.size(); ++k)
        acc += std::norm(v_hat[k] - v_true[k]);
    return acc;
}

double mu_index(const MeasurementSet& set, const CVec& v_hat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < set.fns.size(); ++i) {
        const double r = set.z[i] - evaluate(set.fns[i], v_hat);
        acc += r * r;
    }
    return acc;
}

CVec pmu_anchored_start(const FeederModel& m, const MeasurementSet& set) {
    CVec v = flat_start(m);
    for (std::size_t i = 0; i < set.fns.size(); ++i) {
        const MeasurementFn& fn = set.fns[i];
        if (fn.target_state == static_cast<std::size_t>(-1)) continue;
        cplx& slot = v[fn.target_state];
        if (fn.kind == MeasKind::v_re)
            slot = cplx(set.z[i], slot.imag());
        else if (fn.kind == MeasKind::v_im)
            slot = cplx(slot.real(), set.z[i]);
    }
    return v;
}

namespace {

bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

double norm2(const Vec& x) {
    const auto& K = kernels::active_ops();
    return std::sqrt(K.dot(x.data(), x.data(), x.size()));
}

} // namespace

EstimateResult estimate(const MeasurementSet& set, const CVec& v0,
                        const EstimatorConfig& cfg) {
    if (v0.size() != set.K) fail_input("estimate: initial state length mismatch");
    const std::size_t L = set.fns.size();
    const std::size_t n = 2 * set.K;
    const auto& Kops = kernels::active_ops();

    for (const cplx& vk : v0)
        if (!std::isfinite(vk.real()) || !std::isfinite(vk.imag()))
            fail_input("estimate: non-finite initial state");

    EstimateResult res;
    Vec x = pack_state(v0);
    CVec v = v0;
    double cost = wls_cost(set, v);
    res.cost_trace.push_back(cost);

    // The reported estimate is the cheapest iterate visited.  On monotone
    // (damped or noiseless) paths this is the final iterate; when plain
    // Gauss-Newton bounces, it keeps the best point instead of whatever the
    // iteration cap happened to land on.
    double best_cost = cost;
    CVec best_v = v;

    Mat H(L, n);
    Mat N(n, n);
    Mat Nd(n, n);
    Vec g(n), dx(n);
    double lambda = -1.0; // set from the first damping floor
    int growth_streak = 0;

    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        for (std::size_t i = 0; i < L; ++i)
            jacobian_row(set.fns[i], v, H.row(i), set.K);

        std::fill(N.a.begin(), N.a.end(), 0.0);
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < L; ++i) {
            const double w = set.fns[i].weight;
            const double r = set.z[i] - evaluate(set.fns[i], v);
            Kops.syr_acc(N.a.data(), n, w, H.row(i));
            Kops.axpy(w * r, H.row(i), g.data(), n);
        }

        double trace = 0.0;
        for (std::size_t k = 0; k < n; ++k) trace += N.at(k, k);
        if (!(trace > 1e-30)) {
            res.v_hat = best_v;
            res.iterations = iter - 1;
            res.diverged_reason = "vanishing_jacobian";
            return res;
        }
        const double floor = cfg.damping_floor_scale * trace /
                             static_cast<double>(n);
        // The floor seeds the first iteration and pins the non-adaptive
        // mode; adaptive damping may shrink below it so that pure GN
        // behavior is recovered near the solution (rank-deficient normal
        // matrices push lambda back up through failed factorizations).
        if (lambda < 0.0 || !cfg.adapt_damping) lambda = floor;

        double grad_inf = 0.0;
        for (double gv : g) grad_inf = std::max(grad_inf, std::abs(gv));

        // Try a step; in adaptive mode retry with heavier damping until the
        // cost decreases.
        bool accepted = false;
        double step_norm = 0.0;
        double cost_new = 0.0;
        Vec x_new;
        CVec v_new;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Nd.a = N.a;
            for (std::size_t k = 0; k < n; ++k) Nd.at(k, k) += lambda;
            dx = g;
            if (!cholesky_solve_inplace(Nd, dx)) {
                if (!cfg.adapt_damping) {
                    res.v_hat = best_v;
                    res.iterations = iter - 1;
                    res.diverged_reason = "singular_normal";
                    return res;
                }
                lambda *= 10.0;
                continue;
            }
            x_new = x;
            Kops.axpy(1.0, dx.data(), x_new.data(), n);
            if (!all_finite(x_new)) {
                if (!cfg.adapt_damping) {
                    res.v_hat = best_v;
                    res.iterations = iter - 1;
                    res.diverged_reason = "nonfinite";
                    return res;
                }
                lambda *= 10.0;
                continue;
            }
            v_new = unpack_state(x_new);
            cost_new = wls_cost(set, v_new);
            step_norm = norm2(dx);
            if (!cfg.adapt_damping) {
                accepted = true;
                break;
            }
            if (std::isfinite(cost_new) && cost_new <= cost) {
                accepted = true;
                lambda = std::max(lambda / 10.0,
                                  1e-30 * trace / static_cast<double>(n));
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            res.v_hat = best_v;
            res.iterations = iter - 1;
            res.diverged_reason =
                std::isfinite(cost_new) ? "cost_growth" : "nonfinite";
            return res;
        }
        if (!std::isfinite(cost_new)) {
            res.v_hat = best_v;
            res.iterations = iter - 1;
            res.diverged_reason = "nonfinite";
            return res;
        }

        x = std::move(x_new);
        v = std::move(v_new);
        cost = cost_new;
        res.cost_trace.push_back(cost);
        if (cost < best_cost) {
            best_cost = cost;
            best_v = v;
        }

        if (cfg.adapt_damping || res.cost_trace.rbegin()[1] >= cost) {
            growth_streak = 0;
        } else if (++growth_streak >= cfg.cost_growth_limit) {
            res.v_hat = best_v;
            res.iterations = iter;
            res.diverged_reason = "cost_growth";
            return res;
        }

        if (norm2(x) > cfg.norm_cap) {
            res.v_hat = best_v;
            res.iterations = iter;
            res.diverged_reason = "norm_cap";
            return res;
        }
        if (step_norm <= cfg.step_tol && grad_inf <= cfg.grad_tol) {
            res.v_hat = best_v;
            res.iterations = iter;
            res.converged = true;
            return res;
        }
    }
    res.v_hat = best_v;
    res.iterations = cfg.max_iter;
    res.diverged_reason = "max_iterations";
    return res;
}

} // namespace dsse
