#pragma once

#include "dsse/measurement.hpp"

#include <string>

namespace dsse {

struct EstimatorConfig {
    int max_iter = 50;
    double step_tol = 1e-8;    // on the 2-norm of the state update
    double grad_tol = 1e-6;    // on the inf-norm of H^T W r
    bool adapt_damping = true; // false: keep lambda pinned at the floor
    double damping_floor_scale = 1e-10; // floor = scale * tr(H^T W H) / 2K
    int cost_growth_limit = 5;          // consecutive cost increases allowed
    double norm_cap = 1e3;              // declare divergence past this radius
};

struct EstimateResult {
    CVec v_hat;
    int iterations = 0;
    bool converged = false;
    std::string diverged_reason; // empty when converged
    Vec cost_trace;              // weighted cost after each accepted step
};

// Real state packing used throughout: x = [Re v; Im v], length 2K.
Vec pack_state(const CVec& v);
CVec unpack_state(const Vec& x);

double wls_cost(const MeasurementSet& set, const CVec& v);

// Squared-error metrics against a reference state.
double nu_index(const CVec& v_hat, const CVec& v_true);         // ||v-v*||^2
double mu_index(const MeasurementSet& set, const CVec& v_hat);  // sum (z-h)^2

// Flat start with PMU phasor readings substituted where available.
CVec pmu_anchored_start(const FeederModel& m, const MeasurementSet& set);

EstimateResult estimate(const MeasurementSet& set, const CVec& v0,
                        const EstimatorConfig& cfg = {});

} // namespace dsse
