#pragma once

#include "dsse/feeder.hpp"

#include <optional>

namespace dsse {

// Complex power drawn or produced per injection unit terminal, aligned
// with FeederModel::injections.  Entries are net injections into the
// network: loads carry negative real parts, producing der units positive.
struct Scenario {
    int id = 0;
    std::vector<CVec> unit_s;
};

struct PowerFlowConfig {
    double tol = 1e-9;
    int max_iter = 200;
    double collapse_vmag = 0.5;
};

struct PowerFlowResult {
    CVec v;
    int iterations = 0;
    double residual = 0.0; // max |v - F(v)| at exit
};

// Fixed-point solver on the substation-reduced admittance system.  The
// admittance factorization is cached across solves, so reconfiguration
// requires a fresh solver.
class PowerFlowSolver {
public:
    explicit PowerFlowSolver(const FeederModel& m);

    // Throws Error(numeric) on iteration-limit exhaustion or voltage
    // collapse (any |v| below collapse_vmag).
    PowerFlowResult solve(const Scenario& sc, const PowerFlowConfig& cfg = {},
                          const std::optional<CVec>& v0 = {}) const;

    const SparseC& admittance() const { return ybus_; }

private:
    const FeederModel& model_;
    SparseC ybus_;
    std::vector<std::size_t> red_; // state index per reduced slot
    std::vector<std::size_t> sub_; // substation state indices
    CLu lu_;                       // factorized Y_RR
    CVec y_rs_vs_;                 // Y_RS * v_S, precomputed

    CLu factor_reduced();
    CVec injection_currents(const Scenario& sc, const CVec& v,
                            double collapse_vmag) const;
};

PowerFlowResult solve_power_flow(const FeederModel& m, const Scenario& sc,
                                 const PowerFlowConfig& cfg = {},
                                 const std::optional<CVec>& v0 = {});

// Oracle: max over non-substation phase nodes of
// |v ∘ conj(Y v) - scheduled injection| with delta terminals mapped to
// per-phase powers through the state.
double power_balance_residual(const FeederModel& m, const CVec& v,
                              const Scenario& sc);

// Per-phase scheduled complex injection implied by a scenario at state v.
CVec scheduled_injection(const FeederModel& m, const CVec& v,
                         const Scenario& sc);

} // namespace dsse
