#include "dsse/power_flow.hpp"

#include <algorithm>
#include <cmath>

namespace dsse {

namespace {

// Split state indices into substation slots and the reduced remainder.
void partition(const FeederModel& m, std::vector<std::size_t>& red,
               std::vector<std::size_t>& sub) {
    const std::size_t nsub = m.buses[0].phases.size();
    for (std::size_t k = 0; k < m.K; ++k) {
        if (k < nsub)
            sub.push_back(k);
        else
            red.push_back(k);
    }
}

} // namespace

PowerFlowSolver::PowerFlowSolver(const FeederModel& m)
    : model_(m), ybus_(assemble_bus_admittance(m)), lu_(factor_reduced()) {
    // Y_RS v_S with v_S pinned at the substation references.
    CVec vs(model_.K, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < sub_.size(); ++i)
        vs[sub_[i]] = model_.substation_v[i];
    const CVec full = ybus_.multiply(vs);
    y_rs_vs_.resize(red_.size());
    for (std::size_t i = 0; i < red_.size(); ++i)
        y_rs_vs_[i] = full[red_[i]];
}

CLu PowerFlowSolver::factor_reduced() {
    partition(model_, red_, sub_);
    std::vector<std::size_t> pos(model_.K, static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < red_.size(); ++i) pos[red_[i]] = i;
    CMat yrr(red_.size(), red_.size());
    for (std::size_t i = 0; i < red_.size(); ++i)
        for (const auto& [j, v] : ybus_.rows[red_[i]])
            if (pos[j] != static_cast<std::size_t>(-1))
                yrr.at(i, pos[j]) = v;
    return CLu(std::move(yrr));
}

CVec PowerFlowSolver::injection_currents(const Scenario& sc, const CVec& v,
                                         double collapse_vmag) const {
    if (sc.unit_s.size() != model_.injections.size())
        fail_input("power flow: scenario has " +
                   std::to_string(sc.unit_s.size()) + " units, model has " +
                   std::to_string(model_.injections.size()));
    CVec i(model_.K, cplx(0.0, 0.0));
    for (std::size_t u = 0; u < model_.injections.size(); ++u) {
        const InjectionUnit& unit = model_.injections[u];
        if (sc.unit_s[u].size() != unit.terminals.size())
            fail_input("power flow: scenario terminal count mismatch at bus " +
                       std::to_string(unit.bus));
        for (std::size_t t = 0; t < unit.terminals.size(); ++t) {
            const cplx s = sc.unit_s[u][t];
            if (unit.connection == Connection::wye) {
                const std::size_t k =
                    model_.state_index(unit.bus, unit.terminals[t].first);
                if (std::abs(v[k]) < collapse_vmag)
                    fail_numeric("power flow: voltage collapse at bus " +
                                 std::to_string(unit.bus));
                i[k] += std::conj(s / v[k]);
            } else {
                const std::size_t ka =
                    model_.state_index(unit.bus, unit.terminals[t].first);
                const std::size_t kb =
                    model_.state_index(unit.bus, unit.terminals[t].second);
                const cplx vd = v[ka] - v[kb];
                if (std::abs(vd) < collapse_vmag)
                    fail_numeric("power flow: collapsed phase pair voltage "
                                 "at bus " + std::to_string(unit.bus));
                const cplx it = std::conj(s / vd);
                i[ka] += it;
                i[kb] -= it;
            }
        }
    }
    return i;
}

PowerFlowResult PowerFlowSolver::solve(const Scenario& sc,
                                       const PowerFlowConfig& cfg,
                                       const std::optional<CVec>& v0) const {
    CVec v = v0 ? *v0 : flat_start(model_);
    if (v.size() != model_.K)
        fail_input("power flow: initial state has wrong length");
    for (std::size_t i = 0; i < sub_.size(); ++i)
        v[sub_[i]] = model_.substation_v[i];

    PowerFlowResult out;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        const CVec inj = injection_currents(sc, v, 1e-6);
        CVec rhs(red_.size());
        for (std::size_t i = 0; i < red_.size(); ++i)
            rhs[i] = inj[red_[i]] - y_rs_vs_[i];
        lu_.solve(rhs);

        double delta = 0.0;
        for (std::size_t i = 0; i < red_.size(); ++i) {
            delta = std::max(delta, std::abs(rhs[i] - v[red_[i]]));
            v[red_[i]] = rhs[i];
        }
        for (std::size_t i = 0; i < red_.size(); ++i) {
            if (!std::isfinite(v[red_[i]].real()) ||
                !std::isfinite(v[red_[i]].imag()))
                fail_numeric("power flow: iterate became non-finite");
            if (std::abs(v[red_[i]]) < cfg.collapse_vmag)
                fail_numeric("power flow: voltage collapse (|v| < " +
                             std::to_string(cfg.collapse_vmag) + ")");
        }
        out.iterations = it;
        if (delta <= cfg.tol) {
            out.v = v;
            out.residual = delta;
            return out;
        }
    }
    fail_numeric("power flow: no convergence in " +
                 std::to_string(cfg.max_iter) + " iterations");
}

PowerFlowResult solve_power_flow(const FeederModel& m, const Scenario& sc,
                                 const PowerFlowConfig& cfg,
                                 const std::optional<CVec>& v0) {
    return PowerFlowSolver(m).solve(sc, cfg, v0);
}

CVec scheduled_injection(const FeederModel& m, const CVec& v,
                         const Scenario& sc) {
    CVec s(m.K, cplx(0.0, 0.0));
    for (std::size_t u = 0; u < m.injections.size(); ++u) {
        const InjectionUnit& unit = m.injections[u];
        for (std::size_t t = 0; t < unit.terminals.size(); ++t) {
            const cplx su = sc.unit_s[u][t];
            if (unit.connection == Connection::wye) {
                s[m.state_index(unit.bus, unit.terminals[t].first)] += su;
            } else {
                const std::size_t ka =
                    m.state_index(unit.bus, unit.terminals[t].first);
                const std::size_t kb =
                    m.state_index(unit.bus, unit.terminals[t].second);
                const cplx it = std::conj(su / (v[ka] - v[kb]));
                s[ka] += v[ka] * std::conj(it);
                s[kb] += v[kb] * std::conj(-it);
            }
        }
    }
    return s;
}

double power_balance_residual(const FeederModel& m, const CVec& v,
                              const Scenario& sc) {
    const SparseC y = assemble_bus_admittance(m);
    const CVec iv = y.multiply(v);
    const CVec sched = scheduled_injection(m, v, sc);
    const std::size_t nsub = m.buses[0].phases.size();
    double worst = 0.0;
    for (std::size_t k = nsub; k < m.K; ++k)
        worst = std::max(worst, std::abs(v[k] * std::conj(iv[k]) - sched[k]));
    return worst;
}

} // namespace dsse
