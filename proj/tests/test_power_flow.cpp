#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsse/power_flow.hpp"

#include <cmath>
#include <complex>

using namespace dsse;

namespace {

FeederModel& fixture() {
    static FeederModel m =
        parse_feeder_file(DSSE_DATA_DIR "/ieee37_feeder.json");
    return m;
}

// Net injections at `scale` times each unit rating, signs applied by kind.
Scenario scaled_scenario(const FeederModel& m, double scale, int id = 0) {
    Scenario sc;
    sc.id = id;
    sc.unit_s.resize(m.injections.size());
    for (std::size_t u = 0; u < m.injections.size(); ++u) {
        const InjectionUnit& unit = m.injections[u];
        const double sign = unit.kind == InjectionKind::load ? -1.0 : 1.0;
        sc.unit_s[u].resize(unit.rating.size());
        for (std::size_t t = 0; t < unit.rating.size(); ++t)
            sc.unit_s[u][t] = sign * scale * unit.rating[t];
    }
    return sc;
}

} // namespace

TEST_CASE("nominal loading solves and satisfies the power balance oracle") {
    const FeederModel& m = fixture();
    const Scenario sc = scaled_scenario(m, 1.0);
    PowerFlowResult r = solve_power_flow(m, sc);

    REQUIRE(r.v.size() == m.K);
    CHECK(r.iterations > 0);
    CHECK(r.iterations < 200);
    CHECK(r.residual <= 1e-9);
    CHECK(power_balance_residual(m, r.v, sc) <= 1e-8);

    // substation phasors are pinned exactly
    for (int p = 0; p < 3; ++p)
        CHECK(r.v[m.state_index(m.substation_bus, p)] == m.substation_v[p]);

    // a loaded feeder sits below the reference but comfortably above collapse
    for (std::size_t s = 0; s < m.K; ++s) {
        CHECK(std::abs(r.v[s]) > 0.9);
        CHECK(std::abs(r.v[s]) < 1.02);
    }
}

TEST_CASE("per bus scheduled injection sums match the unit powers") {
    // Delta-connected units split their power across two phases; the split
    // depends on the voltages, but the per-bus sum over phases must equal
    // the sum of the terminal powers exactly.
    const FeederModel& m = fixture();
    const Scenario sc = scaled_scenario(m, 0.9);
    PowerFlowResult r = solve_power_flow(m, sc);
    CVec s_phase = scheduled_injection(m, r.v, sc);
    REQUIRE(s_phase.size() == m.K);

    for (std::size_t b = 0; b < m.buses.size(); ++b) {
        const Bus& bus = m.buses[b];
        if (bus.id == m.substation_bus) continue;
        cplx got{};
        for (std::size_t p = 0; p < bus.phases.size(); ++p)
            got += s_phase[m.bus_offset[b] + p];
        cplx want{};
        for (std::size_t u = 0; u < m.injections.size(); ++u)
            if (m.injections[u].bus == bus.id)
                for (const cplx& s : sc.unit_s[u]) want += s;
        CHECK(std::abs(got - want) <= 1e-10 * (1.0 + std::abs(want)));
    }
}

TEST_CASE("zero injections relax to the open circuit profile") {
    const FeederModel& m = fixture();
    const Scenario sc = scaled_scenario(m, 0.0);
    PowerFlowResult r = solve_power_flow(m, sc);
    CHECK(power_balance_residual(m, r.v, sc) <= 1e-9);
    for (std::size_t s = 0; s < m.K; ++s)
        CHECK(std::abs(r.v[s]) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("solver class reuses its factorization across scenarios") {
    const FeederModel& m = fixture();
    PowerFlowSolver solver(m);
    PowerFlowResult a = solver.solve(scaled_scenario(m, 0.4));
    PowerFlowResult b = solver.solve(scaled_scenario(m, 1.1));
    CHECK(power_balance_residual(m, a.v, scaled_scenario(m, 0.4)) <= 1e-8);
    CHECK(power_balance_residual(m, b.v, scaled_scenario(m, 1.1)) <= 1e-8);
    // heavier loading sags the voltages further
    double mag_a = 0.0, mag_b = 0.0;
    for (std::size_t s = 0; s < m.K; ++s) {
        mag_a += std::abs(a.v[s]);
        mag_b += std::abs(b.v[s]);
    }
    CHECK(mag_b < mag_a);

    // free function and solver agree bitwise (same iteration path)
    PowerFlowResult c = solve_power_flow(m, scaled_scenario(m, 0.4));
    CHECK(a.v == c.v);
}

TEST_CASE("warm starts converge in fewer sweeps") {
    const FeederModel& m = fixture();
    PowerFlowSolver solver(m);
    const Scenario sc = scaled_scenario(m, 1.0);
    PowerFlowResult cold = solver.solve(sc);
    PowerFlowResult warm = solver.solve(sc, {}, cold.v);
    CHECK(warm.iterations <= 2);
    CHECK(warm.iterations < cold.iterations);
    for (std::size_t s = 0; s < m.K; ++s)
        CHECK(std::abs(warm.v[s] - cold.v[s]) <= 1e-8);
}

TEST_CASE("repeated solves are bitwise deterministic") {
    const FeederModel& m = fixture();
    const Scenario sc = scaled_scenario(m, 0.8);
    PowerFlowResult a = solve_power_flow(m, sc);
    PowerFlowResult b = solve_power_flow(m, sc);
    REQUIRE(a.v.size() == b.v.size());
    for (std::size_t s = 0; s < m.K; ++s) CHECK(a.v[s] == b.v[s]);
    CHECK(a.iterations == b.iterations);
    CHECK(a.residual == b.residual);
}

TEST_CASE("reconfigured topology still solves") {
    const FeederModel& m = fixture();
    FeederModel moved =
        set_switch_states(m, {{727, 744, false}, {742, 744, true}});
    const Scenario sc = scaled_scenario(moved, 1.0);
    PowerFlowResult r = solve_power_flow(moved, sc);
    CHECK(power_balance_residual(moved, r.v, sc) <= 1e-8);
    // the solution genuinely differs from the base topology's
    PowerFlowResult base = solve_power_flow(m, scaled_scenario(m, 1.0));
    double diff = 0.0;
    for (std::size_t s = 0; s < m.K; ++s)
        diff = std::max(diff, std::abs(r.v[s] - base.v[s]));
    CHECK(diff > 1e-6);
}

TEST_CASE("absurd loading raises a numeric error") {
    const FeederModel& m = fixture();
    const Scenario sc = scaled_scenario(m, 400.0);
    CHECK_THROWS_AS(solve_power_flow(m, sc), Error);
    try {
        solve_power_flow(m, sc);
        FAIL("expected voltage collapse");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
}

TEST_CASE("tight iteration budget raises instead of returning junk") {
    const FeederModel& m = fixture();
    PowerFlowConfig cfg;
    cfg.max_iter = 1;
    cfg.tol = 1e-14;
    CHECK_THROWS_AS(solve_power_flow(m, scaled_scenario(m, 1.0), cfg), Error);
}
