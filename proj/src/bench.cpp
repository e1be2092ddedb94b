#include "dsse/bench.hpp"

#include "dsse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dsse {

namespace {

CVec initial_state(const std::string& method, const FeederModel& m,
                   const MeasurementSet& set, const NnModel* nn) {
    if (method == "flat") return flat_start(m);
    if (method == "pmu") return pmu_anchored_start(m, set);
    if (method == "nn") {
        if (!nn) fail_input("bench: method 'nn' requires a trained model");
        if (nn->fingerprint != set.fingerprint)
            fail_input("bench: model fingerprint does not match the "
                       "feeder/measurement layout");
        return unpack_state(nn_forward(*nn, set.z));
    }
    fail_input("bench: unknown method '" + method + "'");
}

} // namespace

BenchResult run_bench(const FeederModel& m, const MeasurementSet& proto,
                      const ProfileLibrary& lib, const NnModel* nn,
                      const BenchConfig& cfg) {
    if (cfg.methods.empty()) fail_input("bench: no methods requested");
    BenchResult res;
    res.methods.resize(cfg.methods.size());
    for (std::size_t j = 0; j < cfg.methods.size(); ++j)
        res.methods[j].name = cfg.methods[j];

    PowerFlowSolver solver(m);
    MeasurementSet set = proto;
    const EstimatorConfig& est = cfg.est;

    std::uint64_t attempt = 0;
    for (std::size_t run = 0; run < cfg.runs; ++attempt) {
        const std::uint64_t run_seed = mix_seed(cfg.seed, attempt);
        Rng rng(run_seed);
        const Scenario sc =
            sample_scenario(m, lib, static_cast<int>(attempt), rng);
        CVec v_true;
        try {
            v_true = solver.solve(sc).v;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numeric) throw;
            ++res.pf_skipped;
            if (res.pf_skipped > 100 + 10 * cfg.runs)
                fail_numeric("bench: too many diverged power flows");
            continue;
        }
        ++run;
        synthesize_measurements(set, v_true, NoiseMode::gaussian,
                                mix_seed(run_seed, 2));
        for (std::size_t j = 0; j < cfg.methods.size(); ++j) {
            MethodStats& st = res.methods[j];
            const CVec v0 = initial_state(st.name, m, set, nn);
            const double init_dist = std::sqrt(nu_index(v0, v_true));
            st.mean_init_dist += init_dist;
            if (st.name == "nn") res.nn_init_dist.push_back(init_dist);
            ++st.runs;
            const EstimateResult r = estimate(set, v0, est);
            if (!r.converged && r.diverged_reason != "max_iterations") {
                ++st.diverged;
                continue;
            }
            if (r.converged)
                ++st.converged;
            else
                ++st.capped;
            st.mean_nu += nu_index(r.v_hat, v_true);
            st.mean_mu += mu_index(set, r.v_hat);
            st.mean_iterations += r.iterations;
        }
    }
    for (MethodStats& st : res.methods) {
        if (st.runs > 0)
            st.mean_init_dist /= static_cast<double>(st.runs);
        const std::size_t usable = st.converged + st.capped;
        if (usable > 0) {
            st.mean_nu /= static_cast<double>(usable);
            st.mean_mu /= static_cast<double>(usable);
            st.mean_iterations /= static_cast<double>(usable);
        }
    }
    return res;
}

void write_histogram_csv(const std::string& path, const Vec& samples,
                        std::size_t bins) {
    if (bins == 0) fail_input("histogram: need at least one bin");
    std::ofstream out(path);
    if (!out) fail_input("histogram: cannot write '" + path + "'");
    double hi = 0.0;
    for (double s : samples) hi = std::max(hi, s);
    if (hi <= 0.0) hi = 1.0;
    std::vector<std::size_t> count(bins, 0);
    for (double s : samples) {
        auto b = static_cast<std::size_t>(
            std::floor(s / hi * static_cast<double>(bins)));
        if (b >= bins) b = bins - 1;
        ++count[b];
    }
    out << "bin_lo,bin_hi,count\n";
    char buf[96];
    for (std::size_t b = 0; b < bins; ++b) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n",
                      hi * static_cast<double>(b) / static_cast<double>(bins),
                      hi * static_cast<double>(b + 1) /
                          static_cast<double>(bins),
                      count[b]);
        out << buf;
    }
}

std::vector<EpsSweepRow> eps_sweep(const FeederModel& m,
                                   const MeasurementSet& proto,
                                   const ProfileLibrary& lib,
                                   const Dataset& data,
                                   const TrainConfig& base,
                                   const std::vector<double>& epsilons,
                                   const BenchConfig& bench) {
    if (epsilons.empty()) fail_input("eps_sweep: empty epsilon list");
    BenchConfig bc = bench;
    bc.methods = {"nn"};
    std::vector<EpsSweepRow> rows;
    for (double eps : epsilons) {
        if (eps < 0.0) fail_input("eps_sweep: negative epsilon");
        TrainConfig tc = base;
        tc.epsilon = eps;
        TrainReport rep;
        const NnModel model = train_network(data, tc, &rep);
        EpsSweepRow row;
        row.epsilon = eps;
        row.train_loss = rep.final_train;
        row.best_val = rep.best_val;
        row.nn = run_bench(m, proto, lib, &model, bc).methods.front();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SizeSweepRow> size_sweep(const Dataset& data,
                                     const TrainConfig& base,
                                     const std::vector<std::size_t>& sizes) {
    if (sizes.empty()) fail_input("size_sweep: empty size list");
    std::vector<SizeSweepRow> rows;
    for (std::size_t t : sizes) {
        TrainConfig tc = base;
        tc.hidden = t;
        TrainReport rep;
        train_network(data, tc, &rep);
        SizeSweepRow row;
        row.hidden = t;
        row.train_loss = rep.final_train;
        row.interpolates = rep.final_train == 0.0;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SwitchOp> reconfig_scenario(const std::string& id) {
    if (id == "A")
        return {{727, 744, false}, {742, 744, true}};
    if (id == "B")
        return {{703, 730, false}, {703, 741, true}};
    if (id == "C")
        return {{710, 735, false}, {735, 737, true}};
    fail_input("reconfig: unknown scenario '" + id + "' (want A, B, or C)");
}

} // namespace dsse
