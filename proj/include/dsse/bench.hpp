#pragma once

#include "dsse/estimator.hpp"
#include "dsse/nn.hpp"

namespace dsse {

struct BenchConfig {
    std::size_t runs = 100;
    std::uint64_t seed = 1;
    EstimatorConfig est; // per-run solver settings (damping mode, tolerances)
    std::vector<std::string> methods = {"nn", "flat", "pmu"};
};

// A run is "diverged" only when the solver tripped a failure detector
// (cost growth, norm cap, non-finite values, singular normal equations).
// Runs that merely exhaust the iteration budget are "capped": they still
// return a usable estimate and enter the quality means alongside the
// converged runs.
struct MethodStats {
    std::string name;
    std::size_t runs = 0;
    std::size_t converged = 0;
    std::size_t capped = 0;
    std::size_t diverged = 0;
    double mean_nu = 0.0; // over converged + capped runs
    double mean_mu = 0.0; // over converged + capped runs
    double mean_iterations = 0.0;
    double mean_init_dist = 0.0; // ||v0 - v_true||_2 over all runs
};

struct BenchResult {
    std::vector<MethodStats> methods;
    Vec nn_init_dist;            // per-run warm-start distance
    std::size_t pf_skipped = 0;  // scenarios replaced after PF failure
};

// Monte-Carlo sweep: per run draws a scenario, solves the ground-truth
// power flow, synthesizes one noisy measurement vector, and estimates from
// each requested initializer on that shared vector.
BenchResult run_bench(const FeederModel& m, const MeasurementSet& proto,
                      const ProfileLibrary& lib, const NnModel* nn,
                      const BenchConfig& cfg);

// Equal-width histogram over [0, max(samples)], written as
// "bin_lo,bin_hi,count" rows.
void write_histogram_csv(const std::string& path, const Vec& samples,
                        std::size_t bins = 50);

struct EpsSweepRow {
    double epsilon = 0.0;
    double train_loss = 0.0; // hinge on the train split after restore
    double best_val = 0.0;
    MethodStats nn;
};

// Retrains at each epsilon (same seed/data) and benchmarks the warm start
// with identical run seeds so rows differ only through the trained model.
std::vector<EpsSweepRow> eps_sweep(const FeederModel& m,
                                   const MeasurementSet& proto,
                                   const ProfileLibrary& lib,
                                   const Dataset& data,
                                   const TrainConfig& base,
                                   const std::vector<double>& epsilons,
                                   const BenchConfig& bench);

struct SizeSweepRow {
    std::size_t hidden = 0;
    double train_loss = 0.0;
    bool interpolates = false; // hinge exactly zero on the train split
};

std::vector<SizeSweepRow> size_sweep(const Dataset& data,
                                     const TrainConfig& base,
                                     const std::vector<std::size_t>& sizes);

// Named switching scenarios for the reconfiguration study.  Unknown names
// raise an input error.
std::vector<SwitchOp> reconfig_scenario(const std::string& id);

} // namespace dsse
