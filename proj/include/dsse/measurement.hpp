#pragma once

#include "dsse/feeder.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dsse {

// Every measurement is the real scalar h(v) = v*' D v + c' v + conj(c)' v
// with Hermitian D, so evaluation and Jacobian assembly share one code
// path across measurement kinds.

enum class MeasKind {
    v_re,
    v_im,
    i_re,
    i_im,
    vmag_sq,
    imag_sq,
    p_flow,
    q_flow,
    p_inj,
    q_inj,
};

struct MeasurementFn {
    MeasKind kind = MeasKind::v_re;
    // Upper-triangle entries of D (i <= j); diagonal entries carry zero
    // imaginary part.
    struct DEntry {
        std::size_t i, j;
        cplx v;
    };
    std::vector<DEntry> D;
    std::vector<std::pair<std::size_t, cplx>> c;
    double sigma = 0.0;  // std used for weighting (delta-rule adjusted)
    double weight = 1.0; // sigma^-2, or 1 when sigma == 0
    bool is_pseudo = false;
    // Magnitude channels are squared internally: the synthesized z is the
    // squared noisy magnitude and sigma follows the first-order delta
    // rule sigma' = 2 |z_mag| sigma_base.
    bool squared_mag = false;
    double sigma_base = 0.0;
    // State slot for v_re / v_im rows (used by the PMU-anchored start).
    std::size_t target_state = static_cast<std::size_t>(-1);
    std::string tag;
};

double evaluate(const MeasurementFn& fn, const CVec& v);

// Writes the 2K-entry row [d h/d Re(v); d h/d Im(v)] = [Re u; Im u] with
// u = 2 D v + 2 conj(c).  The buffer is zeroed first.
void jacobian_row(const MeasurementFn& fn, const CVec& v, double* row,
                  std::size_t K);

// Constructors.  Pairs are ordered (re, im) or (p, q).
std::pair<MeasurementFn, MeasurementFn> mk_voltage_phasor(
    const FeederModel& m, int bus, int phase, double sigma);
std::pair<MeasurementFn, MeasurementFn> mk_current_phasor(
    const FeederModel& m, int from, int to, int phase, double sigma);
MeasurementFn mk_current_mag_sq(const FeederModel& m, int from, int to,
                                int phase, double sigma);
MeasurementFn mk_vmag_sq(const FeederModel& m, int bus, int phase,
                         double sigma);
std::pair<MeasurementFn, MeasurementFn> mk_branch_power(
    const FeederModel& m, int from, int to, int phase, double sigma);
std::pair<MeasurementFn, MeasurementFn> mk_injection_pseudo(
    const FeederModel& m, const SparseC& ybus, int bus, int phase,
    double sigma);
// Net bus injection aggregated over the bus phase set (sum of the
// per-phase quadratic forms); the shipped fixtures forecast per bus.
std::pair<MeasurementFn, MeasurementFn> mk_bus_injection_pseudo(
    const FeederModel& m, const SparseC& ybus, int bus, double sigma);

struct MeasurementConfig {
    struct Pmu {
        std::vector<int> buses;
        double sigma = 1e-3;
    };
    struct Vmag {
        std::vector<int> buses;
        double sigma = 1e-3;
    };
    struct Imag {
        std::vector<std::pair<int, int>> branches;
        double sigma = 1e-2;
    };
    struct BranchPower {
        std::vector<std::pair<int, int>> branches;
        double sigma = 1e-2;
        bool include_q = false;
    };
    struct Pseudo {
        double sigma = 1e-1;
        bool enabled = false;
    };
    Pmu pmu;
    Vmag vmag;
    Imag imag;
    BranchPower branch_power;
    Pseudo pseudo;
};

MeasurementConfig parse_measurement_config_text(const std::string& text);
MeasurementConfig parse_measurement_config_file(const std::string& path);

struct MeasurementSet {
    std::size_t K = 0;
    std::vector<MeasurementFn> fns;
    Vec z; // measured values aligned with fns
    std::uint64_t fingerprint = 0;
};

// Fixed section order: PMU voltage (re, im per phase), voltage
// magnitudes, current magnitudes, branch powers, pseudo injections.
// This ordering defines the NN input layout.
MeasurementSet build_measurement_set(const FeederModel& m,
                                     const MeasurementConfig& cfg);

// Shipped-fixture builder: build_measurement_set plus count validation
// (24 PMU + 21 current magnitude + 58 pseudo = 103).
MeasurementSet build_ieee37_measurement_set(const FeederModel& m,
                                            const MeasurementConfig& cfg);

enum class NoiseMode { noiseless, gaussian };

// Fills z from the true state, optionally with per-channel Gaussian
// noise, applying the squared-magnitude delta rule to sigma/weight.
void synthesize_measurements(MeasurementSet& set, const CVec& v_true,
                             NoiseMode mode, std::uint64_t seed);

// z vector file (JSON), with fingerprint compatibility checks on load.
void save_measurement_values(const std::string& path,
                             const MeasurementSet& set);
void load_measurement_values(const std::string& path, MeasurementSet& set);

} // namespace dsse
