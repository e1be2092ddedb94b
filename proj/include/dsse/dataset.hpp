#pragma once

#include "dsse/measurement.hpp"
#include "dsse/power_flow.hpp"
#include "dsse/rng.hpp"

namespace dsse {

// Per-class injection multipliers over a wrapped horizon, linearly
// interpolated between the tabulated points.
class ProfileLibrary {
public:
    static ProfileLibrary parse_text(const std::string& text);
    static ProfileLibrary parse_file(const std::string& path);

    double multiplier(InjectionKind kind, double t) const;
    double horizon() const { return horizon_; }

private:
    std::vector<std::pair<double, double>> load_;
    std::vector<std::pair<double, double>> der_;
    double horizon_ = 24.0;
};

// Draws a time uniformly over the horizon and scales each unit's rating by
// its class multiplier and an independent uniform +-10% jitter.  Loads
// enter with negative real power (consumption), der units positive.
Scenario sample_scenario(const FeederModel& m, const ProfileLibrary& lib,
                         int id, Rng& rng);

struct Dataset {
    std::size_t L = 0;  // measurement entries per sample
    std::size_t K2 = 0; // packed state entries per sample (2K)
    Vec z;              // count x L, row-major
    Vec v;              // count x K2, [Re v; Im v] per row
    // Per-feature std of the evaluation-time sensor noise (empty when the
    // set is hand built).  Magnitude channels carry the delta-rule value at
    // the dataset's typical magnitude.  Training clamps its input scaling
    // with this so features that barely move across scenarios cannot
    // amplify measurement noise at inference time.
    Vec noise_floor;
    std::uint64_t fingerprint = 0;

    std::size_t count() const { return L == 0 ? 0 : z.size() / L; }
};

struct DatasetBuildStats {
    std::size_t requested = 0;
    std::size_t kept = 0;
    std::size_t skipped = 0; // scenarios whose power flow failed
};

// Solves one power flow per scenario and records the noiseless measurement
// vector alongside the packed true state.  Failed scenarios are skipped and
// replaced so the output always holds `count` rows.
Dataset build_dataset(const FeederModel& m, const MeasurementSet& proto,
                      const ProfileLibrary& lib, std::size_t count,
                      std::uint64_t seed, DatasetBuildStats* stats = nullptr);

void save_dataset(const std::string& path, const Dataset& d);
// expect_fingerprint == 0 skips the layout check.
Dataset load_dataset(const std::string& path,
                     std::uint64_t expect_fingerprint = 0);

} // namespace dsse
