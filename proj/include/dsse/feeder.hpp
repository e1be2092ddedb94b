#pragma once

#include "dsse/common.hpp"
#include "dsse/linalg.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dsse {

// Phase indices: a = 0, b = 1, c = 2.

struct Bus {
    int id = 0;
    std::vector<int> phases; // ascending subset of {0, 1, 2}
};

struct Branch {
    int from = 0;
    int to = 0;
    std::vector<int> phases; // ascending, subset of both endpoints
    CMat z;                  // series impedance, per-unit, |phases| square
    CMat ysh;                // total line charging; half stamped per end
    bool switchable = false;
    bool closed = true;
};

enum class InjectionKind { load, der };
enum class Connection { wye, delta };

struct InjectionUnit {
    int bus = 0;
    InjectionKind kind = InjectionKind::load;
    Connection connection = Connection::delta;
    // wye terminals reference one phase (second = -1); delta terminals
    // reference an ordered phase pair.
    std::vector<std::pair<int, int>> terminals;
    // base complex power per terminal (per-unit); positive values mean
    // consumption for loads and production for der units.
    CVec rating;
};

struct FeederModel {
    std::string name;
    std::vector<Bus> buses; // substation first, then ascending id
    std::vector<Branch> branches;
    std::vector<InjectionUnit> injections;
    int substation_bus = 0;
    CVec substation_v; // per substation phase, reference phasors

    // Derived: bus-major state packing over all (bus, phase) slots.
    std::size_t K = 0;
    std::vector<std::pair<int, int>> state_order; // index -> (bus id, phase)
    std::map<int, std::size_t> bus_pos;           // bus id -> buses index
    std::vector<std::size_t> bus_offset;          // buses index -> state base

    std::size_t bus_index(int bus_id) const;
    // State slot of (bus, phase); fails on unknown bus or absent phase.
    std::size_t state_index(int bus_id, int phase) const;
    const Bus& bus(int bus_id) const { return buses[bus_index(bus_id)]; }
    std::size_t branch_index(int from, int to) const; // fails when absent
};

bool operator==(const FeederModel& a, const FeederModel& b);

FeederModel parse_feeder_text(const std::string& text);
FeederModel parse_feeder_file(const std::string& path);

struct SwitchOp {
    int from = 0;
    int to = 0;
    bool closed = true;
};

// Pure: returns a copy with the requested switch states applied.  Fails
// on unknown branches, non-switchable branches, or when the resulting
// graph disconnects any bus from the substation.
FeederModel set_switch_states(const FeederModel& m,
                              const std::vector<SwitchOp>& ops);

// Sparse complex matrix stored as per-row sorted column/value pairs.
struct SparseC {
    std::size_t n = 0;
    std::vector<std::vector<std::pair<std::size_t, cplx>>> rows;

    explicit SparseC(std::size_t dim = 0) : n(dim), rows(dim) {}
    void add(std::size_t i, std::size_t j, cplx v);
    void compress(); // sort columns, merge duplicates, drop exact zeros
    CVec multiply(const CVec& x) const;
};

// Bus admittance over the current switch states (closed branches only).
SparseC assemble_bus_admittance(const FeederModel& m);

// Flat profile: unit magnitude with the per-phase reference rotation
// (0, -120, +120 degrees for a, b, c).
CVec flat_start(const FeederModel& m);

// Structural fingerprint: buses, state order, branch endpoints and
// impedances, injection units, substation references.  Per-branch closed
// flags are excluded so reconfigured topologies keep the fingerprint and
// models trained before a switching action remain loadable.
std::uint64_t feeder_fingerprint(const FeederModel& m);

} // namespace dsse
