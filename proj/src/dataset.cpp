#include "dsse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dsse {

namespace {

std::vector<std::string> split_csv_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

double interp_series(const std::vector<std::pair<double, double>>& s,
                     double horizon, double t) {
    double tm = std::fmod(t, horizon);
    if (tm < 0.0) tm += horizon;
    // Wrapped segment between the last and (horizon-shifted) first point.
    if (tm < s.front().first || tm >= s.back().first) {
        const double t0 = s.back().first;
        const double t1 = s.front().first + horizon;
        const double tt = tm >= s.back().first ? tm : tm + horizon;
        const double f = (tt - t0) / (t1 - t0);
        return s.back().second + f * (s.front().second - s.back().second);
    }
    auto hi = std::upper_bound(
        s.begin(), s.end(), tm,
        [](double val, const auto& p) { return val < p.first; });
    const auto lo = hi - 1;
    const double f = (tm - lo->first) / (hi->first - lo->first);
    return lo->second + f * (hi->second - lo->second);
}

} // namespace

ProfileLibrary ProfileLibrary::parse_text(const std::string& text) {
    ProfileLibrary lib;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        split_csv_line(line) !=
            std::vector<std::string>{"t", "unit_class", "multiplier"})
        fail_input("profiles: expected header 't,unit_class,multiplier'");
    while (std::getline(in, line)) {
        const auto f = split_csv_line(line);
        if (f.empty()) continue;
        if (f.size() != 3) fail_input("profiles: malformed row '" + line + "'");
        double t, m;
        try {
            t = std::stod(f[0]);
            m = std::stod(f[2]);
        } catch (const std::exception&) {
            fail_input("profiles: non-numeric value in row '" + line + "'");
        }
        if (m < 0.0) fail_input("profiles: negative multiplier");
        if (f[1] == "load")
            lib.load_.emplace_back(t, m);
        else if (f[1] == "der")
            lib.der_.emplace_back(t, m);
        else
            fail_input("profiles: unknown unit_class '" + f[1] + "'");
    }
    if (lib.load_.size() < 2 || lib.der_.size() < 2)
        fail_input("profiles: need at least two points per unit class");
    std::sort(lib.load_.begin(), lib.load_.end());
    std::sort(lib.der_.begin(), lib.der_.end());
    const auto& s = lib.load_;
    lib.horizon_ = s.back().first + (s[1].first - s[0].first);
    return lib;
}

ProfileLibrary ProfileLibrary::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_input("profiles: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

double ProfileLibrary::multiplier(InjectionKind kind, double t) const {
    return interp_series(kind == InjectionKind::load ? load_ : der_, horizon_,
                         t);
}

Scenario sample_scenario(const FeederModel& m, const ProfileLibrary& lib,
                         int id, Rng& rng) {
    Scenario sc;
    sc.id = id;
    const double t = rng.uniform() * lib.horizon();
    sc.unit_s.reserve(m.injections.size());
    for (const InjectionUnit& u : m.injections) {
        const double jitter = 1.0 + 0.1 * (2.0 * rng.uniform() - 1.0);
        const double scale = lib.multiplier(u.kind, t) * jitter;
        const double sign = u.kind == InjectionKind::load ? -1.0 : 1.0;
        CVec s(u.rating.size());
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] = sign * scale * u.rating[i];
        sc.unit_s.push_back(std::move(s));
    }
    return sc;
}

Dataset build_dataset(const FeederModel& m, const MeasurementSet& proto,
                      const ProfileLibrary& lib, std::size_t count,
                      std::uint64_t seed, DatasetBuildStats* stats) {
    Dataset d;
    d.L = proto.fns.size();
    d.K2 = 2 * proto.K;
    d.fingerprint = proto.fingerprint;
    d.z.reserve(count * d.L);
    d.v.reserve(count * d.K2);

    PowerFlowSolver solver(m);
    MeasurementSet set = proto;
    DatasetBuildStats st;
    st.requested = count;
    std::uint64_t attempt = 0;
    while (st.kept < count) {
        Rng rng(mix_seed(seed, attempt));
        const Scenario sc =
            sample_scenario(m, lib, static_cast<int>(attempt), rng);
        ++attempt;
        CVec v_true;
        try {
            v_true = solver.solve(sc).v;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numeric) throw;
            ++st.skipped;
            if (st.skipped > 100 + 10 * count)
                fail_numeric("dataset: too many diverged power flows (" +
                             std::to_string(st.skipped) + ")");
            continue;
        }
        synthesize_measurements(set, v_true, NoiseMode::noiseless, 0);
        d.z.insert(d.z.end(), set.z.begin(), set.z.end());
        for (const cplx& vk : v_true) d.v.push_back(vk.real());
        for (const cplx& vk : v_true) d.v.push_back(vk.imag());
        ++st.kept;
    }
    d.noise_floor.resize(d.L);
    for (std::size_t l = 0; l < d.L; ++l) {
        const MeasurementFn& fn = proto.fns[l];
        if (!fn.squared_mag) {
            d.noise_floor[l] = fn.sigma;
            continue;
        }
        double mag = 0.0;
        for (std::size_t r = 0; r < st.kept; ++r)
            mag += std::sqrt(std::max(d.z[r * d.L + l], 0.0));
        mag /= static_cast<double>(st.kept);
        d.noise_floor[l] = 2.0 * std::max(mag, 1e-6) * fn.sigma_base;
    }
    if (stats) *stats = st;
    return d;
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
}

} // namespace

void save_dataset(const std::string& path, const Dataset& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_input("dataset: cannot write '" + path + "'");
    out.write("DSSE", 4);
    write_pod(out, std::uint32_t{1});
    write_pod(out, static_cast<std::uint32_t>(d.L));
    write_pod(out, static_cast<std::uint32_t>(d.K2));
    write_pod(out, static_cast<std::uint64_t>(d.count()));
    write_pod(out, d.fingerprint);
    Vec floor = d.noise_floor;
    floor.resize(d.L, 0.0);
    out.write(reinterpret_cast<const char*>(floor.data()),
              static_cast<std::streamsize>(floor.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(d.z.data()),
              static_cast<std::streamsize>(d.z.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(d.v.data()),
              static_cast<std::streamsize>(d.v.size() * sizeof(double)));
    if (!out) fail_input("dataset: short write to '" + path + "'");
}

Dataset load_dataset(const std::string& path,
                     std::uint64_t expect_fingerprint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_input("dataset: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DSSE", 4) != 0)
        fail_input("dataset: '" + path + "' is not a dataset file");
    std::uint32_t version = 0, L = 0, K2 = 0;
    std::uint64_t count = 0;
    Dataset d;
    read_pod(in, version);
    read_pod(in, L);
    read_pod(in, K2);
    read_pod(in, count);
    read_pod(in, d.fingerprint);
    if (version != 1)
        fail_input("dataset: unsupported version " + std::to_string(version));
    if (expect_fingerprint != 0 && d.fingerprint != expect_fingerprint)
        fail_input("dataset: fingerprint mismatch; the file was generated "
                   "for a different feeder/measurement layout");
    d.L = L;
    d.K2 = K2;
    d.noise_floor.resize(L);
    in.read(reinterpret_cast<char*>(d.noise_floor.data()),
            static_cast<std::streamsize>(L * sizeof(double)));
    d.z.resize(count * L);
    d.v.resize(count * K2);
    in.read(reinterpret_cast<char*>(d.z.data()),
            static_cast<std::streamsize>(d.z.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(d.v.data()),
            static_cast<std::streamsize>(d.v.size() * sizeof(double)));
    if (!in) fail_input("dataset: '" + path + "' is truncated");
    return d;
}

} // namespace dsse
