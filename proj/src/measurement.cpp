#include "dsse/measurement.hpp"

#include "dsse/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dsse {

using nlohmann::json;

namespace {

const char* phase_name(int p) {
    static const char* names[3] = {"a", "b", "c"};
    return names[p];
}

// Fold raw triplets into canonical upper-triangle entries.  Each input
// triplet (i, j, v) with i != j stands for v E_ij + conj(v) E_ji, so a
// logical off-diagonal entry must be supplied exactly once (in either
// orientation); repeated slots accumulate.
std::vector<MeasurementFn::DEntry> canonicalize(
    std::vector<MeasurementFn::DEntry> raw) {
    std::map<std::pair<std::size_t, std::size_t>, cplx> acc;
    for (const auto& e : raw) {
        if (e.i <= e.j)
            acc[{e.i, e.j}] += e.v;
        else
            acc[{e.j, e.i}] += std::conj(e.v);
    }
    std::vector<MeasurementFn::DEntry> out;
    for (const auto& [key, val] : acc) {
        cplx v = val;
        if (key.first == key.second) v = cplx(v.real(), 0.0);
        if (v == cplx(0.0, 0.0)) continue;
        out.push_back({key.first, key.second, v});
    }
    return out;
}

void set_sigma(MeasurementFn& fn, double sigma) {
    if (sigma < 0.0) fail_input("measurement: negative sigma");
    fn.sigma = sigma;
    fn.sigma_base = sigma;
    fn.weight = sigma > 0.0 ? 1.0 / (sigma * sigma) : 1.0;
}

// Coefficients g with i_branch(phase) = sum_k g_k v_k for the sending-end
// current: series admittance acting on the voltage difference plus half
// the line charging at the sending bus.
std::vector<std::pair<std::size_t, cplx>> current_coeffs(const FeederModel& m,
                                                         int from, int to,
                                                         int phase) {
    const Branch& br = m.branches[m.branch_index(from, to)];
    if (!br.closed)
        fail_input("measurement: branch " + std::to_string(from) + "-" +
                   std::to_string(to) + " is open");
    const int send = from;
    const int recv = (br.from == from) ? br.to : br.from;
    if ((br.from == from && br.to != to) || (br.to == from && br.from != to))
        fail_input("measurement: branch endpoints do not match");
    std::size_t lp = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < br.phases.size(); ++i)
        if (br.phases[i] == phase) lp = i;
    if (lp == static_cast<std::size_t>(-1))
        fail_input("measurement: phase " + std::string(phase_name(phase)) +
                   " not on branch " + std::to_string(from) + "-" +
                   std::to_string(to));
    const CMat ys = invert_small(br.z);
    std::vector<std::pair<std::size_t, cplx>> g;
    for (std::size_t q = 0; q < br.phases.size(); ++q) {
        g.emplace_back(m.state_index(send, br.phases[q]),
                       ys.at(lp, q) + 0.5 * br.ysh.at(lp, q));
        g.emplace_back(m.state_index(recv, br.phases[q]), -ys.at(lp, q));
    }
    return g;
}

// (p, q) pair for s = v_e * conj(sum_k g_k v_k), i.e. the Hermitian parts
// D_p = (conj(g) e^T + e g^T) / 2 and D_q = (conj(g) e^T - e g^T) / (2i).
std::pair<MeasurementFn, MeasurementFn> power_pair(
    std::size_t e, const std::vector<std::pair<std::size_t, cplx>>& g,
    double sigma, MeasKind pk, MeasKind qk) {
    const cplx half(0.5, 0.0);
    const cplx halfj(0.0, -0.5); // 1/(2i)
    std::vector<MeasurementFn::DEntry> dp;
    std::vector<MeasurementFn::DEntry> dq;
    for (const auto& [k, gv] : g) {
        if (k == e) {
            dp.push_back({e, e, cplx(gv.real(), 0.0)});
            dq.push_back({e, e, cplx(-gv.imag(), 0.0)});
        } else {
            dp.push_back({k, e, half * std::conj(gv)});
            dq.push_back({k, e, halfj * std::conj(gv)});
        }
    }
    MeasurementFn p;
    p.kind = pk;
    p.D = canonicalize(std::move(dp));
    set_sigma(p, sigma);
    MeasurementFn q;
    q.kind = qk;
    q.D = canonicalize(std::move(dq));
    set_sigma(q, sigma);
    return {std::move(p), std::move(q)};
}

std::vector<std::pair<std::size_t, cplx>> ybus_row(const SparseC& ybus,
                                                   std::size_t k) {
    std::vector<std::pair<std::size_t, cplx>> g;
    for (const auto& e : ybus.rows[k]) g.emplace_back(e.first, e.second);
    return g;
}

} // namespace

double evaluate(const MeasurementFn& fn, const CVec& v) {
    double acc = 0.0;
    for (const auto& e : fn.D) {
        if (e.i == e.j)
            acc += e.v.real() * std::norm(v[e.i]);
        else
            acc += 2.0 * std::real(std::conj(v[e.i]) * e.v * v[e.j]);
    }
    for (const auto& [k, c] : fn.c) acc += 2.0 * std::real(c * v[k]);
    return acc;
}

void jacobian_row(const MeasurementFn& fn, const CVec& v, double* row,
                  std::size_t K) {
    std::fill(row, row + 2 * K, 0.0);
    for (const auto& e : fn.D) {
        const cplx ui = 2.0 * e.v * v[e.j];
        row[e.i] += ui.real();
        row[K + e.i] += ui.imag();
        if (e.i != e.j) {
            const cplx uj = 2.0 * std::conj(e.v) * v[e.i];
            row[e.j] += uj.real();
            row[K + e.j] += uj.imag();
        }
    }
    for (const auto& [k, c] : fn.c) {
        const cplx u = 2.0 * std::conj(c);
        row[k] += u.real();
        row[K + k] += u.imag();
    }
}

std::pair<MeasurementFn, MeasurementFn> mk_voltage_phasor(const FeederModel& m,
                                                          int bus, int phase,
                                                          double sigma) {
    const std::size_t k = m.state_index(bus, phase);
    MeasurementFn re;
    re.kind = MeasKind::v_re;
    re.c.emplace_back(k, cplx(0.5, 0.0));
    re.target_state = k;
    re.tag = "pmu:" + std::to_string(bus) + ":" + phase_name(phase) + ":re";
    set_sigma(re, sigma);
    MeasurementFn im;
    im.kind = MeasKind::v_im;
    im.c.emplace_back(k, cplx(0.0, -0.5));
    im.target_state = k;
    im.tag = "pmu:" + std::to_string(bus) + ":" + phase_name(phase) + ":im";
    set_sigma(im, sigma);
    return {std::move(re), std::move(im)};
}

std::pair<MeasurementFn, MeasurementFn> mk_current_phasor(const FeederModel& m,
                                                          int from, int to,
                                                          int phase,
                                                          double sigma) {
    const auto g = current_coeffs(m, from, to, phase);
    MeasurementFn re;
    re.kind = MeasKind::i_re;
    MeasurementFn im;
    im.kind = MeasKind::i_im;
    for (const auto& [k, gv] : g) {
        re.c.emplace_back(k, 0.5 * gv);
        im.c.emplace_back(k, cplx(0.0, -0.5) * gv);
    }
    const std::string base = "iph:" + std::to_string(from) + "-" +
                             std::to_string(to) + ":" + phase_name(phase);
    re.tag = base + ":re";
    im.tag = base + ":im";
    set_sigma(re, sigma);
    set_sigma(im, sigma);
    return {std::move(re), std::move(im)};
}

MeasurementFn mk_current_mag_sq(const FeederModel& m, int from, int to,
                                int phase, double sigma) {
    const auto g = current_coeffs(m, from, to, phase);
    std::vector<MeasurementFn::DEntry> d;
    for (std::size_t a = 0; a < g.size(); ++a)
        for (std::size_t b = a; b < g.size(); ++b)
            d.push_back({g[a].first, g[b].first,
                         std::conj(g[a].second) * g[b].second});
    MeasurementFn fn;
    fn.kind = MeasKind::imag_sq;
    fn.D = canonicalize(std::move(d));
    fn.squared_mag = true;
    fn.tag = "imag:" + std::to_string(from) + "-" + std::to_string(to) + ":" +
             phase_name(phase);
    set_sigma(fn, sigma);
    return fn;
}

MeasurementFn mk_vmag_sq(const FeederModel& m, int bus, int phase,
                         double sigma) {
    const std::size_t k = m.state_index(bus, phase);
    MeasurementFn fn;
    fn.kind = MeasKind::vmag_sq;
    fn.D.push_back({k, k, cplx(1.0, 0.0)});
    fn.squared_mag = true;
    fn.tag = "vmag:" + std::to_string(bus) + ":" + phase_name(phase);
    set_sigma(fn, sigma);
    return fn;
}

std::pair<MeasurementFn, MeasurementFn> mk_branch_power(const FeederModel& m,
                                                        int from, int to,
                                                        int phase,
                                                        double sigma) {
    const auto g = current_coeffs(m, from, to, phase);
    const std::size_t e = m.state_index(from, phase);
    auto pair = power_pair(e, g, sigma, MeasKind::p_flow, MeasKind::q_flow);
    const std::string base = "flow:" + std::to_string(from) + "-" +
                             std::to_string(to) + ":" + phase_name(phase);
    pair.first.tag = base + ":p";
    pair.second.tag = base + ":q";
    return pair;
}

std::pair<MeasurementFn, MeasurementFn> mk_injection_pseudo(
    const FeederModel& m, const SparseC& ybus, int bus, int phase,
    double sigma) {
    const std::size_t k = m.state_index(bus, phase);
    auto pair =
        power_pair(k, ybus_row(ybus, k), sigma, MeasKind::p_inj,
                   MeasKind::q_inj);
    const std::string base =
        "inj:" + std::to_string(bus) + ":" + phase_name(phase);
    pair.first.tag = base + ":p";
    pair.second.tag = base + ":q";
    pair.first.is_pseudo = true;
    pair.second.is_pseudo = true;
    return pair;
}

std::pair<MeasurementFn, MeasurementFn> mk_bus_injection_pseudo(
    const FeederModel& m, const SparseC& ybus, int bus, double sigma) {
    const Bus& b = m.bus(bus);
    std::vector<MeasurementFn::DEntry> dp;
    std::vector<MeasurementFn::DEntry> dq;
    for (int phase : b.phases) {
        auto pair = mk_injection_pseudo(m, ybus, bus, phase, sigma);
        dp.insert(dp.end(), pair.first.D.begin(), pair.first.D.end());
        dq.insert(dq.end(), pair.second.D.begin(), pair.second.D.end());
    }
    MeasurementFn p;
    p.kind = MeasKind::p_inj;
    p.D = canonicalize(std::move(dp));
    p.is_pseudo = true;
    p.tag = "pseudo:" + std::to_string(bus) + ":p";
    set_sigma(p, sigma);
    MeasurementFn q;
    q.kind = MeasKind::q_inj;
    q.D = canonicalize(std::move(dq));
    q.is_pseudo = true;
    q.tag = "pseudo:" + std::to_string(bus) + ":q";
    set_sigma(q, sigma);
    return {std::move(p), std::move(q)};
}

namespace {

std::vector<std::pair<int, int>> parse_branch_list(const json& j,
                                                   const std::string& where) {
    std::vector<std::pair<int, int>> out;
    for (const json& b : j) {
        if (!b.is_array() || b.size() != 2)
            fail_input("measconfig: " + where + " entries must be [from, to]");
        out.emplace_back(b[0].get<int>(), b[1].get<int>());
    }
    return out;
}

double parse_sigma(const json& j, const std::string& where) {
    const double s = j.at("sigma").get<double>();
    if (s < 0.0) fail_input("measconfig: negative sigma in " + where);
    return s;
}

} // namespace

MeasurementConfig parse_measurement_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail_input(std::string("measconfig: JSON parse failure: ") + e.what());
    }
    if (!doc.is_object() || doc.value("schema", "") != "measconfig/1")
        fail_input("measconfig: missing or unsupported schema "
                   "(want measconfig/1)");
    MeasurementConfig cfg;
    try {
        if (doc.contains("pmu_voltage")) {
            const json& s = doc["pmu_voltage"];
            cfg.pmu.buses = s.at("buses").get<std::vector<int>>();
            cfg.pmu.sigma = parse_sigma(s, "pmu_voltage");
        }
        if (doc.contains("voltage_magnitude")) {
            const json& s = doc["voltage_magnitude"];
            cfg.vmag.buses = s.at("buses").get<std::vector<int>>();
            cfg.vmag.sigma = parse_sigma(s, "voltage_magnitude");
        }
        if (doc.contains("current_magnitude")) {
            const json& s = doc["current_magnitude"];
            cfg.imag.branches =
                parse_branch_list(s.at("branches"), "current_magnitude");
            cfg.imag.sigma = parse_sigma(s, "current_magnitude");
        }
        if (doc.contains("branch_power")) {
            const json& s = doc["branch_power"];
            cfg.branch_power.branches =
                parse_branch_list(s.at("branches"), "branch_power");
            cfg.branch_power.sigma = parse_sigma(s, "branch_power");
            cfg.branch_power.include_q =
                s.value("components", "p") == std::string("pq");
        }
        if (doc.contains("pseudo_injection")) {
            cfg.pseudo.enabled = true;
            cfg.pseudo.sigma = parse_sigma(doc["pseudo_injection"],
                                           "pseudo_injection");
        }
    } catch (const json::exception& e) {
        fail_input(std::string("measconfig: malformed document: ") + e.what());
    }
    return cfg;
}

MeasurementConfig parse_measurement_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_input("measconfig: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_measurement_config_text(ss.str());
}

MeasurementSet build_measurement_set(const FeederModel& m,
                                     const MeasurementConfig& cfg) {
    MeasurementSet set;
    set.K = m.K;
    for (int bus : cfg.pmu.buses) {
        for (int phase : m.bus(bus).phases) {
            auto pair = mk_voltage_phasor(m, bus, phase, cfg.pmu.sigma);
            set.fns.push_back(std::move(pair.first));
            set.fns.push_back(std::move(pair.second));
        }
    }
    for (int bus : cfg.vmag.buses)
        for (int phase : m.bus(bus).phases)
            set.fns.push_back(mk_vmag_sq(m, bus, phase, cfg.vmag.sigma));
    for (const auto& [from, to] : cfg.imag.branches) {
        const Branch& br = m.branches[m.branch_index(from, to)];
        for (int phase : br.phases)
            set.fns.push_back(
                mk_current_mag_sq(m, from, to, phase, cfg.imag.sigma));
    }
    for (const auto& [from, to] : cfg.branch_power.branches) {
        const Branch& br = m.branches[m.branch_index(from, to)];
        for (int phase : br.phases) {
            auto pair =
                mk_branch_power(m, from, to, phase, cfg.branch_power.sigma);
            set.fns.push_back(std::move(pair.first));
            if (cfg.branch_power.include_q)
                set.fns.push_back(std::move(pair.second));
        }
    }
    if (cfg.pseudo.enabled && !m.injections.empty()) {
        const SparseC ybus = assemble_bus_admittance(m);
        std::vector<int> buses;
        for (const InjectionUnit& u : m.injections)
            if (std::find(buses.begin(), buses.end(), u.bus) == buses.end())
                buses.push_back(u.bus);
        for (int bus : buses) {
            auto pair = mk_bus_injection_pseudo(m, ybus, bus,
                                                cfg.pseudo.sigma);
            set.fns.push_back(std::move(pair.first));
            set.fns.push_back(std::move(pair.second));
        }
    }
    set.z.assign(set.fns.size(), 0.0);

    std::uint64_t h = feeder_fingerprint(m);
    for (const MeasurementFn& fn : set.fns) {
        h = mix_seed(h, static_cast<std::uint64_t>(fn.kind) + 17);
        for (char c : fn.tag) h = mix_seed(h, static_cast<unsigned char>(c));
        std::uint64_t bits;
        __builtin_memcpy(&bits, &fn.sigma_base, sizeof bits);
        h = mix_seed(h, bits);
    }
    set.fingerprint = h;
    return set;
}

MeasurementSet build_ieee37_measurement_set(const FeederModel& m,
                                            const MeasurementConfig& cfg) {
    MeasurementSet set = build_measurement_set(m, cfg);
    std::size_t pmu = 0, imag = 0, pseudo = 0;
    for (const MeasurementFn& fn : set.fns) {
        if (fn.kind == MeasKind::v_re || fn.kind == MeasKind::v_im) ++pmu;
        if (fn.kind == MeasKind::imag_sq) ++imag;
        if (fn.is_pseudo) ++pseudo;
    }
    if (pmu != 24 || imag != 21 || pseudo != 58 || set.fns.size() != 103)
        fail_input("measurement: fixture counts mismatch (got " +
                   std::to_string(pmu) + " PMU, " + std::to_string(imag) +
                   " current magnitude, " + std::to_string(pseudo) +
                   " pseudo, " + std::to_string(set.fns.size()) +
                   " total; want 24/21/58/103)");
    return set;
}

void synthesize_measurements(MeasurementSet& set, const CVec& v_true,
                             NoiseMode mode, std::uint64_t seed) {
    if (v_true.size() != set.K)
        fail_input("measurement: state length mismatch in synthesis");
    for (std::size_t i = 0; i < set.fns.size(); ++i) {
        MeasurementFn& fn = set.fns[i];
        const double h = evaluate(fn, v_true);
        Rng rng(mix_seed(seed, i));
        if (fn.squared_mag) {
            const double mag = std::sqrt(std::max(h, 0.0));
            double zmag = mag;
            if (mode == NoiseMode::gaussian && fn.sigma_base > 0.0)
                zmag += fn.sigma_base * rng.normal();
            set.z[i] = zmag * zmag;
            if (fn.sigma_base > 0.0) {
                fn.sigma = 2.0 * std::max(std::abs(zmag), 1e-6) * fn.sigma_base;
                fn.weight = 1.0 / (fn.sigma * fn.sigma);
            }
        } else {
            double z = h;
            if (mode == NoiseMode::gaussian && fn.sigma_base > 0.0)
                z += fn.sigma_base * rng.normal();
            set.z[i] = z;
        }
    }
}

namespace {

std::string fp_hex(std::uint64_t fp) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx",
                  static_cast<unsigned long long>(fp));
    return buf;
}

} // namespace

void save_measurement_values(const std::string& path,
                             const MeasurementSet& set) {
    json doc;
    doc["schema"] = "measvec/1";
    doc["fingerprint"] = fp_hex(set.fingerprint);
    doc["z"] = set.z;
    std::ofstream out(path);
    if (!out) fail_input("measvec: cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

void load_measurement_values(const std::string& path, MeasurementSet& set) {
    std::ifstream in(path);
    if (!in) fail_input("measvec: cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail_input(std::string("measvec: JSON parse failure: ") + e.what());
    }
    if (doc.value("schema", "") != "measvec/1")
        fail_input("measvec: missing or unsupported schema (want measvec/1)");
    if (doc.value("fingerprint", "") != fp_hex(set.fingerprint))
        fail_input("measvec: values were produced for a different "
                   "feeder/measurement layout");
    const auto z = doc.at("z").get<Vec>();
    if (z.size() != set.fns.size())
        fail_input("measvec: expected " + std::to_string(set.fns.size()) +
                   " values, got " + std::to_string(z.size()));
    set.z = z;
    // Re-derive delta-rule weights for magnitude channels from the loaded
    // measured values.
    for (std::size_t i = 0; i < set.fns.size(); ++i) {
        MeasurementFn& fn = set.fns[i];
        if (fn.squared_mag && fn.sigma_base > 0.0) {
            const double zmag = std::sqrt(std::max(set.z[i], 0.0));
            fn.sigma = 2.0 * std::max(zmag, 1e-6) * fn.sigma_base;
            fn.weight = 1.0 / (fn.sigma * fn.sigma);
        }
    }
}

} // namespace dsse
