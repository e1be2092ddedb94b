#include "dsse/feeder.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dsse {

using nlohmann::json;

namespace {

constexpr double kCondLimit = 1e12;

int phase_from_char(char c, const std::string& where) {
    switch (c) {
        case 'a': return 0;
        case 'b': return 1;
        case 'c': return 2;
        default: break;
    }
    fail_input("feeder: bad phase character '" + std::string(1, c) + "' in " +
               where);
}

std::vector<int> parse_phases(const std::string& s, const std::string& where) {
    if (s.empty()) fail_input("feeder: empty phase set in " + where);
    std::vector<int> out;
    for (char c : s) out.push_back(phase_from_char(c, where));
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] <= out[i - 1])
            fail_input("feeder: phases not ascending in " + where);
    return out;
}

cplx parse_cnum(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() ||
        !j[1].is_number())
        fail_input("feeder: expected [re, im] pair in " + where);
    return {j[0].get<double>(), j[1].get<double>()};
}

CMat parse_cmat(const json& j, std::size_t dim, const std::string& where) {
    if (!j.is_array() || j.size() != dim)
        fail_input("feeder: matrix in " + where + " is not " +
                   std::to_string(dim) + "x" + std::to_string(dim));
    CMat m(dim, dim);
    for (std::size_t r = 0; r < dim; ++r) {
        if (!j[r].is_array() || j[r].size() != dim)
            fail_input("feeder: matrix in " + where + " is not square");
        for (std::size_t c = 0; c < dim; ++c)
            m.at(r, c) = parse_cnum(j[r][c], where);
    }
    return m;
}

void check_connected(const FeederModel& m) {
    std::vector<char> seen(m.buses.size(), 0);
    std::vector<std::size_t> stack = {0};
    seen[0] = 1;
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        const int cur_id = m.buses[cur].id;
        for (const Branch& br : m.branches) {
            if (!br.closed) continue;
            int other = -1;
            if (br.from == cur_id) other = br.to;
            if (br.to == cur_id) other = br.from;
            if (other < 0) continue;
            const std::size_t oi = m.bus_index(other);
            if (!seen[oi]) {
                seen[oi] = 1;
                stack.push_back(oi);
            }
        }
    }
    for (std::size_t i = 0; i < m.buses.size(); ++i)
        if (!seen[i])
            fail_input("feeder: bus " + std::to_string(m.buses[i].id) +
                       " is disconnected from the substation under the "
                       "current switch states");
}

void validate(const FeederModel& m) {
    if (m.buses.empty()) fail_input("feeder: no buses");
    for (const Branch& br : m.branches) {
        const std::string where = "branch " + std::to_string(br.from) + "-" +
                                  std::to_string(br.to);
        if (m.bus_pos.find(br.from) == m.bus_pos.end())
            fail_input("feeder: " + where + " references unknown bus " +
                       std::to_string(br.from));
        if (m.bus_pos.find(br.to) == m.bus_pos.end())
            fail_input("feeder: " + where + " references unknown bus " +
                       std::to_string(br.to));
        const auto& fp = m.buses[m.bus_index(br.from)].phases;
        const auto& tp = m.buses[m.bus_index(br.to)].phases;
        for (int p : br.phases) {
            if (std::find(fp.begin(), fp.end(), p) == fp.end() ||
                std::find(tp.begin(), tp.end(), p) == tp.end())
                fail_input("feeder: " + where +
                           " uses a phase missing at an endpoint");
        }
        const std::size_t dim = br.phases.size();
        if (br.z.rows != dim || br.z.cols != dim)
            fail_input("feeder: " + where + " impedance shape mismatch");
        if (br.ysh.rows != dim || br.ysh.cols != dim)
            fail_input("feeder: " + where + " shunt shape mismatch");
        double cond = 0.0;
        try {
            cond = cond_1norm_small(br.z);
        } catch (const Error&) {
            cond = kCondLimit * 2;
        }
        if (cond > kCondLimit)
            fail_input("feeder: " + where + " impedance is singular "
                       "(condition above 1e12)");
    }
    for (const InjectionUnit& u : m.injections) {
        const std::string where = "injection at bus " + std::to_string(u.bus);
        if (m.bus_pos.find(u.bus) == m.bus_pos.end())
            fail_input("feeder: " + where + " references unknown bus");
        if (u.terminals.empty()) fail_input("feeder: " + where + " is empty");
        if (u.terminals.size() != u.rating.size())
            fail_input("feeder: " + where + " rating/terminal count mismatch");
        const auto& ph = m.buses[m.bus_index(u.bus)].phases;
        auto has_phase = [&](int p) {
            return std::find(ph.begin(), ph.end(), p) != ph.end();
        };
        for (const auto& t : u.terminals) {
            if (u.connection == Connection::delta) {
                if (!has_phase(t.first) || !has_phase(t.second) ||
                    t.first == t.second)
                    fail_input("feeder: " + where + " bad delta terminal");
            } else {
                if (!has_phase(t.first))
                    fail_input("feeder: " + where + " bad wye terminal");
            }
        }
    }
    const Bus& sub = m.buses[0];
    if (sub.id != m.substation_bus)
        fail_input("feeder: substation bus missing from bus list");
    if (m.substation_v.size() != sub.phases.size())
        fail_input("feeder: substation voltage count does not match its "
                   "phase set");
    check_connected(m);
}

void finalize(FeederModel& m) {
    std::sort(m.buses.begin(), m.buses.end(),
              [](const Bus& a, const Bus& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < m.buses.size(); ++i)
        if (m.buses[i].id == m.buses[i - 1].id)
            fail_input("feeder: duplicate bus id " +
                       std::to_string(m.buses[i].id));
    auto sub = std::find_if(m.buses.begin(), m.buses.end(), [&](const Bus& b) {
        return b.id == m.substation_bus;
    });
    if (sub == m.buses.end())
        fail_input("feeder: substation bus " +
                   std::to_string(m.substation_bus) + " not in bus list");
    std::rotate(m.buses.begin(), sub, sub + 1);

    m.bus_pos.clear();
    m.state_order.clear();
    m.bus_offset.assign(m.buses.size(), 0);
    m.K = 0;
    for (std::size_t i = 0; i < m.buses.size(); ++i) {
        m.bus_pos[m.buses[i].id] = i;
        m.bus_offset[i] = m.K;
        for (int p : m.buses[i].phases) m.state_order.emplace_back(m.buses[i].id, p);
        m.K += m.buses[i].phases.size();
    }
    validate(m);
}

} // namespace

std::size_t FeederModel::bus_index(int bus_id) const {
    auto it = bus_pos.find(bus_id);
    if (it == bus_pos.end())
        fail_input("feeder: unknown bus " + std::to_string(bus_id));
    return it->second;
}

std::size_t FeederModel::state_index(int bus_id, int phase) const {
    const std::size_t bi = bus_index(bus_id);
    const auto& ph = buses[bi].phases;
    for (std::size_t k = 0; k < ph.size(); ++k)
        if (ph[k] == phase) return bus_offset[bi] + k;
    fail_input("feeder: bus " + std::to_string(bus_id) + " has no phase " +
               std::to_string(phase));
}

std::size_t FeederModel::branch_index(int from, int to) const {
    for (std::size_t i = 0; i < branches.size(); ++i)
        if ((branches[i].from == from && branches[i].to == to) ||
            (branches[i].from == to && branches[i].to == from))
            return i;
    fail_input("feeder: no branch " + std::to_string(from) + "-" +
               std::to_string(to));
}

static bool cmat_eq(const CMat& a, const CMat& b) {
    return a.rows == b.rows && a.cols == b.cols && a.a == b.a;
}

bool operator==(const FeederModel& a, const FeederModel& b) {
    if (a.name != b.name || a.substation_bus != b.substation_bus ||
        a.substation_v != b.substation_v || a.buses.size() != b.buses.size() ||
        a.branches.size() != b.branches.size() ||
        a.injections.size() != b.injections.size())
        return false;
    for (std::size_t i = 0; i < a.buses.size(); ++i)
        if (a.buses[i].id != b.buses[i].id ||
            a.buses[i].phases != b.buses[i].phases)
            return false;
    for (std::size_t i = 0; i < a.branches.size(); ++i) {
        const Branch& x = a.branches[i];
        const Branch& y = b.branches[i];
        if (x.from != y.from || x.to != y.to || x.phases != y.phases ||
            x.switchable != y.switchable || x.closed != y.closed ||
            !cmat_eq(x.z, y.z) || !cmat_eq(x.ysh, y.ysh))
            return false;
    }
    for (std::size_t i = 0; i < a.injections.size(); ++i) {
        const InjectionUnit& x = a.injections[i];
        const InjectionUnit& y = b.injections[i];
        if (x.bus != y.bus || x.kind != y.kind ||
            x.connection != y.connection || x.terminals != y.terminals ||
            x.rating != y.rating)
            return false;
    }
    return true;
}

FeederModel parse_feeder_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail_input(std::string("feeder: JSON parse failure: ") + e.what());
    }
    if (!doc.is_object() || doc.value("schema", "") != "feeder/1")
        fail_input("feeder: missing or unsupported schema (want feeder/1)");

    FeederModel m;
    m.name = doc.value("name", "");
    try {
        const json& sub = doc.at("substation");
        m.substation_bus = sub.at("bus").get<int>();
        for (const json& v : sub.at("voltage"))
            m.substation_v.push_back(parse_cnum(v, "substation voltage"));

        for (const json& jb : doc.at("buses")) {
            Bus b;
            b.id = jb.at("id").get<int>();
            b.phases = parse_phases(jb.at("phases").get<std::string>(),
                                    "bus " + std::to_string(b.id));
            m.buses.push_back(std::move(b));
        }
        for (const json& jb : doc.at("branches")) {
            Branch br;
            br.from = jb.at("from").get<int>();
            br.to = jb.at("to").get<int>();
            const std::string where = "branch " + std::to_string(br.from) +
                                      "-" + std::to_string(br.to);
            br.phases = parse_phases(jb.at("phases").get<std::string>(), where);
            br.z = parse_cmat(jb.at("z"), br.phases.size(), where + " z");
            br.ysh = parse_cmat(jb.at("ysh"), br.phases.size(), where + " ysh");
            br.switchable = jb.value("switchable", false);
            br.closed = jb.value("closed", true);
            m.branches.push_back(std::move(br));
        }
        for (const json& ju : doc.value("injections", json::array())) {
            InjectionUnit u;
            u.bus = ju.at("bus").get<int>();
            const std::string where =
                "injection at bus " + std::to_string(u.bus);
            const std::string kind = ju.at("kind").get<std::string>();
            if (kind == "load")
                u.kind = InjectionKind::load;
            else if (kind == "der")
                u.kind = InjectionKind::der;
            else
                fail_input("feeder: " + where + " has unknown kind '" + kind +
                           "'");
            const std::string conn = ju.at("connection").get<std::string>();
            if (conn == "wye")
                u.connection = Connection::wye;
            else if (conn == "delta")
                u.connection = Connection::delta;
            else
                fail_input("feeder: " + where + " has unknown connection '" +
                           conn + "'");
            for (const json& jt : ju.at("terminals")) {
                const std::string t = jt.get<std::string>();
                if (u.connection == Connection::delta) {
                    if (t.size() != 2)
                        fail_input("feeder: " + where + " bad delta terminal '"
                                   + t + "'");
                    u.terminals.emplace_back(phase_from_char(t[0], where),
                                             phase_from_char(t[1], where));
                } else {
                    if (t.size() != 1)
                        fail_input("feeder: " + where + " bad wye terminal '" +
                                   t + "'");
                    u.terminals.emplace_back(phase_from_char(t[0], where), -1);
                }
            }
            for (const json& jr : ju.at("rating"))
                u.rating.push_back(parse_cnum(jr, where + " rating"));
            m.injections.push_back(std::move(u));
        }
    } catch (const json::exception& e) {
        fail_input(std::string("feeder: malformed document: ") + e.what());
    }

    finalize(m);
    return m;
}

FeederModel parse_feeder_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_input("feeder: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_feeder_text(ss.str());
}

FeederModel set_switch_states(const FeederModel& m,
                              const std::vector<SwitchOp>& ops) {
    FeederModel out = m;
    for (const SwitchOp& op : ops) {
        const std::size_t bi = out.branch_index(op.from, op.to);
        Branch& br = out.branches[bi];
        if (!br.switchable)
            fail_input("feeder: branch " + std::to_string(op.from) + "-" +
                       std::to_string(op.to) + " is not switchable");
        br.closed = op.closed;
    }
    check_connected(out);
    return out;
}

void SparseC::add(std::size_t i, std::size_t j, cplx v) {
    rows[i].emplace_back(j, v);
}

void SparseC::compress() {
    for (auto& row : rows) {
        std::sort(row.begin(), row.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::pair<std::size_t, cplx>> merged;
        for (const auto& e : row) {
            if (!merged.empty() && merged.back().first == e.first)
                merged.back().second += e.second;
            else
                merged.push_back(e);
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const auto& e) {
                                        return e.second == cplx(0.0, 0.0);
                                    }),
                     merged.end());
        row = std::move(merged);
    }
}

CVec SparseC::multiply(const CVec& x) const {
    CVec y(n, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& [j, v] : rows[i]) y[i] += v * x[j];
    return y;
}

SparseC assemble_bus_admittance(const FeederModel& m) {
    SparseC Y(m.K);
    for (const Branch& br : m.branches) {
        if (!br.closed) continue;
        const std::size_t dim = br.phases.size();
        CMat ys = invert_small(br.z);
        std::vector<std::size_t> fi(dim), ti(dim);
        for (std::size_t p = 0; p < dim; ++p) {
            fi[p] = m.state_index(br.from, br.phases[p]);
            ti[p] = m.state_index(br.to, br.phases[p]);
        }
        for (std::size_t p = 0; p < dim; ++p) {
            for (std::size_t q = 0; q < dim; ++q) {
                const cplx y = ys.at(p, q);
                const cplx half_sh = br.ysh.at(p, q) * 0.5;
                Y.add(fi[p], fi[q], y + half_sh);
                Y.add(ti[p], ti[q], y + half_sh);
                Y.add(fi[p], ti[q], -y);
                Y.add(ti[p], fi[q], -y);
            }
        }
    }
    Y.compress();
    return Y;
}

CVec flat_start(const FeederModel& m) {
    static const cplx rot[3] = {
        cplx(1.0, 0.0),
        cplx(-0.5, -0.86602540378443864676),
        cplx(-0.5, 0.86602540378443864676),
    };
    CVec v(m.K);
    for (std::size_t k = 0; k < m.K; ++k)
        v[k] = rot[m.state_order[k].second];
    return v;
}

namespace {

struct Fnv {
    std::uint64_t h = 1469598103934665603ull;
    void feed_bytes(const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    }
    void feed(std::uint64_t v) { feed_bytes(&v, sizeof v); }
    void feed(int v) { feed(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
    void feed(double v) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof v);
        __builtin_memcpy(&bits, &v, sizeof bits);
        feed(bits);
    }
    void feed(cplx v) {
        feed(v.real());
        feed(v.imag());
    }
    void feed(const std::string& s) {
        feed(static_cast<std::uint64_t>(s.size()));
        feed_bytes(s.data(), s.size());
    }
};

} // namespace

std::uint64_t feeder_fingerprint(const FeederModel& m) {
    Fnv f;
    f.feed(m.name);
    f.feed(m.substation_bus);
    for (cplx v : m.substation_v) f.feed(v);
    f.feed(static_cast<std::uint64_t>(m.buses.size()));
    for (const Bus& b : m.buses) {
        f.feed(b.id);
        for (int p : b.phases) f.feed(p);
    }
    f.feed(static_cast<std::uint64_t>(m.branches.size()));
    for (const Branch& br : m.branches) {
        f.feed(br.from);
        f.feed(br.to);
        for (int p : br.phases) f.feed(p);
        for (cplx z : br.z.a) f.feed(z);
        for (cplx y : br.ysh.a) f.feed(y);
        f.feed(static_cast<int>(br.switchable));
        // closed flag intentionally excluded
    }
    f.feed(static_cast<std::uint64_t>(m.injections.size()));
    for (const InjectionUnit& u : m.injections) {
        f.feed(u.bus);
        f.feed(static_cast<int>(u.kind));
        f.feed(static_cast<int>(u.connection));
        for (const auto& t : u.terminals) {
            f.feed(t.first);
            f.feed(t.second);
        }
        for (cplx r : u.rating) f.feed(r);
    }
    return f.h;
}

} // namespace dsse
