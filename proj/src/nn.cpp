#include "dsse/nn.hpp"

#include "dsse/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace dsse {

using nlohmann::json;

namespace {

void standardize(const NnModel& m, const double* z, Vec& zhat) {
    zhat.resize(m.L);
    for (std::size_t i = 0; i < m.L; ++i)
        zhat[i] = (z[i] - m.in_mean[i]) / m.in_std[i];
}

// Forward pass with the intermediate activations exposed for backprop.
void forward_parts(const NnModel& m, const kernels::Ops& K, const Vec& zhat,
                   Vec& h, Vec& g) {
    h.resize(m.T);
    K.matvec(m.W.data(), m.T, m.L, zhat.data(), h.data());
    for (std::size_t t = 0; t < m.T; ++t) h[t] += m.b[t];
    K.logistic(h.data(), h.data(), m.T);
    g.resize(m.K_out);
    K.matvec(m.A.data(), m.K_out, m.T, h.data(), g.data());
    for (std::size_t k = 0; k < m.K_out; ++k)
        g[k] = m.out_mean[k] + m.out_std[k] * g[k];
}

// Degenerate (constant) columns take `zero_scale`: inputs use 1.0 so the
// standardized feature simply stays near zero, outputs use a tiny scale so
// the de-normalized prediction is pinned to the column mean instead of
// handing the network a unit-amplitude channel it never trained.
void mean_std(const Vec& rows, std::size_t width,
              const std::vector<std::size_t>& idx, Vec& mean, Vec& std,
              double zero_scale) {
    mean.assign(width, 0.0);
    std.assign(width, 0.0);
    for (std::size_t r : idx)
        for (std::size_t i = 0; i < width; ++i) mean[i] += rows[r * width + i];
    for (std::size_t i = 0; i < width; ++i)
        mean[i] /= static_cast<double>(idx.size());
    for (std::size_t r : idx)
        for (std::size_t i = 0; i < width; ++i) {
            const double d = rows[r * width + i] - mean[i];
            std[i] += d * d;
        }
    for (std::size_t i = 0; i < width; ++i) {
        std[i] = std::sqrt(std[i] / static_cast<double>(idx.size()));
        if (std[i] < 1e-12) std[i] = zero_scale;
    }
}

struct AdamState {
    Vec m, v;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

} // namespace

Vec nn_forward(const NnModel& m, const Vec& z) {
    if (z.size() != m.L) fail_input("nn: input width mismatch");
    const auto& K = kernels::active_ops();
    Vec zhat, h, g;
    standardize(m, z.data(), zhat);
    forward_parts(m, K, zhat, h, g);
    return g;
}

double hinge_sample_loss(const Vec& g, const double* v_target, double eps) {
    double sq = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double d = g[k] - v_target[k];
        sq += d * d;
    }
    return std::max(sq - eps * eps, 0.0);
}

double dataset_hinge(const NnModel& m, const Dataset& d, double eps) {
    if (d.L != m.L || d.K2 != m.K_out)
        fail_input("nn: dataset shape does not match the model");
    const auto& K = kernels::active_ops();
    Vec zhat, h, g;
    double acc = 0.0;
    for (std::size_t r = 0; r < d.count(); ++r) {
        standardize(m, d.z.data() + r * d.L, zhat);
        forward_parts(m, K, zhat, h, g);
        acc += hinge_sample_loss(g, d.v.data() + r * d.K2, eps);
    }
    return acc / static_cast<double>(d.count());
}

double hinge_batch_grad(const NnModel& m, const Dataset& d,
                        const std::size_t* rows, std::size_t n, double eps,
                        Vec& gW, Vec& gb, Vec& gA) {
    const auto& K = kernels::active_ops();
    gW.assign(m.W.size(), 0.0);
    gb.assign(m.b.size(), 0.0);
    gA.assign(m.A.size(), 0.0);
    Vec zhat, h, g, dgn(m.K_out), dh(m.T);
    const double eps2 = eps * eps;
    double loss = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t r = rows[s];
        const double* vt = d.v.data() + r * d.K2;
        standardize(m, d.z.data() + r * d.L, zhat);
        forward_parts(m, K, zhat, h, g);
        double sq = 0.0;
        for (std::size_t k = 0; k < m.K_out; ++k) {
            const double diff = g[k] - vt[k];
            sq += diff * diff;
        }
        if (!(sq >= 0.0) || !std::isfinite(sq))
            fail_numeric("nn: non-finite loss during training");
        loss += std::max(sq - eps2, 0.0);
        if (sq <= eps2) continue; // flat region of the hinge
        for (std::size_t k = 0; k < m.K_out; ++k)
            dgn[k] = 2.0 * (g[k] - vt[k]) * m.out_std[k];
        K.ger_acc(gA.data(), m.K_out, m.T, 1.0, dgn.data(), h.data());
        std::fill(dh.begin(), dh.end(), 0.0);
        K.matvec_t_acc(m.A.data(), m.K_out, m.T, dgn.data(), dh.data());
        for (std::size_t t = 0; t < m.T; ++t)
            dh[t] *= h[t] * (1.0 - h[t]);
        K.ger_acc(gW.data(), m.T, m.L, 1.0, dh.data(), zhat.data());
        K.axpy(1.0, dh.data(), gb.data(), m.T);
    }
    return loss;
}

NnModel train_network(const Dataset& data, const TrainConfig& cfg,
                      TrainReport* report) {
    if (data.count() == 0) fail_input("nn: empty training dataset");
    if (cfg.hidden == 0) fail_input("nn: hidden width must be positive");
    if (cfg.train_fraction <= 0.0 || cfg.train_fraction > 1.0)
        fail_input("nn: train fraction must lie in (0, 1]");
    const auto& K = kernels::active_ops();

    NnModel m;
    m.L = data.L;
    m.T = cfg.hidden;
    m.K_out = data.K2;
    m.fingerprint = data.fingerprint;

    if (data.count() < 10 * m.T)
        std::fprintf(stderr,
                     "warning: %zu training samples for %zu hidden units; "
                     "consider more data or a smaller network\n",
                     data.count(), m.T);

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.index(i)]);
    std::size_t n_train = static_cast<std::size_t>(
        std::round(cfg.train_fraction * static_cast<double>(order.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, order.size());
    std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> val(order.begin() + n_train, order.end());

    mean_std(data.z, data.L, train, m.in_mean, m.in_std, 1.0);
    mean_std(data.v, data.K2, train, m.out_mean, m.out_std, 1e-8);
    // Features whose scenario-to-scenario variation is smaller than their
    // sensor noise would otherwise be standardized into amplifiers: at
    // inference time the noise alone would swing them by many units and
    // drown the informative inputs.  Clamping the scale from below keeps
    // any noise excursion at roughly one unit.
    if (data.noise_floor.size() == data.L)
        for (std::size_t i = 0; i < data.L; ++i)
            m.in_std[i] = std::max(m.in_std[i], data.noise_floor[i]);

    const double rw = std::sqrt(6.0 / static_cast<double>(m.L + m.T));
    const double ra = std::sqrt(6.0 / static_cast<double>(m.T + m.K_out));
    m.W.resize(m.T * m.L);
    for (double& w : m.W) w = rw * (2.0 * rng.uniform() - 1.0);
    m.b.assign(m.T, 0.0);
    m.A.resize(m.K_out * m.T);
    for (double& a : m.A) a = ra * (2.0 * rng.uniform() - 1.0);

    AdamState sw(m.W.size()), sb(m.b.size()), sa(m.A.size());
    Vec gW, gb, gA;
    Vec zhat, h, g;

    auto eval_rows = [&](const std::vector<std::size_t>& rows) {
        double acc = 0.0;
        for (std::size_t r : rows) {
            standardize(m, data.z.data() + r * data.L, zhat);
            forward_parts(m, K, zhat, h, g);
            acc += hinge_sample_loss(g, data.v.data() + r * data.K2,
                                     cfg.epsilon);
        }
        return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
    };

    NnModel best = m;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stall = 0;
    TrainReport rep;
    rep.n_train = train.size();
    rep.n_val = val.size();

    const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
    double b1t = 1.0, b2t = 1.0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = train.size(); i > 1; --i)
            std::swap(train[i - 1], train[rng.index(i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train.size();
             start += cfg.batch) {
            const std::size_t stop =
                std::min(start + cfg.batch, train.size());
            const double inv_b = 1.0 / static_cast<double>(stop - start);
            epoch_loss += hinge_batch_grad(m, data, train.data() + start,
                                           stop - start, cfg.epsilon, gW, gb,
                                           gA);
            for (double& x : gW) x *= inv_b;
            for (double& x : gb) x *= inv_b;
            for (double& x : gA) x *= inv_b;
            b1t *= b1;
            b2t *= b2;
            K.adam_step(m.W.data(), sw.m.data(), sw.v.data(), gW.data(),
                        m.W.size(), cfg.lr, b1, b2, b1t, b2t, adam_eps);
            K.adam_step(m.b.data(), sb.m.data(), sb.v.data(), gb.data(),
                        m.b.size(), cfg.lr, b1, b2, b1t, b2t, adam_eps);
            K.adam_step(m.A.data(), sa.m.data(), sa.v.data(), gA.data(),
                        m.A.size(), cfg.lr, b1, b2, b1t, b2t, adam_eps);
        }
        epoch_loss /= static_cast<double>(train.size());
        const double val_loss = val.empty() ? epoch_loss : eval_rows(val);
        if (!std::isfinite(epoch_loss) || !std::isfinite(val_loss))
            fail_numeric("nn: non-finite loss during training");
        rep.train_curve.push_back(epoch_loss);
        rep.val_curve.push_back(val_loss);
        rep.epochs = epoch;
        if (val_loss < best_val) {
            best_val = val_loss;
            best = m;
            best_epoch = epoch;
            stall = 0;
        } else if (++stall >= cfg.patience) {
            rep.early_stopped = true;
            break;
        }
    }

    rep.best_epoch = best_epoch;
    rep.best_val = best_val;
    m = std::move(best);
    rep.final_train = eval_rows(train);
    if (report) *report = rep;
    return m;
}

namespace {

std::string fp_hex(std::uint64_t fp) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx",
                  static_cast<unsigned long long>(fp));
    return buf;
}

std::uint64_t fp_parse(const std::string& s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

Vec get_vec(const json& doc, const char* key, std::size_t want) {
    const Vec v = doc.at(key).get<Vec>();
    if (v.size() != want)
        fail_input(std::string("nnmodel: field '") + key +
                   "' has the wrong length");
    for (double x : v)
        if (!std::isfinite(x))
            fail_input(std::string("nnmodel: non-finite value in '") + key +
                       "'");
    return v;
}

} // namespace

void save_model(const std::string& path, const NnModel& m) {
    json doc;
    doc["schema"] = "nnmodel/1";
    doc["inputs"] = m.L;
    doc["hidden"] = m.T;
    doc["outputs"] = m.K_out;
    doc["fingerprint"] = fp_hex(m.fingerprint);
    doc["W"] = m.W;
    doc["b"] = m.b;
    doc["A"] = m.A;
    doc["in_mean"] = m.in_mean;
    doc["in_std"] = m.in_std;
    doc["out_mean"] = m.out_mean;
    doc["out_std"] = m.out_std;
    std::ofstream out(path);
    if (!out) fail_input("nnmodel: cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

NnModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_input("nnmodel: cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail_input(std::string("nnmodel: JSON parse failure: ") + e.what());
    }
    if (doc.value("schema", "") != "nnmodel/1")
        fail_input("nnmodel: missing or unsupported schema (want nnmodel/1)");
    NnModel m;
    try {
        m.L = doc.at("inputs").get<std::size_t>();
        m.T = doc.at("hidden").get<std::size_t>();
        m.K_out = doc.at("outputs").get<std::size_t>();
        m.fingerprint = fp_parse(doc.at("fingerprint").get<std::string>());
        m.W = get_vec(doc, "W", m.T * m.L);
        m.b = get_vec(doc, "b", m.T);
        m.A = get_vec(doc, "A", m.K_out * m.T);
        m.in_mean = get_vec(doc, "in_mean", m.L);
        m.in_std = get_vec(doc, "in_std", m.L);
        m.out_mean = get_vec(doc, "out_mean", m.K_out);
        m.out_std = get_vec(doc, "out_std", m.K_out);
    } catch (const json::exception& e) {
        fail_input(std::string("nnmodel: malformed document: ") + e.what());
    }
    return m;
}

} // namespace dsse
