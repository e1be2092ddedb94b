#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsse/nn.hpp"
#include "dsse/rng.hpp"

#include <cmath>
#include <cstdio>

using namespace dsse;

namespace {

NnModel random_model(std::size_t L, std::size_t T, std::size_t K_out,
                     std::uint64_t seed) {
    NnModel m;
    m.L = L;
    m.T = T;
    m.K_out = K_out;
    m.fingerprint = 42;
    Rng rng(seed);
    m.W.resize(T * L);
    for (double& x : m.W) x = rng.uniform(-0.7, 0.7);
    m.b.resize(T);
    for (double& x : m.b) x = rng.uniform(-0.3, 0.3);
    m.A.resize(K_out * T);
    for (double& x : m.A) x = rng.uniform(-0.7, 0.7);
    m.in_mean.resize(L);
    for (double& x : m.in_mean) x = rng.uniform(-0.2, 0.2);
    m.in_std.resize(L);
    for (double& x : m.in_std) x = rng.uniform(0.5, 2.0);
    m.out_mean.resize(K_out);
    for (double& x : m.out_mean) x = rng.uniform(-0.2, 0.2);
    m.out_std.resize(K_out);
    for (double& x : m.out_std) x = rng.uniform(0.5, 2.0);
    return m;
}

// plain double-loop reference with no kernel calls
Vec naive_forward(const NnModel& m, const Vec& z) {
    Vec h(m.T);
    for (std::size_t t = 0; t < m.T; ++t) {
        double acc = m.b[t];
        for (std::size_t i = 0; i < m.L; ++i)
            acc += m.W[t * m.L + i] * (z[i] - m.in_mean[i]) / m.in_std[i];
        h[t] = 1.0 / (1.0 + std::exp(-acc));
    }
    Vec g(m.K_out);
    for (std::size_t k = 0; k < m.K_out; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t < m.T; ++t)
            acc += m.A[k * m.T + t] * h[t];
        g[k] = m.out_mean[k] + m.out_std[k] * acc;
    }
    return g;
}

// nonlinear but smooth target mapping for the trainers
Dataset synth(std::size_t n, std::size_t L, std::size_t K2,
              std::uint64_t seed) {
    Dataset d;
    d.L = L;
    d.K2 = K2;
    d.fingerprint = 42;
    Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        Vec z(L);
        for (double& x : z) x = rng.uniform(-1.0, 1.0);
        for (double x : z) d.z.push_back(x);
        for (std::size_t k = 0; k < K2; ++k)
            d.v.push_back(0.4 * std::sin(2.0 * z[k % L]) +
                          0.1 * z[(k + 1) % L]);
    }
    return d;
}

} // namespace

TEST_CASE("forward pass matches direct summation") {
    Rng rng(61);
    for (int trial = 0; trial < 40; ++trial) {
        NnModel m = random_model(1 + rng.index(12), 1 + rng.index(20),
                                 1 + rng.index(9), 1000 + trial);
        Vec z(m.L);
        for (double& x : z) x = rng.uniform(-2.0, 2.0);
        const Vec got = nn_forward(m, z);
        const Vec want = naive_forward(m, z);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k)
            CHECK(std::abs(got[k] - want[k]) <=
                  1e-12 * (1.0 + std::abs(want[k])));
    }
    NnModel m = random_model(4, 4, 2, 9);
    CHECK_THROWS_AS(nn_forward(m, Vec(3, 0.0)), Error);
}

TEST_CASE("hinge loss has a flat ball and a quadratic shoulder") {
    Vec g = {1.0, 2.0};
    const double v[2] = {1.3, 1.6}; // squared distance 0.25
    CHECK(hinge_sample_loss(g, v, 0.0) == doctest::Approx(0.25));
    CHECK(hinge_sample_loss(g, v, 0.3) == doctest::Approx(0.25 - 0.09));
    CHECK(hinge_sample_loss(g, v, 0.5) == 0.0); // boundary is inside
    CHECK(hinge_sample_loss(g, v, 2.0) == 0.0);
    const double same[2] = {1.0, 2.0};
    CHECK(hinge_sample_loss(g, same, 0.0) == 0.0);
}

TEST_CASE("dataset hinge is non-increasing in epsilon for a fixed model") {
    Dataset d = synth(64, 6, 4, 71);
    NnModel m = random_model(6, 10, 4, 72);
    double prev = dataset_hinge(m, d, 0.0);
    CHECK(prev > 0.0);
    for (double eps : {0.05, 0.1, 0.3, 0.6, 1.0, 3.0}) {
        const double cur = dataset_hinge(m, d, eps);
        CHECK(cur <= prev);
        prev = cur;
    }
    CHECK(prev == 0.0); // a large enough ball swallows every sample
}

TEST_CASE("batch gradients agree with central finite differences") {
    // 100 random instances spread over parameters of all three tensors
    Dataset d = synth(16, 10, 6, 81);
    std::vector<std::size_t> rows(d.count());
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
    Vec gW, gb, gA;
    Rng rng(82);
    const double fd_h = 1e-6;
    int instances = 0;
    for (int trial = 0; trial < 10; ++trial) {
        NnModel m = random_model(10, 8, 6, 5000 + trial);
        const double eps = trial % 2 == 0 ? 0.0 : 0.35;
        const double base = hinge_batch_grad(m, d, rows.data(), rows.size(),
                                             eps, gW, gb, gA);
        CHECK(base >= 0.0);
        Vec an_W = gW, an_b = gb, an_A = gA;
        Vec dummyW, dummyb, dummyA;
        auto loss_at = [&](NnModel& probe) {
            return hinge_batch_grad(probe, d, rows.data(), rows.size(), eps,
                                    dummyW, dummyb, dummyA);
        };
        for (int probe = 0; probe < 10; ++probe) {
            const int tensor = static_cast<int>(rng.index(3));
            Vec& params = tensor == 0 ? m.W : tensor == 1 ? m.b : m.A;
            const Vec& an = tensor == 0 ? an_W : tensor == 1 ? an_b : an_A;
            const std::size_t i = rng.index(params.size());
            const double keep = params[i];
            params[i] = keep + fd_h;
            const double up = loss_at(m);
            params[i] = keep - fd_h;
            const double dn = loss_at(m);
            params[i] = keep;
            const double fd = (up - dn) / (2.0 * fd_h);
            CHECK(std::abs(fd - an[i]) <= 1e-5 * (1.0 + std::abs(an[i])));
            ++instances;
        }
    }
    CHECK(instances == 100);
}

TEST_CASE("a swallowing epsilon yields exactly zero loss and gradients") {
    Dataset d = synth(32, 6, 4, 91);
    NnModel m = random_model(6, 8, 4, 92);
    Vec gW, gb, gA;
    std::vector<std::size_t> rows(d.count());
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
    const double loss =
        hinge_batch_grad(m, d, rows.data(), rows.size(), 100.0, gW, gb, gA);
    CHECK(loss == 0.0);
    for (double x : gW) CHECK(x == 0.0);
    for (double x : gb) CHECK(x == 0.0);
    for (double x : gA) CHECK(x == 0.0);
}

TEST_CASE("the trainer interpolates a small sample set at epsilon zero") {
    Dataset d = synth(10, 8, 6, 3);
    TrainConfig cfg;
    cfg.hidden = 64;
    cfg.epsilon = 0.0;
    cfg.max_epochs = 1500;
    cfg.batch = 10;
    cfg.lr = 1e-2;
    cfg.patience = 1500; // no early stop: drive the loss down
    cfg.train_fraction = 1.0;
    cfg.seed = 5;
    TrainReport rep;
    NnModel m = train_network(d, cfg, &rep);
    CHECK(rep.n_train == 10);
    CHECK(rep.n_val == 0);
    CHECK(rep.final_train <= 1e-6);
    CHECK(dataset_hinge(m, d, 0.0) == doctest::Approx(rep.final_train));
    REQUIRE(rep.train_curve.size() == static_cast<std::size_t>(rep.epochs));
    CHECK(rep.train_curve.back() < rep.train_curve.front());
}

TEST_CASE("a unit ball is reached by a small network and stops early") {
    Dataset d = synth(200, 8, 6, 4);
    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.epsilon = 1.0;
    cfg.max_epochs = 200;
    cfg.batch = 32;
    cfg.lr = 1e-2;
    cfg.patience = 10;
    cfg.seed = 6;
    TrainReport rep;
    NnModel m = train_network(d, cfg, &rep);
    CHECK(rep.best_val == 0.0);
    CHECK(rep.final_train == 0.0);
    CHECK(rep.early_stopped);
    CHECK(rep.epochs < cfg.max_epochs);
    CHECK(rep.n_train == 180);
    CHECK(rep.n_val == 20);
    CHECK(dataset_hinge(m, d, 1.0) == 0.0);
}

TEST_CASE("training is deterministic in the seed") {
    Dataset d = synth(80, 6, 4, 7);
    TrainConfig cfg;
    cfg.hidden = 12;
    cfg.epsilon = 0.1;
    cfg.max_epochs = 30;
    cfg.batch = 16;
    cfg.seed = 11;
    NnModel a = train_network(d, cfg);
    NnModel b = train_network(d, cfg);
    CHECK(a.W == b.W);
    CHECK(a.b == b.b);
    CHECK(a.A == b.A);
    CHECK(a.in_mean == b.in_mean);
    CHECK(a.out_std == b.out_std);
    cfg.seed = 12;
    NnModel c = train_network(d, cfg);
    CHECK(a.W != c.W);
}

TEST_CASE("standardization clamps to the sensor noise floor") {
    Dataset d = synth(120, 5, 3, 13);
    // feature 2 barely moves across scenarios; its sensor is very noisy
    for (std::size_t r = 0; r < d.count(); ++r)
        d.z[r * d.L + 2] = 0.5 + 1e-6 * d.z[r * d.L + 2];
    d.noise_floor = {1e-4, 1e-4, 0.25, 1e-4, 1e-4};
    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.epsilon = 0.0;
    cfg.max_epochs = 5;
    cfg.seed = 3;
    NnModel m = train_network(d, cfg);
    CHECK(m.in_std[2] >= 0.25);       // clamped to the declared noise
    CHECK(m.in_std[0] > 0.25);        // healthy features keep their spread
    CHECK(m.fingerprint == d.fingerprint);
}

TEST_CASE("constant output coordinates are pinned to their mean") {
    Dataset d = synth(150, 6, 4, 17);
    for (std::size_t r = 0; r < d.count(); ++r)
        d.v[r * d.K2 + 1] = 0.7321; // e.g. a reference bus coordinate
    TrainConfig cfg;
    cfg.hidden = 16;
    cfg.epsilon = 0.0;
    cfg.max_epochs = 40;
    cfg.seed = 19;
    NnModel m = train_network(d, cfg);
    Rng rng(20);
    for (int trial = 0; trial < 10; ++trial) {
        Vec z(d.L);
        for (double& x : z) x = rng.uniform(-1.5, 1.5);
        const Vec g = nn_forward(m, z);
        CHECK(std::abs(g[1] - 0.7321) <= 1e-6);
    }
}

TEST_CASE("models round trip through json byte for byte") {
    Dataset d = synth(60, 5, 4, 23);
    TrainConfig cfg;
    cfg.hidden = 6;
    cfg.epsilon = 0.2;
    cfg.max_epochs = 10;
    cfg.seed = 29;
    NnModel m = train_network(d, cfg);
    m.fingerprint = 0xdeadbeefcafef00dull;

    const std::string path = "/tmp/dsse_test_model.json";
    save_model(path, m);
    NnModel back = load_model(path);
    CHECK(back.L == m.L);
    CHECK(back.T == m.T);
    CHECK(back.K_out == m.K_out);
    CHECK(back.fingerprint == m.fingerprint);
    CHECK(back.W == m.W);
    CHECK(back.b == m.b);
    CHECK(back.A == m.A);
    CHECK(back.in_mean == m.in_mean);
    CHECK(back.in_std == m.in_std);
    CHECK(back.out_mean == m.out_mean);
    CHECK(back.out_std == m.out_std);

    Vec z(m.L, 0.3);
    CHECK(nn_forward(back, z) == nn_forward(m, z));
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_model("/tmp/dsse_no_such_model.json"), Error);
}

TEST_CASE("model loader rejects malformed documents") {
    const std::string path = "/tmp/dsse_bad_model.json";
    auto write = [&](const std::string& body) {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs(body.c_str(), f);
        std::fclose(f);
    };
    write("{broken");
    CHECK_THROWS_AS(load_model(path), Error);
    write(R"({"schema":"nnmodel/0"})");
    CHECK_THROWS_AS(load_model(path), Error);
    write(R"({"schema":"nnmodel/1","inputs":2,"hidden":1,"outputs":1,)"
          R"("fingerprint":"0x0","W":[1.0],"b":[0.0],"A":[1.0],)"
          R"("in_mean":[0,0],"in_std":[1,1],"out_mean":[0],"out_std":[1]})");
    CHECK_THROWS_AS(load_model(path), Error); // W has the wrong length
    std::remove(path.c_str());
}

TEST_CASE("trainer rejects invalid configurations") {
    Dataset d = synth(10, 4, 2, 31);
    TrainConfig cfg;
    cfg.hidden = 0;
    CHECK_THROWS_AS(train_network(d, cfg), Error);
    cfg.hidden = 4;
    cfg.train_fraction = 0.0;
    CHECK_THROWS_AS(train_network(d, cfg), Error);
    Dataset empty;
    empty.L = 4;
    empty.K2 = 2;
    CHECK_THROWS_AS(train_network(empty, TrainConfig{}), Error);
}
