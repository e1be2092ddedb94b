#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
    static const fs::path p = [] {
        fs::path q = fs::temp_directory_path() / "dsse_cli_scratch";
        fs::remove_all(q);
        fs::create_directories(q);
        return q;
    }();
    return p;
}

std::string at(const std::string& name) { return (scratch() / name).string(); }

std::string data(const std::string& name) {
    return std::string(DSSE_DATA_DIR "/") + name;
}

// Spawns the CLI with the given arguments, muting both streams, and returns
// its exit status.
int run(const std::string& args) {
    const std::string cmd =
        std::string(DSSE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    REQUIRE(st != -1);
    REQUIRE(WIFEXITED(st));
    return WEXITSTATUS(st);
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string three_bus_io() {
    return "--feeder " + data("threebus_feeder.json") + " --measurements " +
           data("threebus_measurements.json");
}

std::string feeder_io() {
    return "--feeder " + data("ieee37_feeder.json") + " --measurements " +
           data("ieee37_measurements.json");
}

std::string profiles() { return " --profiles " + data("profiles_day.csv"); }

} // namespace

TEST_CASE("usage problems exit with the input-error code") {
    CHECK(run("--help") == 0);
    CHECK(run("") == 2);                 // a subcommand is required
    CHECK(run("--bogus") == 2);          // unknown flag
    CHECK(run("frobnicate") == 2);       // unknown subcommand
    CHECK(run("synth " + three_bus_io() + profiles()) == 2); // missing output
    CHECK(run("estimate " + three_bus_io() + " --values " + at("v3.json") +
              " --init warp") == 2);     // before that: no such values file
}

TEST_CASE("broken input files exit with the input-error code") {
    {
        std::ofstream out(at("bad.json"));
        out << "not json{";
    }
    {
        std::ofstream out(at("schema.json"));
        out << "{\"schema\": \"unrelated/9\"}";
    }
    CHECK(run("estimate --feeder " + at("bad.json") + " --measurements " +
              data("threebus_measurements.json") + " --values whatever") == 2);
    CHECK(run("estimate --feeder " + at("schema.json") + " --measurements " +
              data("threebus_measurements.json") + " --values whatever") == 2);
    CHECK(run("train --data " + at("nosuch.bin") + " --out " + at("x.json")) ==
          2);
}

TEST_CASE("synth and estimate round-trip on the star feeder") {
    CHECK(run("synth " + three_bus_io() + profiles() +
              " --seed 7 --noiseless --out-values " + at("v3.json") +
              " --out-truth " + at("t3.json")) == 0);
    CHECK(run("estimate " + three_bus_io() + " --values " + at("v3.json") +
              " --truth " + at("t3.json") + " --out-state " + at("x3.json") +
              " --report " + at("e3.json")) == 0);

    const json rep = load_json(at("e3.json"));
    CHECK(rep.at("converged").get<bool>());
    CHECK(rep.at("iterations").get<int>() <= 10);
    CHECK(rep.at("mu").get<double>() <= 1e-20);
    CHECK(rep.at("nu").get<double>() >= 0.0);
    CHECK(rep.at("diverged_reason").get<std::string>().empty());

    const json state = load_json(at("x3.json"));
    CHECK(state.at("schema") == "state/1");
    CHECK(state.at("re").size() == 3);
    CHECK(state.at("im").size() == 3);

    // a bad initializer name is a usage problem, not a numeric one
    CHECK(run("estimate " + three_bus_io() + " --values " + at("v3.json") +
              " --init warp") == 2);
    CHECK(run("estimate " + three_bus_io() + " --values " + at("v3.json") +
              " --init nn") == 2); // nn requires --model
}

TEST_CASE("noisy runs that hit the iteration cap exit with the numeric code") {
    CHECK(run("synth " + feeder_io() + profiles() +
              " --seed 9 --out-values " + at("v37.json") + " --out-truth " +
              at("t37.json")) == 0);
    CHECK(run("estimate " + feeder_io() + " --values " + at("v37.json") +
              " --report " + at("e37.json")) == 3);
    const json rep = load_json(at("e37.json"));
    CHECK_FALSE(rep.at("converged").get<bool>());
    CHECK(rep.at("diverged_reason") == "max_iterations");
    CHECK(rep.at("iterations").get<int>() == 50);

    CHECK(run("estimate " + feeder_io() + " --values " + at("v37.json") +
              " --max-iter 1 --report " + at("e37b.json")) == 3);
    CHECK(load_json(at("e37b.json")).at("iterations").get<int>() == 1);
}

TEST_CASE("gen-data and train reruns are byte-identical") {
    const std::string gen = "gen-data " + three_bus_io() + profiles() +
                            " --count 400 --seed 11 --out " + at("d3.bin") +
                            " --report " + at("g3.json");
    CHECK(run(gen) == 0);
    const std::string d_first = slurp(at("d3.bin"));
    const std::string g_first = slurp(at("g3.json"));
    CHECK(run(gen) == 0);
    CHECK(slurp(at("d3.bin")) == d_first);
    CHECK(slurp(at("g3.json")) == g_first);

    const json grep = load_json(at("g3.json"));
    CHECK(grep.at("samples").get<int>() == 400);
    CHECK(grep.at("measurements_per_sample").get<int>() == 5);
    CHECK(grep.at("state_entries_per_sample").get<int>() == 6);
    CHECK(grep.at("fingerprint").get<std::string>().substr(0, 2) == "0x");

    const std::string train = "train --data " + at("d3.bin") + " --out " +
                              at("m3.json") +
                              " --hidden 8 --epsilon 0.05 --epochs 40"
                              " --batch 32 --seed 5 --report " +
                              at("t3r.json");
    CHECK(run(train) == 0);
    const std::string m_first = slurp(at("m3.json"));
    const std::string t_first = slurp(at("t3r.json"));
    CHECK(run(train) == 0);
    CHECK(slurp(at("m3.json")) == m_first);
    CHECK(slurp(at("t3r.json")) == t_first);

    const json trep = load_json(at("t3r.json"));
    CHECK(trep.at("best_val_loss").get<double>() == 0.0);
    CHECK(trep.at("early_stopped").get<bool>());

    // a model fit to the star layout cannot initialize the big feeder
    CHECK(run("estimate " + feeder_io() + " --values " + at("v37.json") +
              " --init nn --model " + at("m3.json")) == 2);
}

TEST_CASE("bench compares initializers and reports deterministically") {
    const std::string bench = "bench " + three_bus_io() + profiles() +
                              " --model " + at("m3.json") +
                              " --runs 25 --seed 3 --methods nn flat pmu"
                              " --hist " +
                              at("h.csv") + " --report " + at("b.json");
    CHECK(run(bench) == 0);
    const std::string b_first = slurp(at("b.json"));
    CHECK(run(bench) == 0);
    CHECK(slurp(at("b.json")) == b_first); // no wall-clock leakage

    const json rep = load_json(at("b.json"));
    REQUIRE(rep.at("methods").size() == 3);
    double nn_iters = 0.0, flat_iters = 0.0;
    for (const json& m : rep.at("methods")) {
        CHECK(m.at("runs").get<int>() == 25);
        CHECK(m.at("converged").get<int>() == 25);
        CHECK(m.at("diverged").get<int>() == 0);
        if (m.at("name") == "nn") nn_iters = m.at("mean_iterations");
        if (m.at("name") == "flat") flat_iters = m.at("mean_iterations");
    }
    CHECK(nn_iters <= flat_iters);

    const std::string hist = slurp(at("h.csv"));
    CHECK(hist.rfind("bin_lo,bin_hi,count", 0) == 0);
}

TEST_CASE("eps-sweep writes one row per tolerance") {
    CHECK(run("eps-sweep " + three_bus_io() + profiles() + " --data " +
              at("d3.bin") +
              " --eps 0.05 0.5 --hidden 4 --epochs 30 --train-seed 5"
              " --runs 10 --seed 3 --report " +
              at("sw.json")) == 0);
    const json rep = load_json(at("sw.json"));
    REQUIRE(rep.at("rows").size() == 2);
    CHECK(rep.at("rows")[0].at("epsilon").get<double>() == 0.05);
    CHECK(rep.at("rows")[1].at("epsilon").get<double>() == 0.5);
    for (const json& row : rep.at("rows"))
        CHECK(row.at("bench").at("runs").get<int>() == 10);
}

TEST_CASE("reconfig benchmarks a base model on a switched topology") {
    CHECK(run("gen-data " + feeder_io() + profiles() +
              " --count 150 --seed 11 --out " + at("d37.bin")) == 0);
    CHECK(run("train --data " + at("d37.bin") + " --out " + at("m37.json") +
              " --hidden 8 --epsilon 0.5 --epochs 15 --batch 32 --seed 5") ==
          0);
    CHECK(run("reconfig " + feeder_io() + profiles() + " --model " +
              at("m37.json") +
              " --scenario A --runs 5 --seed 13 --timing-out " +
              at("rc_time.json") + " --report " + at("rc.json")) == 0);
    const json rep = load_json(at("rc.json"));
    CHECK(rep.at("scenario") == "A");
    CHECK(rep.at("methods").size() == 3);
    for (const json& m : rep.at("methods"))
        CHECK(m.at("runs").get<int>() == 5);

    // timings live in the sidecar, never in the report
    CHECK(load_json(at("rc_time.json")).contains("wall_seconds"));
    CHECK_FALSE(slurp(at("rc.json")).find("wall") != std::string::npos);

    CHECK(run("reconfig " + feeder_io() + profiles() + " --model " +
              at("m37.json") + " --scenario Z --runs 5") == 2);
}

TEST_CASE("oracle3bus prints the closed forms") {
    CHECK(run("oracle3bus --th12 0.1 --th13 -0.2 --report " + at("o1.json")) ==
          0);
    const json fwd = load_json(at("o1.json"));
    CHECK(fwd.at("p12").get<double>() ==
          doctest::Approx(10.0 * std::sin(0.1)).epsilon(1e-14));
    CHECK(fwd.at("q13").get<double>() ==
          doctest::Approx(1.0 - 10.0 * std::cos(-0.2)).epsilon(1e-14));

    std::ostringstream cmd;
    cmd.precision(17);
    cmd << "oracle3bus --invert --p12 " << fwd.at("p12").get<double>()
        << " --p13 " << fwd.at("p13").get<double>() << " --report "
        << at("o2.json");
    CHECK(run(cmd.str()) == 0);
    const json inv = load_json(at("o2.json"));
    CHECK(inv.at("th12").get<double>() == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(inv.at("th13").get<double>() == doctest::Approx(-0.2).epsilon(1e-9));

    CHECK(run("oracle3bus --invert --p12 99 --p13 0") == 3);
}
