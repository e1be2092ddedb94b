#include "dsse/bench.hpp"
#include "dsse/dataset.hpp"
#include "dsse/estimator.hpp"
#include "dsse/nn.hpp"
#include "dsse/three_bus.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

using nlohmann::json;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 =
        std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    }
};

// Wall-clock timings are kept out of the primary reports so repeated runs
// stay byte-identical; they go to stderr and an optional sidecar file.
void emit_timing(const std::string& label, const Timer& t,
                 const std::string& sidecar) {
    const double s = t.seconds();
    std::fprintf(stderr, "%s: %.3f s\n", label.c_str(), s);
    if (!sidecar.empty()) {
        json doc;
        doc["label"] = label;
        doc["wall_seconds"] = s;
        std::ofstream out(sidecar);
        if (out) out << doc.dump(1) << "\n";
    }
}

void write_report(const json& doc, const std::string& path) {
    if (path.empty()) {
        std::cout << doc.dump(1) << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) dsse::fail_input("report: cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

std::string fp_hex(std::uint64_t fp) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx",
                  static_cast<unsigned long long>(fp));
    return buf;
}

void save_state(const std::string& path, const dsse::CVec& v) {
    json doc;
    doc["schema"] = "state/1";
    dsse::Vec re(v.size()), im(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        re[k] = v[k].real();
        im[k] = v[k].imag();
    }
    doc["re"] = re;
    doc["im"] = im;
    std::ofstream out(path);
    if (!out) dsse::fail_input("state: cannot write '" + path + "'");
    out << doc.dump(1) << "\n";
}

dsse::CVec load_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) dsse::fail_input("state: cannot open '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        dsse::fail_input(std::string("state: JSON parse failure: ") + e.what());
    }
    if (doc.value("schema", "") != "state/1")
        dsse::fail_input("state: missing or unsupported schema (want state/1)");
    const auto re = doc.at("re").get<dsse::Vec>();
    const auto im = doc.at("im").get<dsse::Vec>();
    if (re.size() != im.size())
        dsse::fail_input("state: re/im length mismatch");
    dsse::CVec v(re.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = {re[k], im[k]};
    return v;
}

json method_json(const dsse::MethodStats& st) {
    json j;
    j["name"] = st.name;
    j["runs"] = st.runs;
    j["converged"] = st.converged;
    j["capped"] = st.capped;
    j["diverged"] = st.diverged;
    j["mean_nu"] = st.mean_nu;
    j["mean_mu"] = st.mean_mu;
    j["mean_iterations"] = st.mean_iterations;
    j["mean_init_dist"] = st.mean_init_dist;
    return j;
}

struct CommonFeederArgs {
    std::string feeder;
    std::string measurements;
    std::string switch_scenario; // empty: as-filed topology

    dsse::FeederModel load_model() const {
        dsse::FeederModel m = dsse::parse_feeder_file(feeder);
        if (!switch_scenario.empty())
            m = dsse::set_switch_states(
                m, dsse::reconfig_scenario(switch_scenario));
        return m;
    }
    dsse::MeasurementSet load_set(const dsse::FeederModel& m) const {
        return dsse::build_measurement_set(
            m, dsse::parse_measurement_config_file(measurements));
    }
};

void add_feeder_args(CLI::App* cmd, CommonFeederArgs& a,
                     bool with_switch = true) {
    cmd->add_option("--feeder", a.feeder, "Feeder description (JSON)")
        ->required();
    cmd->add_option("--measurements", a.measurements,
                    "Measurement configuration (JSON)")
        ->required();
    if (with_switch)
        cmd->add_option("--reconfig", a.switch_scenario,
                        "Apply a named switching scenario (A, B, or C)");
}

int run(int argc, char** argv) {
    CLI::App app{"Distribution system state estimation toolkit"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand(
        "gen-data", "Sample scenarios and write a training dataset");
    CommonFeederArgs gen_f;
    add_feeder_args(gen, gen_f);
    std::string gen_profiles, gen_out, gen_report, gen_timing;
    std::size_t gen_count = 10000;
    std::uint64_t gen_seed = 1;
    gen->add_option("--profiles", gen_profiles, "Profile CSV")->required();
    gen->add_option("--count", gen_count, "Samples to generate");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--out", gen_out, "Output dataset path")->required();
    gen->add_option("--report", gen_report, "Report JSON path (default stdout)");
    gen->add_option("--timing-out", gen_timing, "Wall-time sidecar path");

    // ---- train ----
    auto* train = app.add_subcommand(
        "train", "Fit the warm-start network on a dataset");
    std::string train_data, train_out, train_report, train_timing;
    dsse::TrainConfig tc;
    train->add_option("--data", train_data, "Dataset path")->required();
    train->add_option("--out", train_out, "Model output path")->required();
    train->add_option("--hidden", tc.hidden, "Hidden units");
    train->add_option("--epsilon", tc.epsilon, "Hinge tolerance");
    train->add_option("--epochs", tc.max_epochs, "Maximum epochs");
    train->add_option("--batch", tc.batch, "Minibatch size");
    train->add_option("--lr", tc.lr, "Adam learning rate");
    train->add_option("--patience", tc.patience, "Early-stopping patience");
    train->add_option("--split", tc.train_fraction, "Train fraction");
    train->add_option("--seed", tc.seed, "RNG seed");
    train->add_option("--report", train_report, "Report JSON path");
    train->add_option("--timing-out", train_timing, "Wall-time sidecar path");

    // ---- synth ----
    auto* synth = app.add_subcommand(
        "synth", "Draw one scenario and write measurements plus the truth");
    CommonFeederArgs synth_f;
    add_feeder_args(synth, synth_f);
    std::string synth_profiles, synth_values, synth_truth;
    std::uint64_t synth_seed = 1;
    bool synth_noiseless = false;
    synth->add_option("--profiles", synth_profiles, "Profile CSV")->required();
    synth->add_option("--seed", synth_seed, "RNG seed");
    synth->add_flag("--noiseless", synth_noiseless,
                    "Skip measurement noise");
    synth->add_option("--out-values", synth_values,
                      "Measured values JSON path")
        ->required();
    synth->add_option("--out-truth", synth_truth, "True state JSON path");

    // ---- estimate ----
    auto* est = app.add_subcommand(
        "estimate", "Run the estimator on a measured-values file");
    CommonFeederArgs est_f;
    add_feeder_args(est, est_f);
    std::string est_values, est_model, est_truth, est_state, est_report;
    std::string est_init = "flat";
    bool est_no_damping = false;
    dsse::EstimatorConfig ec;
    est->add_option("--values", est_values, "Measured values JSON")
        ->required();
    est->add_option("--init", est_init, "Initializer: flat, pmu, or nn");
    est->add_option("--model", est_model, "Trained model (for --init nn)");
    est->add_option("--truth", est_truth, "True state JSON for error metrics");
    est->add_option("--max-iter", ec.max_iter, "Iteration cap");
    est->add_flag("--no-damping", est_no_damping,
                  "Plain Gauss-Newton at the damping floor");
    est->add_option("--out-state", est_state, "Write the estimate (JSON)");
    est->add_option("--report", est_report, "Report JSON path");

    // ---- bench ----
    auto* bench = app.add_subcommand(
        "bench", "Monte-Carlo comparison of estimator initializers");
    CommonFeederArgs bench_f;
    add_feeder_args(bench, bench_f);
    std::string bench_profiles, bench_model, bench_hist, bench_report,
        bench_timing;
    dsse::BenchConfig bc;
    bool bench_no_damping = false;
    bench->add_option("--profiles", bench_profiles, "Profile CSV")
        ->required();
    bench->add_option("--model", bench_model, "Trained model path");
    bench->add_option("--runs", bc.runs, "Monte-Carlo runs");
    bench->add_option("--seed", bc.seed, "RNG seed");
    bench->add_option("--methods", bc.methods,
                      "Initializers to compare (nn flat pmu)");
    bench->add_flag("--no-damping", bench_no_damping,
                    "Plain Gauss-Newton at the damping floor");
    bench->add_option("--max-iter", bc.est.max_iter, "Solver iteration cap");
    bench->add_option("--step-tol", bc.est.step_tol,
                      "Solver update-norm stop");
    bench->add_option("--hist", bench_hist,
                      "Warm-start distance histogram CSV path");
    bench->add_option("--report", bench_report, "Report JSON path");
    bench->add_option("--timing-out", bench_timing, "Wall-time sidecar path");

    // ---- eps-sweep ----
    auto* eps = app.add_subcommand(
        "eps-sweep", "Retrain across hinge tolerances and benchmark each");
    CommonFeederArgs eps_f;
    add_feeder_args(eps, eps_f);
    std::string eps_profiles, eps_data, eps_report, eps_timing;
    std::vector<double> eps_list;
    dsse::TrainConfig eps_tc;
    dsse::BenchConfig eps_bc;
    eps->add_option("--profiles", eps_profiles, "Profile CSV")->required();
    eps->add_option("--data", eps_data, "Dataset path")->required();
    eps->add_option("--eps", eps_list, "Epsilon values")->required();
    eps->add_option("--hidden", eps_tc.hidden, "Hidden units");
    eps->add_option("--epochs", eps_tc.max_epochs, "Maximum epochs");
    eps->add_option("--train-seed", eps_tc.seed, "Training RNG seed");
    eps->add_option("--runs", eps_bc.runs, "Monte-Carlo runs per epsilon");
    eps->add_option("--seed", eps_bc.seed, "Benchmark RNG seed");
    eps->add_option("--max-iter", eps_bc.est.max_iter,
                    "Solver iteration cap");
    eps->add_option("--step-tol", eps_bc.est.step_tol,
                    "Solver update-norm stop");
    eps->add_option("--report", eps_report, "Report JSON path");
    eps->add_option("--timing-out", eps_timing, "Wall-time sidecar path");

    // ---- reconfig ----
    auto* rec = app.add_subcommand(
        "reconfig", "Benchmark a base-trained model on a switched topology");
    CommonFeederArgs rec_f;
    add_feeder_args(rec, rec_f, /*with_switch=*/false);
    std::string rec_profiles, rec_model, rec_report, rec_timing;
    std::string rec_scenario;
    dsse::BenchConfig rec_bc;
    rec->add_option("--profiles", rec_profiles, "Profile CSV")->required();
    rec->add_option("--model", rec_model, "Model trained on the base feeder")
        ->required();
    rec->add_option("--scenario", rec_scenario, "Scenario name (A, B, or C)")
        ->required();
    rec->add_option("--runs", rec_bc.runs, "Monte-Carlo runs");
    rec->add_option("--seed", rec_bc.seed, "RNG seed");
    rec->add_option("--report", rec_report, "Report JSON path");
    rec->add_option("--timing-out", rec_timing, "Wall-time sidecar path");

    // ---- oracle3bus ----
    auto* o3 = app.add_subcommand(
        "oracle3bus", "Closed-form flows on the lossless 3-bus star");
    double o3_b = 10.0, o3_v1 = 1.0, o3_v2 = 1.0, o3_v3 = 1.0;
    double o3_th12 = 0.0, o3_th13 = 0.0, o3_p12 = 0.0, o3_p13 = 0.0;
    bool o3_invert = false;
    std::string o3_report;
    o3->add_option("--b", o3_b, "Line susceptance magnitude");
    o3->add_option("--v1", o3_v1, "Bus 1 voltage magnitude");
    o3->add_option("--v2", o3_v2, "Bus 2 voltage magnitude");
    o3->add_option("--v3", o3_v3, "Bus 3 voltage magnitude");
    o3->add_option("--th12", o3_th12, "Angle 1-2 (rad, forward mode)");
    o3->add_option("--th13", o3_th13, "Angle 1-3 (rad, forward mode)");
    o3->add_flag("--invert", o3_invert, "Recover angles from active flows");
    o3->add_option("--p12", o3_p12, "Active flow 1-2 (invert mode)");
    o3->add_option("--p13", o3_p13, "Active flow 1-3 (invert mode)");
    o3->add_option("--report", o3_report, "Report JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // usage errors share the input-error exit code
    }

    if (gen->parsed()) {
        Timer t;
        const dsse::FeederModel m = gen_f.load_model();
        const dsse::MeasurementSet set = gen_f.load_set(m);
        const dsse::ProfileLibrary lib =
            dsse::ProfileLibrary::parse_file(gen_profiles);
        dsse::DatasetBuildStats st;
        const dsse::Dataset d =
            dsse::build_dataset(m, set, lib, gen_count, gen_seed, &st);
        dsse::save_dataset(gen_out, d);
        json rep;
        rep["dataset"] = gen_out;
        rep["samples"] = st.kept;
        rep["skipped_power_flows"] = st.skipped;
        rep["measurements_per_sample"] = d.L;
        rep["state_entries_per_sample"] = d.K2;
        rep["fingerprint"] = fp_hex(d.fingerprint);
        write_report(rep, gen_report);
        emit_timing("gen-data", t, gen_timing);
        return 0;
    }

    if (train->parsed()) {
        Timer t;
        const dsse::Dataset d = dsse::load_dataset(train_data);
        dsse::TrainReport rep;
        const dsse::NnModel m = dsse::train_network(d, tc, &rep);
        dsse::save_model(train_out, m);
        json j;
        j["model"] = train_out;
        j["epochs"] = rep.epochs;
        j["best_epoch"] = rep.best_epoch;
        j["best_val_loss"] = rep.best_val;
        j["final_train_loss"] = rep.final_train;
        j["early_stopped"] = rep.early_stopped;
        j["train_samples"] = rep.n_train;
        j["val_samples"] = rep.n_val;
        j["train_curve"] = rep.train_curve;
        j["val_curve"] = rep.val_curve;
        write_report(j, train_report);
        emit_timing("train", t, train_timing);
        return 0;
    }

    if (synth->parsed()) {
        const dsse::FeederModel m = synth_f.load_model();
        dsse::MeasurementSet set = synth_f.load_set(m);
        const dsse::ProfileLibrary lib =
            dsse::ProfileLibrary::parse_file(synth_profiles);
        dsse::Rng rng(dsse::mix_seed(synth_seed, 0));
        const dsse::Scenario sc = dsse::sample_scenario(m, lib, 0, rng);
        const dsse::CVec v_true = dsse::solve_power_flow(m, sc).v;
        dsse::synthesize_measurements(set, v_true,
                                      synth_noiseless
                                          ? dsse::NoiseMode::noiseless
                                          : dsse::NoiseMode::gaussian,
                                      dsse::mix_seed(synth_seed, 2));
        dsse::save_measurement_values(synth_values, set);
        if (!synth_truth.empty()) save_state(synth_truth, v_true);
        return 0;
    }

    if (est->parsed()) {
        const dsse::FeederModel m = est_f.load_model();
        dsse::MeasurementSet set = est_f.load_set(m);
        dsse::load_measurement_values(est_values, set);
        dsse::CVec v0;
        if (est_init == "flat") {
            v0 = dsse::flat_start(m);
        } else if (est_init == "pmu") {
            v0 = dsse::pmu_anchored_start(m, set);
        } else if (est_init == "nn") {
            if (est_model.empty())
                dsse::fail_input("estimate: --init nn requires --model");
            const dsse::NnModel nn = dsse::load_model(est_model);
            if (nn.fingerprint != set.fingerprint)
                dsse::fail_input("estimate: model fingerprint does not match "
                                 "the feeder/measurement layout");
            v0 = dsse::unpack_state(dsse::nn_forward(nn, set.z));
        } else {
            dsse::fail_input("estimate: unknown initializer '" + est_init +
                             "'");
        }
        ec.adapt_damping = !est_no_damping;
        const dsse::EstimateResult r = dsse::estimate(set, v0, ec);
        if (!est_state.empty()) save_state(est_state, r.v_hat);
        json j;
        j["converged"] = r.converged;
        j["iterations"] = r.iterations;
        j["diverged_reason"] = r.diverged_reason;
        j["weighted_cost"] = dsse::wls_cost(set, r.v_hat);
        j["mu"] = dsse::mu_index(set, r.v_hat);
        if (!est_truth.empty())
            j["nu"] = dsse::nu_index(r.v_hat, load_state(est_truth));
        write_report(j, est_report);
        return r.converged ? 0 : 3;
    }

    if (bench->parsed()) {
        Timer t;
        const dsse::FeederModel m = bench_f.load_model();
        const dsse::MeasurementSet set = bench_f.load_set(m);
        const dsse::ProfileLibrary lib =
            dsse::ProfileLibrary::parse_file(bench_profiles);
        dsse::NnModel nn;
        const bool want_nn =
            std::find(bc.methods.begin(), bc.methods.end(), "nn") !=
            bc.methods.end();
        if (want_nn) {
            if (bench_model.empty())
                dsse::fail_input("bench: method 'nn' requires --model");
            nn = dsse::load_model(bench_model);
        }
        bc.est.adapt_damping = !bench_no_damping;
        const dsse::BenchResult r =
            dsse::run_bench(m, set, lib, want_nn ? &nn : nullptr, bc);
        if (!bench_hist.empty())
            dsse::write_histogram_csv(bench_hist, r.nn_init_dist);
        json j;
        j["runs"] = bc.runs;
        j["seed"] = bc.seed;
        j["damping"] = bc.est.adapt_damping ? "adaptive" : "floor";
        j["pf_skipped"] = r.pf_skipped;
        j["methods"] = json::array();
        for (const auto& st : r.methods) j["methods"].push_back(method_json(st));
        write_report(j, bench_report);
        emit_timing("bench", t, bench_timing);
        return 0;
    }

    if (eps->parsed()) {
        Timer t;
        const dsse::FeederModel m = eps_f.load_model();
        const dsse::MeasurementSet set = eps_f.load_set(m);
        const dsse::ProfileLibrary lib =
            dsse::ProfileLibrary::parse_file(eps_profiles);
        const dsse::Dataset d = dsse::load_dataset(eps_data, set.fingerprint);
        const auto rows =
            dsse::eps_sweep(m, set, lib, d, eps_tc, eps_list, eps_bc);
        json j;
        j["rows"] = json::array();
        for (const auto& row : rows) {
            json rj;
            rj["epsilon"] = row.epsilon;
            rj["train_loss"] = row.train_loss;
            rj["best_val_loss"] = row.best_val;
            rj["bench"] = method_json(row.nn);
            j["rows"].push_back(rj);
        }
        write_report(j, eps_report);
        emit_timing("eps-sweep", t, eps_timing);
        return 0;
    }

    if (rec->parsed()) {
        Timer t;
        const dsse::FeederModel base = dsse::parse_feeder_file(rec_f.feeder);
        const dsse::FeederModel m = dsse::set_switch_states(
            base, dsse::reconfig_scenario(rec_scenario));
        const dsse::MeasurementSet set = dsse::build_measurement_set(
            m, dsse::parse_measurement_config_file(rec_f.measurements));
        const dsse::ProfileLibrary lib =
            dsse::ProfileLibrary::parse_file(rec_profiles);
        const dsse::NnModel nn = dsse::load_model(rec_model);
        const dsse::BenchResult r = dsse::run_bench(m, set, lib, &nn, rec_bc);
        json j;
        j["scenario"] = rec_scenario;
        j["runs"] = rec_bc.runs;
        j["seed"] = rec_bc.seed;
        j["pf_skipped"] = r.pf_skipped;
        j["methods"] = json::array();
        for (const auto& st : r.methods) j["methods"].push_back(method_json(st));
        write_report(j, rec_report);
        emit_timing("reconfig", t, rec_timing);
        return 0;
    }

    if (o3->parsed()) {
        json j;
        if (o3_invert) {
            const dsse::ThreeBusState s =
                dsse::inverse_3bus(o3_p12, o3_p13, o3_v1, o3_v2, o3_v3, o3_b);
            j["th12"] = s.th12;
            j["th13"] = s.th13;
        } else {
            dsse::ThreeBusState s;
            s.v1 = o3_v1;
            s.v2 = o3_v2;
            s.v3 = o3_v3;
            s.th12 = o3_th12;
            s.th13 = o3_th13;
            const dsse::ThreeBusReadings r = dsse::forward_3bus(s, o3_b);
            j["p12"] = r.p12;
            j["q12"] = r.q12;
            j["p13"] = r.p13;
            j["q13"] = r.q13;
        }
        write_report(j, o3_report);
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const dsse::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == dsse::ErrorKind::numeric ? 3 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
