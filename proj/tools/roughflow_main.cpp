// Command-line front end: field sampling, trajectory tracing, verification
// suites, and the experiment drivers.  Exit codes: 0 pass, 1 criterion
// failure, 2 usage/config error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "roughflow/exact_flows.hpp"
#include "roughflow/experiments.hpp"
#include "roughflow/fields.hpp"
#include "roughflow/ode_engine.hpp"
#include "roughflow/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace roughflow;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file: " + path);
    json j;
    is >> j;
    return config_from_json(j);
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "JSON config file (roughflow-config-v1)");
        app->add_option("--out", out_dir, "output directory (atomic: temp dir + rename)");
        app->add_option("--seed", seed, "sample seed override")->each([this](const std::string&) {
            seed_set = true;
        });
        app->add_option("--threads", threads, "parallel batch width (default 1)");
    }

    ExperimentConfig merged() const {
        ExperimentConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_set) cfg.samples.seed = seed;
        if (threads > 0) cfg.threads = threads;
        return cfg;
    }
};

int run_field_sample(const CommonFlags& common, const std::string& field_name, double theta,
                     double eps, std::vector<double> box_min, std::vector<double> box_max,
                     std::vector<int> counts) {
    if (box_min.size() != 3 || box_max.size() != 3 || counts.size() != 3) {
        std::cerr << "field-sample: --min/--max/--counts must have 3 entries\n";
        return kExitUsage;
    }
    for (int c : counts) {
        if (c < 1) {
            std::cerr << "field-sample: counts must be positive\n";
            return kExitUsage;
        }
    }
    Field f = Field::limit();
    if (field_name == "approx") {
        f = Field::approx(ApproxParams(eps, theta));
    } else if (field_name != "limit") {
        std::cerr << "field-sample: field must be 'limit' or 'approx'\n";
        return kExitUsage;
    }
    std::vector<Point3> pts;
    for (int i = 0; i < counts[0]; ++i)
        for (int j = 0; j < counts[1]; ++j)
            for (int k = 0; k < counts[2]; ++k) {
                auto coord = [](double lo, double hi, int idx, int n) {
                    return n == 1 ? lo : lo + (hi - lo) * idx / double(n - 1);
                };
                pts.push_back({coord(box_min[0], box_max[0], i, counts[0]),
                               coord(box_min[1], box_max[1], j, counts[1]),
                               coord(box_min[2], box_max[2], k, counts[2])});
            }
    std::ostringstream csv;
    write_field_samples_csv(csv, f, pts);

    const ExperimentConfig cfg = common.merged();
    if (cfg.out_dir.empty()) {
        std::cout << csv.str();
        return kExitPass;
    }
    json report{{"schema", "roughflow-report-v1"},
                {"tool_version", "0.1.0"},
                {"command", "field-sample"},
                {"field", field_name},
                {"theta", theta},
                {"eps", eps},
                {"points", pts.size()}};
    write_experiment_outputs(cfg.out_dir, report, {{"samples.csv", csv.str()}});
    return kExitPass;
}

int run_flow_trace(const CommonFlags& common, double theta, double eps,
                   std::vector<double> start, double horizon, const std::string& mode) {
    if (start.size() != 3) {
        std::cerr << "flow-trace: --start must have 3 entries\n";
        return kExitUsage;
    }
    if (!(horizon > 0.0)) {
        std::cerr << "flow-trace: --T must be positive\n";
        return kExitUsage;
    }
    const ExperimentConfig cfg = common.merged();
    const ApproxParams g(eps, theta);
    const Point3 x0{start[0], start[1], start[2]};

    json manifest{{"schema", "roughflow-report-v1"},
                  {"tool_version", "0.1.0"},
                  {"command", "flow-trace"},
                  {"theta", theta},
                  {"eps", eps},
                  {"start", {x0.x, x0.y, x0.z}},
                  {"horizon", horizon},
                  {"mode", mode}};

    std::vector<std::pair<std::string, std::string>> files;
    double discrepancy = 0.0;
    const bool in_pplus = classify_eps(g, x0) == RegionLabel::PPlusEps;

    if (in_pplus) {
        const Breakpoints bp = breakpoints(g, x0.z);
        manifest["breakpoints"] = {bp.t1, bp.t2, bp.t3, bp.t4};
    }

    std::vector<TrajectorySample> closed;
    if ((mode == "closed-form" || mode == "both") && in_pplus) {
        const int n = 400;
        for (int i = 0; i <= n; ++i) {
            const double t = horizon * i / n;
            const FlowEpsState st = flow_eps_state(g, t, x0);
            closed.push_back({t, st.x, segment_name(st.segment)});
        }
        std::ostringstream os;
        write_trajectory_csv(os, closed);
        files.emplace_back("trace_closed.csv", os.str());
    } else if (mode == "closed-form" && !in_pplus) {
        std::cerr << "flow-trace: closed form requires a start in P+_eps; use --mode engine\n";
        return kExitUsage;
    }

    if (mode == "engine" || mode == "both") {
        const TrajectoryRecord rec = integrate(Field::approx(g), x0, horizon, cfg.integrator);
        std::vector<TrajectorySample> samples;
        samples.reserve(rec.times.size());
        for (std::size_t i = 0; i < rec.times.size(); ++i) {
            samples.push_back({rec.times[i], rec.states[i], region_name(rec.labels[i])});
        }
        std::ostringstream os;
        write_trajectory_csv(os, samples);
        files.emplace_back("trace_engine.csv", os.str());
        json events = json::array();
        for (const auto& ev : rec.events) events.push_back({{"t", ev.t}, {"interface", ev.interface_id}});
        manifest["engine"] = {{"status", status_name(rec.status)},
                              {"steps", rec.n_steps},
                              {"nudged_start", rec.nudged_start},
                              {"events", events}};
        if (mode == "both" && in_pplus && rec.status == IntegrationStatus::Completed) {
            discrepancy = (rec.final_state() - flow_eps_closed(g, rec.final_time(), x0)).norm();
            manifest["closed_vs_engine_final"] = discrepancy;
        }
    }

    if (cfg.out_dir.empty()) {
        std::cout << manifest.dump(2) << '\n';
        for (auto& [name, content] : files) std::cout << "# --- " << name << " ---\n" << content;
    } else {
        write_experiment_outputs(cfg.out_dir, manifest, files);
    }
    return kExitPass;
}

int run_verify(const CommonFlags& common, const std::string& suite, double theta, double eps) {
    const ExperimentConfig cfg = common.merged();
    const ApproxParams g(eps, theta);
    std::vector<VerifySuiteResult> results;

    if (suite == "divergence" || suite == "all")
        results.push_back(verify_divergence(g, 1000, cfg.samples.seed));
    if (suite == "tangency" || suite == "all")
        results.push_back(verify_tangency(g, 100, cfg.samples.seed));
    if (suite == "conserved" || suite == "all")
        results.push_back(verify_conserved(g, theta, 20, cfg.samples.seed, cfg.integrator));
    if (suite == "volume" || suite == "all")
        results.push_back(verify_volume(g, 5, cfg.samples.seed, cfg.integrator));
    if (results.empty()) {
        std::cerr << "verify: unknown suite '" << suite
                  << "' (use divergence|tangency|conserved|volume|all)\n";
        return kExitUsage;
    }

    bool all_pass = true;
    json verdicts = json::array();
    for (const auto& r : results) {
        verdicts.push_back({{"suite", r.name}, {"pass", r.pass}, {"details", r.details}});
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << '\n';
    }
    json report{{"schema", "roughflow-report-v1"},
                {"tool_version", "0.1.0"},
                {"command", "verify"},
                {"theta", theta},
                {"eps", eps},
                {"verdicts", verdicts},
                {"pass", all_pass}};
    if (!cfg.out_dir.empty()) {
        write_experiment_outputs(cfg.out_dir, report, {});
    } else {
        std::cout << report.dump(2) << '\n';
    }
    return all_pass ? kExitPass : kExitFail;
}

int run_experiment(const CommonFlags& common, const std::string& id, double theta, double phi,
                   bool theta_set, bool phi_set) {
    ExperimentConfig cfg = common.merged();
    cfg.id = id;
    if (theta_set) cfg.theta = theta;
    if (phi_set) cfg.phi = phi;

    bool pass = false;
    json report;
    if (id == "flow-convergence") {
        const auto rep = run_flow_convergence(cfg);
        pass = rep.pass;
        report = rep.to_json();
    } else if (id == "inverse-convergence") {
        const auto rep = run_inverse_convergence(cfg);
        pass = rep.pass;
        report = rep.to_json();
    } else if (id == "nonuniqueness") {
        const auto rep = run_nonuniqueness(cfg);
        pass = rep.pass;
        report = rep.to_json();
    } else if (id == "mollification-stability") {
        const auto rep = run_mollification_stability(cfg);
        pass = rep.pass;
        report = rep.to_json();
    } else if (id == "diagonal-merge") {
        const auto rep = run_diagonal_merge(cfg);
        pass = rep.pass;
        report = rep.to_json();
    } else if (id == "dpl2d") {
        const auto rep = run_dpl2d_demo(cfg);
        pass = rep.pass;
        report = rep.to_json();
    } else {
        std::cerr << "experiment: unknown id '" << id << "'\n";
        return kExitUsage;
    }
    if (cfg.out_dir.empty()) std::cout << report.dump(2) << '\n';
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << '\n';
    return pass ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"roughflow: numerical laboratory for non-unique flows of a rough "
                 "divergence-free field and their smooth approximations"};
    app.require_subcommand(1);

    CommonFlags common;
    double theta = 1.5707963267948966;
    double phi = 3.141592653589793;
    double eps = 0.1;

    // field-sample
    auto* sample = app.add_subcommand("field-sample", "sample a field on a grid box to CSV");
    common.attach(sample);
    std::string field_name = "limit";
    std::vector<double> box_min{-1, -1, -1}, box_max{1, 1, 1};
    std::vector<int> counts{5, 5, 5};
    sample->add_option("--field", field_name, "limit|approx");
    sample->add_option("--theta", theta, "rotation (radians)");
    sample->add_option("--eps", eps, "approximation scale");
    sample->add_option("--min", box_min, "box lower corner")->expected(3);
    sample->add_option("--max", box_max, "box upper corner")->expected(3);
    sample->add_option("--counts", counts, "samples per axis")->expected(3);

    // flow-trace
    auto* trace = app.add_subcommand("flow-trace", "trace one trajectory (closed form and/or engine)");
    common.attach(trace);
    std::vector<double> start{0.3, 0.0, 1.0};
    double horizon = 0.5;
    std::string mode = "both";
    trace->add_option("--theta", theta, "rotation (radians)");
    trace->add_option("--eps", eps, "approximation scale");
    trace->add_option("--start", start, "start point")->expected(3);
    trace->add_option("--T", horizon, "time horizon");
    trace->add_option("--mode", mode, "closed-form|engine|both");

    // verify
    auto* verify = app.add_subcommand("verify", "run a verification suite");
    common.attach(verify);
    std::string suite = "all";
    verify->add_option("suite", suite, "divergence|tangency|conserved|volume|all");
    verify->add_option("--theta", theta, "rotation (radians)");
    verify->add_option("--eps", eps, "approximation scale");

    // experiment
    auto* exp = app.add_subcommand("experiment", "run an experiment driver");
    common.attach(exp);
    std::string id = "flow-convergence";
    bool theta_set = false, phi_set = false;
    exp->add_option("id", id,
                    "flow-convergence|inverse-convergence|nonuniqueness|"
                    "mollification-stability|diagonal-merge|dpl2d");
    exp->add_option("--theta", theta, "rotation (radians)")->each([&](const std::string&) {
        theta_set = true;
    });
    exp->add_option("--phi", phi, "second rotation (radians)")->each([&](const std::string&) {
        phi_set = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitPass : kExitUsage;
    }

    try {
        if (sample->parsed()) return run_field_sample(common, field_name, theta, eps, box_min, box_max, counts);
        if (trace->parsed()) return run_flow_trace(common, theta, eps, start, horizon, mode);
        if (verify->parsed()) return run_verify(common, suite, theta, eps);
        if (exp->parsed()) return run_experiment(common, id, theta, phi, theta_set, phi_set);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFail;
    }
    return kExitUsage;
}
