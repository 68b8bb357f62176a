#include "roughflow/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "roughflow/exact_flows.hpp"
#include "roughflow/util.hpp"

namespace roughflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (!(v[i + 1] < v[i])) return false;
    return true;
}

}  // namespace

// =============================================================================
// Config plumbing
// =============================================================================

void ExperimentConfig::validate(bool needs_two_angles) const {
    if (eps_schedule.empty()) throw std::invalid_argument("config: eps_schedule is empty");
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
        if (!(eps_schedule[i] > 0.0)) throw std::invalid_argument("config: eps must be positive");
        if (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1])) {
            throw std::invalid_argument("config: eps_schedule must be strictly decreasing");
        }
    }
    if (!(horizon > 0.0)) throw std::invalid_argument("config: horizon must be positive");
    if (samples.count < 1) throw std::invalid_argument("config: sample count must be >= 1");
    if (grid.n < 4) throw std::invalid_argument("config: grid n must be >= 4");
    if (!(grid.radius > 0.0)) throw std::invalid_argument("config: grid radius must be positive");
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    (void)ApproxParams(eps_schedule.front(), theta);
    if (needs_two_angles) {
        (void)ApproxParams(eps_schedule.front(), phi);
        if (theta == phi) throw std::invalid_argument("config: theta and phi must differ");
    }
    integrator.validate();
}

json config_to_json(const ExperimentConfig& c) {
    return json{{"schema", "roughflow-config-v1"},
                {"id", c.id},
                {"theta", c.theta},
                {"phi", c.phi},
                {"eps_schedule", c.eps_schedule},
                {"delta_schedule", c.delta_schedule},
                {"horizon", c.horizon},
                {"samples",
                 {{"count", c.samples.count},
                  {"seed", c.samples.seed},
                  {"z_max", c.samples.z_max},
                  {"ratio_max", c.samples.ratio_max}}},
                {"grid", {{"radius", c.grid.radius}, {"n", c.grid.n}}},
                {"integrator",
                 {{"rtol", c.integrator.rtol},
                  {"atol", c.integrator.atol},
                  {"initial_step", c.integrator.initial_step},
                  {"event_tol", c.integrator.event_tol},
                  {"max_steps", c.integrator.max_steps},
                  {"limit_z_floor", c.integrator.limit_z_floor}}},
                {"threads", c.threads},
                {"out_dir", c.out_dir}};
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) known = true;
        if (!known) {
            throw std::invalid_argument(std::string("config: unknown key '") + it.key() + "' in " +
                                        where);
        }
    }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: root must be an object");
    reject_unknown(j,
                   {"schema", "id", "theta", "phi", "eps_schedule", "delta_schedule", "horizon",
                    "samples", "grid", "integrator", "threads", "out_dir"},
                   "root");
    if (j.contains("schema") && j.at("schema") != "roughflow-config-v1") {
        throw std::invalid_argument("config: unsupported schema");
    }
    ExperimentConfig c;
    if (j.contains("id")) c.id = j.at("id").get<std::string>();
    if (j.contains("theta")) c.theta = j.at("theta").get<double>();
    if (j.contains("phi")) c.phi = j.at("phi").get<double>();
    if (j.contains("eps_schedule")) c.eps_schedule = j.at("eps_schedule").get<std::vector<double>>();
    if (j.contains("delta_schedule"))
        c.delta_schedule = j.at("delta_schedule").get<std::vector<double>>();
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<double>();
    if (j.contains("samples")) {
        const json& s = j.at("samples");
        reject_unknown(s, {"count", "seed", "z_max", "ratio_max"}, "samples");
        if (s.contains("count")) c.samples.count = s.at("count").get<int>();
        if (s.contains("seed")) c.samples.seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("z_max")) c.samples.z_max = s.at("z_max").get<double>();
        if (s.contains("ratio_max")) c.samples.ratio_max = s.at("ratio_max").get<double>();
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        reject_unknown(g, {"radius", "n"}, "grid");
        if (g.contains("radius")) c.grid.radius = g.at("radius").get<double>();
        if (g.contains("n")) c.grid.n = g.at("n").get<int>();
    }
    if (j.contains("integrator")) {
        const json& g = j.at("integrator");
        reject_unknown(g, {"rtol", "atol", "initial_step", "event_tol", "max_steps", "limit_z_floor"},
                       "integrator");
        if (g.contains("rtol")) c.integrator.rtol = g.at("rtol").get<double>();
        if (g.contains("atol")) c.integrator.atol = g.at("atol").get<double>();
        if (g.contains("initial_step")) c.integrator.initial_step = g.at("initial_step").get<double>();
        if (g.contains("event_tol")) c.integrator.event_tol = g.at("event_tol").get<double>();
        if (g.contains("max_steps")) c.integrator.max_steps = g.at("max_steps").get<long>();
        if (g.contains("limit_z_floor"))
            c.integrator.limit_z_floor = g.at("limit_z_floor").get<double>();
    }
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    return c;
}

std::pair<double, double> fit_loglog(const std::vector<double>& eps, const std::vector<double>& err) {
    if (eps.size() != err.size() || eps.size() < 2) {
        throw std::invalid_argument("fit_loglog: need matching tables with >= 2 entries");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double x = std::log(eps[i]);
        const double y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    return {slope, intercept};
}

std::vector<double> make_time_grid(double T, double dt) {
    const int n = std::max(2, int(std::ceil(T / dt)));
    std::vector<double> grid(n + 1);
    for (int i = 0; i <= n; ++i) grid[i] = T * double(i) / n;
    return grid;
}

std::vector<Point3> sample_region_starts(const ApproxParams& g, const SampleSpec& spec, bool upper) {
    const double z_lo = (upper ? g.alpha : g.eta) * g.eps * 1.05;
    if (!(spec.z_max > z_lo)) {
        throw std::invalid_argument("sample_region_starts: z_max too small for this eps");
    }
    HaltonSampler hs(spec.seed);
    std::vector<Point3> pts;
    pts.reserve(spec.count);
    for (int i = 0; i < spec.count; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        const double q = spec.ratio_max * (0.05 + 0.95 * u);
        const double az = 2.0 * M_PI * v;
        const double z = z_lo + (spec.z_max - z_lo) * w;
        const double r = std::sqrt(q * z);
        pts.push_back({r * std::cos(az), r * std::sin(az), upper ? z : -z});
    }
    return pts;
}

void write_experiment_outputs(const std::string& out_dir, const json& report,
                              const std::vector<std::pair<std::string, std::string>>& files) {
    if (out_dir.empty()) return;
    const fs::path out(out_dir);
    const fs::path tmp = out.parent_path().empty()
                             ? fs::path(out.string() + ".tmp")
                             : out.parent_path() / (out.filename().string() + ".tmp");
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    {
        std::ofstream os(tmp / "report.json");
        os << report.dump(2) << '\n';
    }
    for (const auto& [name, content] : files) {
        std::ofstream os(tmp / name);
        os << content;
    }
    fs::remove_all(out);
    fs::rename(tmp, out);
}

// =============================================================================
// Report serialization
// =============================================================================

namespace {

json base_report(const ExperimentConfig& cfg, std::uint64_t hash) {
    return json{{"schema", "roughflow-report-v1"},
                {"tool_version", "0.1.0"},
                {"manifest_hash", hash},
                {"config", config_to_json(cfg)}};
}

std::uint64_t hash_config(const ExperimentConfig& cfg) { return fnv1a64(config_to_json(cfg).dump()); }

}  // namespace

json ConvergenceReport::to_json() const {
    json j = base_report(config, manifest_hash);
    j["eps"] = eps;
    j["errors"] = errors;
    if (!errors_z.empty()) j["errors_z"] = errors_z;
    if (!errors_planar.empty()) j["errors_planar"] = errors_planar;
    j["slope"] = slope;
    j["intercept"] = intercept;
    if (!errors_z.empty()) j["slope_z"] = slope_z;
    j["cross_check_max"] = cross_check_max;
    j["cross_check_budget"] = cross_check_budget;
    j["engine_failures"] = engine_failures;
    j["time_grid_points"] = time_grid_points;
    j["pass"] = pass;
    j["notes"] = notes;
    return j;
}

json NonuniquenessReport::to_json() const {
    json j = base_report(config, manifest_hash);
    j["eps"] = eps;
    j["d_theta"] = d_theta;
    j["d_phi"] = d_phi;
    j["D"] = D;
    j["D_coarse"] = D_coarse;
    j["grid_change"] = grid_change;
    j["weak_star_evidence"] = pairing_errors_theta;
    j["pass"] = pass;
    j["notes"] = notes;
    return j;
}

json DiagonalMergeReport::to_json() const {
    json j = base_report(config, manifest_hash);
    json terms_j = json::array();
    for (const auto& t : terms) {
        terms_j.push_back(json{{"index", t.index},
                               {"angle", t.angle == 'T' ? "theta" : "phi"},
                               {"eps", t.eps},
                               {"delta", t.delta},
                               {"error_vs_limit", t.error_vs_limit}});
    }
    j["terms"] = terms_j;
    j["consecutive_gaps"] = consecutive_gaps;
    j["D"] = D;
    j["even_decreasing"] = even_decreasing;
    j["odd_decreasing"] = odd_decreasing;
    j["gap_bound_holds"] = gap_bound_holds;
    j["pass"] = pass;
    return j;
}

json Dpl2dReport::to_json() const {
    json j = base_report(config, manifest_hash);
    j["max_coincidence_gap"] = max_coincidence_gap;
    j["signs_differ_after"] = signs_differ_after;
    j["max_ode_residual"] = max_ode_residual;
    j["pass"] = pass;
    return j;
}

// =============================================================================
// Forward flow convergence
// =============================================================================

ConvergenceReport run_flow_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    ConvergenceReport rep;
    rep.config = cfg;
    rep.manifest_hash = hash_config(cfg);

    const double eps_max = cfg.eps_schedule.front();
    const double eps_min = cfg.eps_schedule.back();
    const ApproxParams g_max(eps_max, cfg.theta);
    const std::vector<Point3> starts = sample_region_starts(g_max, cfg.samples, true);

    double dt = std::min(zone_transit_time(ApproxParams(eps_min, cfg.theta)) / 4.0, cfg.horizon / 64.0);

    std::vector<double> errors(cfg.eps_schedule.size(), 0.0);
    auto compute_errors = [&](const std::vector<double>& grid) {
        std::vector<double> errs(cfg.eps_schedule.size(), 0.0);
        for (std::size_t ei = 0; ei < cfg.eps_schedule.size(); ++ei) {
            const ApproxParams g(cfg.eps_schedule[ei], cfg.theta);
            std::vector<double> per(starts.size(), 0.0);
            parallel_for(starts.size(), cfg.threads, [&](std::size_t si) {
                double sup = 0.0;
                for (double t : grid) {
                    const Point3 a = flow_eps_closed(g, t, starts[si]);
                    const Point3 b = flow_limit(cfg.theta, t, starts[si]);
                    sup = std::max(sup, (a - b).norm());
                }
                per[si] = sup;
            });
            for (double e : per) errs[ei] = std::max(errs[ei], e);
        }
        return errs;
    };

    // sup over a time grid, refined until the reported value is stable to 1%
    std::vector<double> grid = make_time_grid(cfg.horizon, dt);
    errors = compute_errors(grid);
    for (int round = 0; round < 5; ++round) {
        dt /= 2.0;
        grid = make_time_grid(cfg.horizon, dt);
        const std::vector<double> refined = compute_errors(grid);
        double worst = 0.0;
        for (std::size_t i = 0; i < errors.size(); ++i) {
            worst = std::max(worst, std::fabs(refined[i] - errors[i]) / refined[i]);
        }
        errors = refined;
        if (worst < 0.01) break;
    }
    rep.time_grid_points = int(grid.size());

    // engine cross-check on every 10th sample at the finest eps
    {
        const ApproxParams g(eps_min, cfg.theta);
        double worst = 0.0, budget = 0.0;
        int failures = 0;
        for (std::size_t si = 0; si < starts.size(); si += 10) {
            const TrajectoryRecord rec = integrate(Field::approx(g), starts[si], cfg.horizon,
                                                   cfg.integrator);
            if (rec.status != IntegrationStatus::Completed) {
                ++failures;
                continue;
            }
            const Point3 closed = flow_eps_closed(g, cfg.horizon, starts[si]);
            worst = std::max(worst, (rec.final_state() - closed).norm());
            budget = std::max(budget, 10.0 * double(rec.n_steps == 0 ? rec.times.size() : rec.n_steps) *
                                          (cfg.integrator.atol + cfg.integrator.rtol));
        }
        rep.cross_check_max = worst;
        rep.cross_check_budget = std::max(budget, 1e-8);
        rep.engine_failures = failures;
    }

    rep.eps = cfg.eps_schedule;
    rep.errors = errors;
    std::tie(rep.slope, rep.intercept) = fit_loglog(rep.eps, rep.errors);
    rep.pass = strictly_decreasing(errors) && rep.slope >= 0.4 && rep.slope <= 1.1 &&
               rep.cross_check_max <= rep.cross_check_budget && rep.engine_failures == 0;
    if (!strictly_decreasing(errors)) rep.notes.push_back("errors not strictly decreasing");

    std::string csv = "eps,sup_error\n";
    for (std::size_t i = 0; i < rep.eps.size(); ++i)
        csv += fmt_g(rep.eps[i]) + "," + fmt_g(rep.errors[i]) + "\n";
    const std::string gp =
        "set logscale xy\nset datafile separator ','\nset key left top\n"
        "plot 'errors.csv' skip 1 using 1:2 with linespoints title 'sup error', \\\n"
        "     exp(" + fmt_g(rep.intercept) + ") * x**" + fmt_g(rep.slope) + " title 'fit'\n";
    write_experiment_outputs(cfg.out_dir, rep.to_json(), {{"errors.csv", csv}, {"plot.gp", gp}});
    return rep;
}

// =============================================================================
// Inverse flow convergence
// =============================================================================

ConvergenceReport run_inverse_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    ConvergenceReport rep;
    rep.config = cfg;
    rep.manifest_hash = hash_config(cfg);

    const double eps_max = cfg.eps_schedule.front();
    const double eps_min = cfg.eps_schedule.back();
    const ApproxParams g_max(eps_max, cfg.theta);
    const std::vector<Point3> starts = sample_region_starts(g_max, cfg.samples, false);

    double dt = std::min(zone_transit_time(ApproxParams(eps_min, cfg.theta)) / 4.0, cfg.horizon / 64.0);

    const std::size_t ne = cfg.eps_schedule.size();
    std::vector<double> err_all(ne, 0.0), err_z(ne, 0.0), err_pl(ne, 0.0);
    int failures = 0;

    auto compute = [&](const std::vector<double>& grid) {
        std::vector<double> ea(ne, 0.0), ez(ne, 0.0), ep(ne, 0.0);
        int fail = 0;
        for (std::size_t ei = 0; ei < ne; ++ei) {
            const ApproxParams g(cfg.eps_schedule[ei], cfg.theta);
            const Field f = Field::approx(g);
            std::vector<std::array<double, 3>> per(starts.size(), {0.0, 0.0, 0.0});
            std::vector<char> bad(starts.size(), 0);
            IntegratorConfig ic = cfg.integrator;
            ic.record_steps = false;
            parallel_for(starts.size(), cfg.threads, [&](std::size_t si) {
                const TrajectoryRecord rec = integrate_backward(f, starts[si], cfg.horizon, ic, grid);
                if (rec.status != IntegrationStatus::Completed) {
                    bad[si] = 1;
                    return;
                }
                double sa = 0.0, sz = 0.0, sp = 0.0;
                for (double t : grid) {
                    if (t == 0.0) continue;
                    const Point3 a = rec.state_at(t);
                    const Point3 b = flow_limit_inverse(cfg.theta, t, starts[si]);
                    const Point3 d = a - b;
                    sa = std::max(sa, d.norm());
                    sz = std::max(sz, std::fabs(d.z));
                    sp = std::max(sp, std::hypot(d.x, d.y));
                }
                per[si] = {sa, sz, sp};
            });
            for (std::size_t si = 0; si < starts.size(); ++si) {
                if (bad[si]) {
                    ++fail;
                    continue;
                }
                ea[ei] = std::max(ea[ei], per[si][0]);
                ez[ei] = std::max(ez[ei], per[si][1]);
                ep[ei] = std::max(ep[ei], per[si][2]);
            }
        }
        failures = fail;
        return std::array<std::vector<double>, 3>{ea, ez, ep};
    };

    std::vector<double> grid = make_time_grid(cfg.horizon, dt);
    auto res = compute(grid);
    for (int round = 0; round < 3; ++round) {
        dt /= 2.0;
        grid = make_time_grid(cfg.horizon, dt);
        auto refined = compute(grid);
        double worst = 0.0;
        for (std::size_t i = 0; i < ne; ++i)
            worst = std::max(worst, std::fabs(refined[0][i] - res[0][i]) / refined[0][i]);
        res = refined;
        if (worst < 0.01) break;
    }
    err_all = res[0];
    err_z = res[1];
    err_pl = res[2];
    rep.time_grid_points = int(grid.size());

    // reversibility spot check at the finest eps: backward then forward
    {
        const ApproxParams g(eps_min, cfg.theta);
        const Field f = Field::approx(g);
        IntegratorConfig ic = cfg.integrator;
        ic.record_steps = false;
        double worst = 0.0, budget = 0.0;
        for (std::size_t si = 0; si < starts.size(); si += 10) {
            const TrajectoryRecord back = integrate_backward(f, starts[si], cfg.horizon, ic);
            if (back.status != IntegrationStatus::Completed) continue;
            const TrajectoryRecord fwd = integrate(f, back.final_state(), cfg.horizon, ic);
            if (fwd.status != IntegrationStatus::Completed) continue;
            worst = std::max(worst, (fwd.final_state() - starts[si]).norm());
            budget = std::max(budget, 10.0 * double(back.n_steps + fwd.n_steps + 2000) *
                                          (cfg.integrator.atol + cfg.integrator.rtol));
        }
        rep.cross_check_max = worst;
        rep.cross_check_budget = std::max(budget, 1e-8);
    }

    rep.eps = cfg.eps_schedule;
    rep.errors = err_all;
    rep.errors_z = err_z;
    rep.errors_planar = err_pl;
    rep.engine_failures = failures;
    std::tie(rep.slope, rep.intercept) = fit_loglog(rep.eps, rep.errors);
    rep.slope_z = fit_loglog(rep.eps, rep.errors_z).first;
    rep.pass = strictly_decreasing(err_all) && rep.slope >= 0.4 && rep.slope <= 1.1 &&
               rep.slope_z >= 0.9 && rep.engine_failures == 0 &&
               rep.cross_check_max <= rep.cross_check_budget;

    std::string csv = "eps,sup_error,z_error,planar_error\n";
    for (std::size_t i = 0; i < rep.eps.size(); ++i) {
        csv += fmt_g(rep.eps[i]) + "," + fmt_g(rep.errors[i]) + "," + fmt_g(rep.errors_z[i]) + "," +
               fmt_g(rep.errors_planar[i]) + "\n";
    }
    write_experiment_outputs(cfg.out_dir, rep.to_json(), {{"errors.csv", csv}});
    return rep;
}

// =============================================================================
// Nonuniqueness of limits
// =============================================================================

NonuniquenessReport run_nonuniqueness(const ExperimentConfig& cfg) {
    cfg.validate(true);
    NonuniquenessReport rep;
    rep.config = cfg;
    rep.manifest_hash = hash_config(cfg);

    const InitialDatum u0 = default_datum();
    const double T = cfg.horizon;
    const std::vector<double> times{T};
    const double R = cfg.grid.radius;
    const int n = cfg.grid.n;
    const int n_coarse = std::max(8, (n * 3) / 4);

    const GridField u_th = sample_exact_solution(cfg.theta, u0, R, n, times, cfg.threads);
    const GridField u_ph = sample_exact_solution(cfg.phi, u0, R, n, times, cfg.threads);
    rep.D = l1_loc_distance(u_th, 0, u_ph, 0);

    const GridField u_th_c = sample_exact_solution(cfg.theta, u0, R, n_coarse, times, cfg.threads);
    const GridField u_ph_c = sample_exact_solution(cfg.phi, u0, R, n_coarse, times, cfg.threads);
    rep.D_coarse = l1_loc_distance(u_th_c, 0, u_ph_c, 0);
    rep.grid_change = rep.D > 0.0 ? std::fabs(rep.D - rep.D_coarse) / rep.D : 0.0;

    const std::vector<SpaceTimeBump> bumps{
        {{0.0, 0.0, -1.0}, 0.6, T + 1.0},
        {{0.5, 0.0, -0.75}, 0.6, T + 1.0},
        {{0.0, -0.5, -1.25}, 0.6, T + 1.0},
    };
    rep.pairing_errors_theta.assign(bumps.size(), {});

    for (double eps : cfg.eps_schedule) {
        const GridField ue_th = sample_eps_solution(ApproxParams(eps, cfg.theta), u0, R, n, times,
                                                    cfg.integrator, cfg.threads);
        const GridField ue_ph = sample_eps_solution(ApproxParams(eps, cfg.phi), u0, R, n, times,
                                                    cfg.integrator, cfg.threads);
        rep.eps.push_back(eps);
        rep.d_theta.push_back(l1_loc_distance(ue_th, 0, u_th, 0));
        rep.d_phi.push_back(l1_loc_distance(ue_ph, 0, u_ph, 0));
        for (std::size_t bi = 0; bi < bumps.size(); ++bi) {
            auto testfn = [&](const Point3& p) { return bumps[bi].value(0.0, p); };
            rep.pairing_errors_theta[bi].push_back(
                std::fabs(weak_star_pairing(ue_th, 0, testfn) - weak_star_pairing(u_th, 0, testfn)));
        }
    }

    const double floor = 5.0 * std::fabs(rep.D - rep.D_coarse);
    const bool stable = rep.grid_change <= 0.10;
    if (!stable) rep.notes.push_back("grid instability: D changed more than 10% under refinement");
    rep.pass = strictly_decreasing(rep.d_theta) && strictly_decreasing(rep.d_phi) && stable &&
               rep.D > floor;

    std::string csv = "eps,d_theta,d_phi\n";
    for (std::size_t i = 0; i < rep.eps.size(); ++i)
        csv += fmt_g(rep.eps[i]) + "," + fmt_g(rep.d_theta[i]) + "," + fmt_g(rep.d_phi[i]) + "\n";
    std::ostringstream gth, gph;
    write_grid_csv(gth, u_th);
    write_grid_csv(gph, u_ph);
    write_experiment_outputs(cfg.out_dir, rep.to_json(),
                             {{"distances.csv", csv},
                              {"u_theta.csv", gth.str()},
                              {"u_phi.csv", gph.str()}});
    return rep;
}

// =============================================================================
// Mollification stability
// =============================================================================

namespace {

MollifyGridSpec mollify_box_for(const std::vector<TrajectoryRecord>& base, double delta,
                                int threads) {
    double rmax = 0.0, zmin = 0.0, zmax = 0.0;
    for (const auto& rec : base) {
        for (const auto& s : rec.states) {
            rmax = std::max(rmax, std::sqrt(s.radius2()));
            zmin = std::min(zmin, s.z);
            zmax = std::max(zmax, s.z);
        }
    }
    MollifyGridSpec spec;
    spec.r_max = rmax + 2.0 * delta + 0.05;
    spec.z_min = zmin - 2.0 * delta - 0.05;
    spec.z_max = zmax + 2.0 * delta + 0.05;
    spec.spacing = delta / 4.0;
    spec.threads = threads;
    return spec;
}

}  // namespace

ConvergenceReport run_mollification_stability(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.delta_schedule.size() < 2) {
        throw std::invalid_argument("mollification stability: need at least two deltas");
    }
    for (std::size_t i = 0; i + 1 < cfg.delta_schedule.size(); ++i) {
        if (!(cfg.delta_schedule[i + 1] < cfg.delta_schedule[i])) {
            throw std::invalid_argument("mollification stability: delta schedule must decrease");
        }
    }

    ConvergenceReport rep;
    rep.config = cfg;
    rep.manifest_hash = hash_config(cfg);
    rep.notes.push_back("eps column holds the delta schedule; eps fixed at schedule front");

    const double eps = cfg.eps_schedule.front();
    const ApproxParams g(eps, cfg.theta);
    SampleSpec sspec = cfg.samples;
    sspec.z_max = std::min(sspec.z_max, 0.95 * std::sqrt(4.0 * cfg.horizon));
    const std::vector<Point3> starts = sample_region_starts(g, sspec, true);

    const std::vector<double> grid = make_time_grid(cfg.horizon, cfg.horizon / 256.0);
    IntegratorConfig ic = cfg.integrator;
    ic.record_steps = true;

    const Field base_field = Field::approx(g);
    std::vector<TrajectoryRecord> base(starts.size());
    parallel_for(starts.size(), cfg.threads, [&](std::size_t si) {
        base[si] = integrate(base_field, starts[si], cfg.horizon, ic, grid);
    });

    for (double delta : cfg.delta_schedule) {
        const MollifyGridSpec spec = mollify_box_for(base, delta, cfg.threads);
        const Field smooth = mollify_field(base_field, delta, spec);
        std::vector<double> per(starts.size(), 0.0);
        IntegratorConfig ic2 = cfg.integrator;
        ic2.record_steps = false;
        parallel_for(starts.size(), cfg.threads, [&](std::size_t si) {
            const TrajectoryRecord rec = integrate(smooth, starts[si], cfg.horizon, ic2, grid);
            double sup = 0.0;
            for (double t : grid) {
                sup = std::max(sup, (rec.state_at(t) - base[si].state_at(t)).norm());
            }
            per[si] = sup;
        });
        double mean = 0.0;
        for (double e : per) mean += e;
        rep.eps.push_back(delta);
        rep.errors.push_back(mean / double(starts.size()));
    }

    std::tie(rep.slope, rep.intercept) = fit_loglog(rep.eps, rep.errors);
    rep.pass = strictly_decreasing(rep.errors);
    rep.time_grid_points = int(grid.size());

    std::string csv = "delta,mean_sup_flow_error\n";
    for (std::size_t i = 0; i < rep.eps.size(); ++i)
        csv += fmt_g(rep.eps[i]) + "," + fmt_g(rep.errors[i]) + "\n";
    write_experiment_outputs(cfg.out_dir, rep.to_json(), {{"errors.csv", csv}});
    return rep;
}

// =============================================================================
// Transport on an arbitrary field (mollified sequences)
// =============================================================================

namespace {

bool clear_of_support(const ApproxParams& g, const Point3& p, double m) {
    const double r = std::sqrt(p.radius2());
    if (r < m) return false;
    const double rm2 = (r - m) * (r - m);
    if (rm2 <= std::fabs(p.z) + m) return false;
    const double ae = g.alpha * g.eps;
    if (std::fabs(p.z) <= ae + m && rm2 <= ae + m) return false;
    return true;
}

}  // namespace

GridField sample_field_solution(const Field& f, const ApproxParams& zone_params,
                                const InitialDatum& u0, double R, int n,
                                std::span<const double> times, const IntegratorConfig& cfg,
                                int threads, double clear_margin) {
    GridField g;
    g.radius = R;
    g.n = n;
    g.times.assign(times.begin(), times.end());
    g.values.assign(times.size() * g.nodes(), 0.0);
    double tmax = 0.0;
    for (double t : times) tmax = std::max(tmax, t);
    IntegratorConfig c = cfg;
    c.record_steps = false;

    std::vector<double> stamps(times.begin(), times.end());
    std::sort(stamps.begin(), stamps.end());

    parallel_for(g.nodes(), threads, [&](std::size_t idx) {
        if (!g.inside(idx)) return;
        const Point3 p = g.node(idx);
        if (tmax == 0.0 || clear_of_support(zone_params, p, clear_margin)) {
            const double v = u0.eval(p);
            for (std::size_t ti = 0; ti < g.times.size(); ++ti) g.values[ti * g.nodes() + idx] = v;
            return;
        }
        const TrajectoryRecord rec = integrate_backward(f, p, tmax, c, stamps);
        for (std::size_t ti = 0; ti < g.times.size(); ++ti) {
            const double t = g.times[ti];
            g.values[ti * g.nodes() + idx] = t == 0.0 ? u0.eval(p) : u0.eval(rec.state_at(t));
        }
    });
    return g;
}

// =============================================================================
// Diagonal merge
// =============================================================================

DiagonalMergeReport run_diagonal_merge(const ExperimentConfig& cfg) {
    cfg.validate(true);
    const std::size_t K = std::min(cfg.eps_schedule.size(), cfg.delta_schedule.size());
    if (K < 2) throw std::invalid_argument("diagonal merge: need >= 2 (eps, delta) pairs");

    DiagonalMergeReport rep;
    rep.config = cfg;
    rep.manifest_hash = hash_config(cfg);

    const InitialDatum u0 = default_datum();
    const double T = cfg.horizon;
    const std::vector<double> times{T};
    const double R = cfg.grid.radius;
    const int n = cfg.grid.n;

    const GridField u_th = sample_exact_solution(cfg.theta, u0, R, n, times, cfg.threads);
    const GridField u_ph = sample_exact_solution(cfg.phi, u0, R, n, times, cfg.threads);
    rep.D = l1_loc_distance(u_th, 0, u_ph, 0);

    const double z_top = std::sqrt(R * R + 4.0 * T) + 0.1;

    GridField prev;
    bool have_prev = false;
    std::vector<double> even_err, odd_err;

    for (std::size_t k = 0; k < K; ++k) {
        for (int half = 0; half < 2; ++half) {
            const bool is_theta = half == 0;
            const double angle = is_theta ? cfg.theta : cfg.phi;
            const double eps = cfg.eps_schedule[k];
            const double delta = cfg.delta_schedule[k];
            const ApproxParams g(eps, angle);

            MollifyGridSpec spec;
            spec.r_max = std::sqrt(z_top) + 0.1;
            spec.z_min = -z_top;
            spec.z_max = z_top;
            spec.spacing = delta / 4.0;
            spec.threads = cfg.threads;
            const Field smooth = mollify_field(Field::approx(g), delta, spec);

            const GridField u_n = sample_field_solution(smooth, g, u0, R, n, times, cfg.integrator,
                                                        cfg.threads, delta);
            const double err = l1_loc_distance(u_n, 0, is_theta ? u_th : u_ph, 0);

            DiagonalMergeReport::Term term;
            term.index = int(2 * k + half);
            term.angle = is_theta ? 'T' : 'P';
            term.eps = eps;
            term.delta = delta;
            term.error_vs_limit = err;
            rep.terms.push_back(term);
            (is_theta ? even_err : odd_err).push_back(err);

            if (have_prev) rep.consecutive_gaps.push_back(l1_loc_distance(prev, 0, u_n, 0));
            prev = u_n;
            have_prev = true;
        }
    }

    rep.even_decreasing = strictly_decreasing(even_err) && even_err.back() < rep.D / 4.0;
    rep.odd_decreasing = strictly_decreasing(odd_err) && odd_err.back() < rep.D / 4.0;
    rep.gap_bound_holds = !rep.consecutive_gaps.empty();
    for (double gap : rep.consecutive_gaps) {
        if (!(gap >= rep.D / 2.0)) rep.gap_bound_holds = false;
    }
    rep.pass = rep.even_decreasing && rep.odd_decreasing && rep.gap_bound_holds;

    std::string csv = "index,angle,eps,delta,error_vs_limit\n";
    for (const auto& t : rep.terms) {
        csv += std::to_string(t.index) + "," + (t.angle == 'T' ? "theta" : "phi") + "," +
               fmt_g(t.eps) + "," + fmt_g(t.delta) + "," + fmt_g(t.error_vs_limit) + "\n";
    }
    std::string gaps = "n,gap\n";
    for (std::size_t i = 0; i < rep.consecutive_gaps.size(); ++i)
        gaps += std::to_string(i) + "," + fmt_g(rep.consecutive_gaps[i]) + "\n";
    write_experiment_outputs(cfg.out_dir, rep.to_json(), {{"terms.csv", csv}, {"gaps.csv", gaps}});
    return rep;
}

// =============================================================================
// 2D demo
// =============================================================================

Dpl2dReport run_dpl2d_demo(const ExperimentConfig& cfg) {
    cfg.validate();
    Dpl2dReport rep;
    rep.config = cfg;
    rep.manifest_hash = hash_config(cfg);

    HaltonSampler hs(cfg.samples.seed);
    const int count = std::min(cfg.samples.count, 25);
    bool signs_ok = true;
    double coincide = 0.0, resid = 0.0;
    std::string csv = "sample,t,x1,x2,x1_alt,x2_alt\n";

    for (int i = 0; i < count; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        (void)w;
        const double y = 0.6 + 0.6 * v;
        const double x = (0.15 + 0.7 * u) * y;
        const Vec2 p{x, y};
        const double t_cross = y * y / 2.0;

        for (int m = 0; m <= 100; ++m) {
            const double t = 1.6 * t_cross * m / 100.0;
            const Dpl2dPair pair = dpl2d_flows(t, p);
            csv += std::to_string(i) + "," + fmt_g(t) + "," + fmt_g(pair.plain.x) + "," +
                   fmt_g(pair.plain.y) + "," + fmt_g(pair.mirrored.x) + "," + fmt_g(pair.mirrored.y) +
                   "\n";
            if (t <= t_cross) {
                coincide = std::max(coincide, std::hypot(pair.plain.x - pair.mirrored.x,
                                                         pair.plain.y - pair.mirrored.y));
            } else if (t >= 1.05 * t_cross) {
                if (!(pair.plain.x * pair.mirrored.x < 0.0)) signs_ok = false;
            }

            // ODE residual by central differences, away from the crossing time
            if (std::fabs(t - t_cross) >= 0.15 * t_cross && t > 0.0) {
                const double h = 1e-6 * std::max(1.0, t);
                for (int which = 0; which < 2; ++which) {
                    const Dpl2dPair pp = dpl2d_flows(t + h, p);
                    const Dpl2dPair pm = dpl2d_flows(t - h, p);
                    const Vec2 cur = which == 0 ? pair.plain : pair.mirrored;
                    const Vec2 fwd = which == 0 ? pp.plain : pp.mirrored;
                    const Vec2 bwd = which == 0 ? pm.plain : pm.mirrored;
                    const Vec2 vel{(fwd.x - bwd.x) / (2.0 * h), (fwd.y - bwd.y) / (2.0 * h)};
                    const Vec2 b = eval_b_dpl2d(cur);
                    resid = std::max(resid, std::hypot(vel.x - b.x, vel.y - b.y));
                }
            }
        }
    }

    rep.max_coincidence_gap = coincide;
    rep.signs_differ_after = signs_ok;
    rep.max_ode_residual = resid;
    rep.pass = coincide <= 1e-12 && signs_ok && resid <= 1e-6;
    write_experiment_outputs(cfg.out_dir, rep.to_json(), {{"trajectories.csv", csv}});
    return rep;
}

}  // namespace roughflow
