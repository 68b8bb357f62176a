#include "roughflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <stdexcept>
#include <string>

#include "roughflow/exact_flows.hpp"
#include "roughflow/util.hpp"

namespace roughflow {

InitialDatum default_datum() {
    InitialDatum d;
    d.eval = [](const Point3& p) { return p.x * std::exp(-p.norm2()); };
    d.sup_bound = 0.4289;  // max of |x| e^{-x^2} at |x| = 1/sqrt(2)
    d.lip_bound = 1.01;    // |grad| peaks at 1 (origin)
    d.ref_radius = 3.0;
    return d;
}

InitialDatum radial_datum() {
    InitialDatum d;
    d.eval = [](const Point3& p) {
        const double r2 = p.radius2();
        return (r2 + 0.5 * p.z) * std::exp(-p.norm2());
    };
    d.sup_bound = 1.0;
    d.lip_bound = 2.5;
    d.ref_radius = 3.0;
    return d;
}

bool validate_datum(const InitialDatum& u0, std::span<const Point3> samples) {
    std::vector<double> vals(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        vals[i] = u0.eval(samples[i]);
        if (std::fabs(vals[i]) > u0.sup_bound) return false;
    }
    const double R2 = u0.ref_radius * u0.ref_radius;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].norm2() > R2) continue;
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            if (samples[j].norm2() > R2) continue;
            const double dist = (samples[i] - samples[j]).norm();
            if (dist < 1e-12) continue;
            if (std::fabs(vals[i] - vals[j]) > u0.lip_bound * dist) return false;
        }
    }
    return true;
}

double solve_exact(double theta, const InitialDatum& u0, double t, const Point3& p) {
    return u0.eval(flow_limit_inverse(theta, t, p));
}

double solve_eps(const ApproxParams& params, const InitialDatum& u0, double t, const Point3& p,
                 const IntegratorConfig& cfg) {
    if (t < 0.0) throw std::invalid_argument("solve_eps: t must be >= 0");
    if (t == 0.0 || classify_eps(params, p) == RegionLabel::ExteriorEps) return u0.eval(p);
    IntegratorConfig c = cfg;
    c.record_steps = false;
    const TrajectoryRecord rec = integrate_backward(Field::approx(params), p, t, c);
    if (rec.status != IntegrationStatus::Completed) {
        throw std::runtime_error(std::string("solve_eps: backward integration ended with status ") +
                                 status_name(rec.status));
    }
    return u0.eval(rec.final_state());
}

Point3 GridField::node(std::size_t flat) const {
    const std::size_t nn = std::size_t(n);
    const std::size_t k = flat / (nn * nn);
    const std::size_t j = (flat / nn) % nn;
    const std::size_t i = flat % nn;
    const double step = h();
    return {-radius + (double(i) + 0.5) * step, -radius + (double(j) + 0.5) * step,
            -radius + (double(k) + 0.5) * step};
}

GridField sample_exact_solution(double theta, const InitialDatum& u0, double R, int n,
                                std::span<const double> times, int threads) {
    GridField g;
    g.radius = R;
    g.n = n;
    g.times.assign(times.begin(), times.end());
    g.values.assign(times.size() * g.nodes(), 0.0);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const double t = times[ti];
        parallel_for(g.nodes(), threads, [&](std::size_t idx) {
            if (!g.inside(idx)) return;
            g.values[ti * g.nodes() + idx] = solve_exact(theta, u0, t, g.node(idx));
        });
    }
    return g;
}

GridField sample_eps_solution(const ApproxParams& params, const InitialDatum& u0, double R, int n,
                              std::span<const double> times, const IntegratorConfig& cfg,
                              int threads) {
    GridField g;
    g.radius = R;
    g.n = n;
    g.times.assign(times.begin(), times.end());
    g.values.assign(times.size() * g.nodes(), 0.0);
    const Field f = Field::approx(params);
    IntegratorConfig c = cfg;
    c.record_steps = false;

    parallel_for(g.nodes(), threads, [&](std::size_t idx) {
        if (!g.inside(idx)) return;
        const Point3 p = g.node(idx);
        if (classify_eps(params, p) == RegionLabel::ExteriorEps) {
            const double v = u0.eval(p);
            for (std::size_t ti = 0; ti < g.times.size(); ++ti)
                g.values[ti * g.nodes() + idx] = v;
            return;
        }
        // One backward trajectory serves all stamps.
        double tmax = 0.0;
        for (double t : g.times) tmax = std::max(tmax, t);
        if (tmax == 0.0) {
            for (std::size_t ti = 0; ti < g.times.size(); ++ti)
                g.values[ti * g.nodes() + idx] = u0.eval(p);
            return;
        }
        std::vector<double> stamps(g.times.begin(), g.times.end());
        std::sort(stamps.begin(), stamps.end());
        const TrajectoryRecord rec = integrate_backward(f, p, tmax, c, stamps);
        for (std::size_t ti = 0; ti < g.times.size(); ++ti) {
            const double t = g.times[ti];
            g.values[ti * g.nodes() + idx] =
                t == 0.0 ? u0.eval(p) : u0.eval(rec.state_at(t));
        }
    });
    return g;
}

void write_grid_csv(std::ostream& os, const GridField& g) {
    os << std::setprecision(17);
    os << "# radius=" << g.radius << " n=" << g.n << " times=";
    for (std::size_t i = 0; i < g.times.size(); ++i) os << (i ? ";" : "") << g.times[i];
    os << '\n' << "node";
    for (std::size_t i = 0; i < g.times.size(); ++i) os << ",u" << i;
    os << '\n';
    for (std::size_t idx = 0; idx < g.nodes(); ++idx) {
        os << idx;
        for (std::size_t ti = 0; ti < g.times.size(); ++ti) os << ',' << g.value(ti, idx);
        os << '\n';
    }
}

GridField read_grid_csv(std::istream& is) {
    GridField g;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# radius=", 0) != 0) {
        throw std::invalid_argument("read_grid_csv: missing header");
    }
    {
        const std::size_t rpos = line.find("radius=") + 7;
        const std::size_t npos = line.find(" n=") + 3;
        const std::size_t tpos = line.find(" times=") + 7;
        g.radius = std::stod(line.substr(rpos));
        g.n = std::stoi(line.substr(npos));
        std::string ts = line.substr(tpos);
        std::size_t start = 0;
        while (start < ts.size()) {
            std::size_t semi = ts.find(';', start);
            if (semi == std::string::npos) semi = ts.size();
            g.times.push_back(std::stod(ts.substr(start, semi - start)));
            start = semi + 1;
        }
    }
    std::getline(is, line);  // column header
    g.values.assign(g.times.size() * g.nodes(), 0.0);
    for (std::size_t idx = 0; idx < g.nodes(); ++idx) {
        if (!std::getline(is, line)) throw std::invalid_argument("read_grid_csv: truncated file");
        std::size_t pos = line.find(',');
        for (std::size_t ti = 0; ti < g.times.size(); ++ti) {
            std::size_t next = line.find(',', pos + 1);
            g.values[ti * g.nodes() + idx] = std::stod(line.substr(pos + 1, next - pos - 1));
            pos = next;
        }
    }
    return g;
}

namespace {

void check_match(const GridField& f, const GridField& g) {
    if (f.n != g.n || f.radius != g.radius) {
        throw std::invalid_argument("l1_loc_distance: grid mismatch");
    }
}

}  // namespace

double l1_loc_distance(const GridField& f, std::size_t fi, const GridField& g, std::size_t gi) {
    check_match(f, g);
    const double cell = f.h() * f.h() * f.h();
    double acc = 0.0;
    for (std::size_t idx = 0; idx < f.nodes(); ++idx) {
        if (!f.inside(idx)) continue;
        acc += std::fabs(f.value(fi, idx) - g.value(gi, idx));
    }
    return acc * cell;
}

double weak_star_pairing(const GridField& f, std::size_t fi,
                         const std::function<double(const Point3&)>& testfn) {
    const double cell = f.h() * f.h() * f.h();
    double acc = 0.0;
    for (std::size_t idx = 0; idx < f.nodes(); ++idx) {
        if (!f.inside(idx)) continue;
        acc += f.value(fi, idx) * testfn(f.node(idx));
    }
    return acc * cell;
}

// =============================================================================
// Space-time bump and weak-form residual
// =============================================================================

namespace {
// w(u) = (1-u)^4 on [0,1), 0 beyond; C^3 at the edge.
inline double wfun(double u) {
    if (u >= 1.0) return 0.0;
    const double t = 1.0 - u;
    return t * t * t * t;
}
inline double wprime(double u) {
    if (u >= 1.0) return 0.0;
    const double t = 1.0 - u;
    return -4.0 * t * t * t;
}
}  // namespace

double SpaceTimeBump::value(double t, const Point3& p) const {
    const double u = (p - center).norm2() / (radius * radius);
    const double v = (t / t_cut) * (t / t_cut);
    return wfun(u) * wfun(v);
}

double SpaceTimeBump::dt(double t, const Point3& p) const {
    const double u = (p - center).norm2() / (radius * radius);
    const double v = (t / t_cut) * (t / t_cut);
    return wfun(u) * wprime(v) * 2.0 * t / (t_cut * t_cut);
}

Vec3 SpaceTimeBump::grad(double t, const Point3& p) const {
    const double u = (p - center).norm2() / (radius * radius);
    const double v = (t / t_cut) * (t / t_cut);
    const double c = wprime(u) * wfun(v) * 2.0 / (radius * radius);
    return (p - center) * c;
}

double weak_form_residual(const GridField& u, const Field& b, const SpaceTimeBump& phi) {
    if (u.times.empty() || u.times.front() != 0.0) {
        throw std::invalid_argument("weak_form_residual: grid must start at t = 0");
    }
    if (u.times.back() < phi.t_cut) {
        throw std::invalid_argument("weak_form_residual: test support escapes the sampled box");
    }
    const double cell = u.h() * u.h() * u.h();

    // spatial integral of u (dphi/dt + b . grad phi) at one stamp
    auto space_term = [&](std::size_t ti) {
        const double t = u.times[ti];
        double acc = 0.0;
        for (std::size_t idx = 0; idx < u.nodes(); ++idx) {
            if (!u.inside(idx)) continue;
            const Point3 p = u.node(idx);
            const double ph_dt = phi.dt(t, p);
            const Vec3 gr = phi.grad(t, p);
            if (ph_dt == 0.0 && gr.x == 0.0 && gr.y == 0.0 && gr.z == 0.0) continue;
            acc += u.value(ti, idx) * (ph_dt + b(p).dot(gr));
        }
        return acc * cell;
    };

    std::vector<double> terms(u.times.size());
    for (std::size_t ti = 0; ti < u.times.size(); ++ti) terms[ti] = space_term(ti);
    double st = 0.0;  // trapezoid over the stamps
    for (std::size_t ti = 0; ti + 1 < u.times.size(); ++ti) {
        st += 0.5 * (u.times[ti + 1] - u.times[ti]) * (terms[ti] + terms[ti + 1]);
    }

    double init = 0.0;
    for (std::size_t idx = 0; idx < u.nodes(); ++idx) {
        if (!u.inside(idx)) continue;
        init += u.value(0, idx) * phi.value(0.0, u.node(idx));
    }
    init *= cell;

    return std::fabs(st + init);
}

}  // namespace roughflow
