#include "roughflow/ode_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

namespace roughflow {

void IntegratorConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
    if (!(event_tol > 0.0) || event_tol > atol) {
        throw std::invalid_argument("IntegratorConfig: event_tol must satisfy 0 < event_tol <= atol");
    }
    if (!(initial_step > 0.0) || !(max_step > 0.0)) throw std::invalid_argument("IntegratorConfig: steps must be positive");
    if (max_steps < 1) throw std::invalid_argument("IntegratorConfig: max_steps must be >= 1");
}

const char* status_name(IntegrationStatus s) {
    switch (s) {
        case IntegrationStatus::Completed: return "completed";
        case IntegrationStatus::StepLimit: return "step-limit";
        case IntegrationStatus::LeftDomain: return "left-domain";
        case IntegrationStatus::StepUnderflow: return "step-underflow";
    }
    return "?";
}

Point3 TrajectoryRecord::state_at(double t) const {
    if (times.empty()) throw std::logic_error("TrajectoryRecord::state_at: empty record");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t hi = std::size_t(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return states[lo] + (states[hi] - states[lo]) * w;
}

// =============================================================================
// Dormand-Prince 5(4) core, templated on the state dimension
// =============================================================================

namespace {

template <int N>
using State = std::array<double, N>;

// One Dormand-Prince step; fills ynew, yerr and the last stage k7 (= f(ynew)).
template <int N, typename Rhs>
void dopri5_step(const Rhs& rhs, const State<N>& y, const State<N>& k1, double h,
                 State<N>& ynew, State<N>& yerr, State<N>& k7) {
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 5179.0 / 57600.0, e3 = 7571.0 / 16695.0, e4 = 393.0 / 640.0,
                            e5 = -92097.0 / 339200.0, e6 = 187.0 / 2100.0, e7 = 1.0 / 40.0;

    State<N> k2, k3, k4, k5, k6, tmp;

    for (int i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    rhs(tmp, k2);
    for (int i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(tmp, k3);
    for (int i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(tmp, k4);
    for (int i = 0; i < N; ++i)
        tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(tmp, k5);
    for (int i = 0; i < N; ++i)
        tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(tmp, k6);
    for (int i = 0; i < N; ++i)
        ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs(ynew, k7);
    for (int i = 0; i < N; ++i) {
        const double y4 = y[i] + h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                      e6 * k6[i] + e7 * k7[i]);
        yerr[i] = ynew[i] - y4;
    }
}

template <int N>
double error_norm(const State<N>& y, const State<N>& ynew, const State<N>& yerr, double atol,
                  double rtol) {
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
        const double sc = atol + rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
        const double e = yerr[i] / sc;
        acc += e * e;
    }
    return std::sqrt(acc / N);
}

// =============================================================================
// Region plumbing
// =============================================================================

struct PlaneEvent {
    int id;      // InterfaceId value or kOriginFloorEvent
    double z0;   // plane height
    bool fatal;  // crossing ends the integration (left the engine's domain)
};

std::vector<PlaneEvent> active_planes(const Field& f, RegionLabel label, double floor_z) {
    std::vector<PlaneEvent> ev;
    if (f.kind() == FieldKind::Limit3D) {
        if (label == RegionLabel::PPlus) ev.push_back({kOriginFloorEvent, floor_z, true});
        if (label == RegionLabel::PMinus) ev.push_back({kOriginFloorEvent, -floor_z, true});
        return ev;
    }
    const ApproxParams& g = *f.approx_params();
    const double ae = g.alpha * g.eps, be = g.beta * g.eps;
    const double ge = g.gamma * g.eps, ee = g.eta * g.eps;
    switch (label) {
        case RegionLabel::PPlusEps: ev.push_back({int(InterfaceId::PlaneAlpha), ae, false}); break;
        case RegionLabel::TPlusEps:
            ev.push_back({int(InterfaceId::PlaneAlpha), ae, false});
            ev.push_back({int(InterfaceId::PlaneBeta), be, false});
            break;
        case RegionLabel::CylEps:
            ev.push_back({int(InterfaceId::PlaneBeta), be, false});
            ev.push_back({int(InterfaceId::PlaneGammaM), -ge, false});
            break;
        case RegionLabel::TMinusEps:
            ev.push_back({int(InterfaceId::PlaneGammaM), -ge, false});
            ev.push_back({int(InterfaceId::PlaneEtaM), -ee, false});
            break;
        case RegionLabel::PMinusEps: ev.push_back({int(InterfaceId::PlaneEtaM), -ee, false}); break;
        default: break;
    }
    return ev;
}

RegionLabel label_after_crossing(int interface_id, bool downward) {
    switch (InterfaceId(interface_id)) {
        case InterfaceId::PlaneAlpha: return downward ? RegionLabel::TPlusEps : RegionLabel::PPlusEps;
        case InterfaceId::PlaneBeta: return downward ? RegionLabel::CylEps : RegionLabel::TPlusEps;
        case InterfaceId::PlaneGammaM: return downward ? RegionLabel::TMinusEps : RegionLabel::CylEps;
        case InterfaceId::PlaneEtaM: return downward ? RegionLabel::PMinusEps : RegionLabel::TMinusEps;
        default: throw std::logic_error("label_after_crossing: unexpected interface");
    }
}

// =============================================================================
// Trajectory integration with events
// =============================================================================

TrajectoryRecord integrate_impl(const Field& f, const Point3& x0, double t_end,
                                const IntegratorConfig& cfg, std::span<const double> eval_times,
                                bool backward) {
    cfg.validate();
    if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be positive");

    const double sign = backward ? -1.0 : 1.0;
    TrajectoryRecord rec;
    rec.backward = backward;

    const bool piecewise = f.piecewise();
    RegionLabel label = piecewise ? f.label_of(x0) : RegionLabel::ExteriorEps;

    State<3> y{x0.x, x0.y, x0.z};

    auto znudge = [](double z0) { return 1e-13 * std::max(1.0, std::fabs(z0)); };

    // A start sitting exactly on an interface plane is nudged into the region
    // the precedence rule selected; the nudge direction keeps the label.
    if (piecewise && f.kind() == FieldKind::Approx3D) {
        for (const PlaneEvent& pe : active_planes(f, label, cfg.limit_z_floor)) {
            if (y[2] == pe.z0) {
                const bool upper_side = label == RegionLabel::PPlusEps ||
                                        (label == RegionLabel::TPlusEps && pe.id == int(InterfaceId::PlaneBeta)) ||
                                        (label == RegionLabel::CylEps && pe.id == int(InterfaceId::PlaneGammaM)) ||
                                        (label == RegionLabel::TMinusEps && pe.id == int(InterfaceId::PlaneEtaM));
                y[2] = pe.z0 + (upper_side ? 1.0 : -1.0) * znudge(pe.z0);
                rec.nudged_start = true;
            }
        }
    }

    auto record = [&](double t) {
        rec.times.push_back(t);
        rec.states.push_back({y[0], y[1], y[2]});
        rec.labels.push_back(label);
    };

    // The limit field is not integrated near the origin.
    if (f.kind() == FieldKind::Limit3D &&
        ((label == RegionLabel::PPlus && !backward && y[2] <= cfg.limit_z_floor) ||
         (label == RegionLabel::PMinus && backward && y[2] >= -cfg.limit_z_floor))) {
        record(0.0);
        rec.status = IntegrationStatus::LeftDomain;
        return rec;
    }

    auto rhs = [&](const State<3>& s, State<3>& out) {
        const Vec3 p{s[0], s[1], s[2]};
        const Vec3 v = piecewise ? f.eval_branch(label, p) : f(p);
        out[0] = sign * v.x;
        out[1] = sign * v.y;
        out[2] = sign * v.z;
    };

    double t = 0.0;
    double h = cfg.initial_step;
    record(0.0);

    std::size_t next_eval = 0;
    while (next_eval < eval_times.size() && eval_times[next_eval] <= 0.0) ++next_eval;

    State<3> k1;
    rhs(y, k1);

    long steps = 0;
    while (t < t_end) {
        if (steps >= cfg.max_steps) {
            if (rec.times.back() != t) record(t);
            rec.n_steps = steps;
            rec.status = IntegrationStatus::StepLimit;
            return rec;
        }

        const std::vector<PlaneEvent> planes =
            piecewise ? active_planes(f, label, cfg.limit_z_floor) : std::vector<PlaneEvent>{};

        double hcap = cfg.max_step;
        if (f.kind() == FieldKind::Approx3D && label == RegionLabel::CylEps) {
            const double e = f.approx_params()->eps;
            hcap = std::min(hcap, e * e / 10.0);  // resolve the fast rotation (rate 1/eps^2)
        }

        const double t_stop =
            next_eval < eval_times.size() ? std::min(eval_times[next_eval], t_end) : t_end;
        const bool clipped_h = t_stop - t <= std::min(h, hcap);
        const double h_try = std::min({h, hcap, t_stop - t});
        if (h_try < 1e-15 * std::max(1.0, std::fabs(t))) {
            if (rec.times.back() != t) record(t);
            rec.n_steps = steps;
            rec.status = IntegrationStatus::StepUnderflow;
            return rec;
        }

        State<3> ynew, yerr, k7;
        dopri5_step<3>(rhs, y, k1, h_try, ynew, yerr, k7);
        const double err = error_norm<3>(y, ynew, yerr, cfg.atol, cfg.rtol);
        ++steps;

        if (err > 1.0) {
            h = h_try * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            continue;
        }

        // Event scan over the accepted step.
        double best_tau = std::numeric_limits<double>::infinity();
        const PlaneEvent* best = nullptr;
        bool best_down = false;
        for (const PlaneEvent& pe : planes) {
            const double g0 = y[2] - pe.z0;
            const double g1 = ynew[2] - pe.z0;
            if (g0 == 0.0 || (g0 > 0.0) == (g1 > 0.0)) continue;

            // Illinois regula falsi on tau -> z(step from y of size tau) - z0.
            double lo = 0.0, glo = g0, hi = h_try, ghi = g1;
            double tau = hi;
            const double ttol = cfg.event_tol * std::max(1.0, std::fabs(t));
            for (int it = 0; it < 128 && hi - lo > ttol; ++it) {
                tau = (lo * ghi - hi * glo) / (ghi - glo);
                if (!(tau > lo && tau < hi)) tau = 0.5 * (lo + hi);
                State<3> yt, et, kt;
                dopri5_step<3>(rhs, y, k1, tau, yt, et, kt);
                const double g = yt[2] - pe.z0;
                if ((g > 0.0) == (glo > 0.0)) {
                    lo = tau;
                    glo = g;
                    ghi *= 0.5;
                } else {
                    hi = tau;
                    ghi = g;
                    glo *= 0.5;
                }
            }
            tau = hi;  // first time past the crossing within tolerance
            if (tau < best_tau) {
                best_tau = tau;
                best = &pe;
                best_down = g0 > 0.0;
            }
        }

        if (best != nullptr) {
            State<3> yt, et, kt;
            dopri5_step<3>(rhs, y, k1, best_tau, yt, et, kt);
            t += best_tau;
            y = yt;
            rec.events.push_back({t, best->id});
            if (best->fatal) {
                y[2] = best->z0;
                record(t);
                rec.n_steps = steps;
                rec.status = IntegrationStatus::LeftDomain;
                return rec;
            }
            label = label_after_crossing(best->id, best_down);
            y[2] = best->z0 + (best_down ? -1.0 : 1.0) * znudge(best->z0);
            record(t);
            rhs(y, k1);
            continue;
        }

        // Commit the step.
        t = clipped_h ? t_stop : t + h_try;
        y = ynew;
        k1 = k7;
        const bool at_eval = next_eval < eval_times.size() && t >= eval_times[next_eval];
        if (cfg.record_steps || at_eval || t >= t_end) record(t);
        while (next_eval < eval_times.size() && eval_times[next_eval] <= t) ++next_eval;
        if (!clipped_h) {
            // Clipped steps say nothing about the error; keep h as is then.
            const double fac = err > 1e-300 ? 0.9 * std::pow(err, -0.2) : 5.0;
            h = h_try * std::clamp(fac, 0.2, 5.0);
        }
    }

    rec.n_steps = steps;
    rec.status = IntegrationStatus::Completed;
    return rec;
}

}  // namespace

TrajectoryRecord integrate(const Field& f, const Point3& x0, double t_end,
                           const IntegratorConfig& cfg, std::span<const double> eval_times) {
    return integrate_impl(f, x0, t_end, cfg, eval_times, false);
}

TrajectoryRecord integrate_backward(const Field& f, const Point3& x0, double t_end,
                                    const IntegratorConfig& cfg, std::span<const double> eval_times) {
    return integrate_impl(f, x0, t_end, cfg, eval_times, true);
}

// =============================================================================
// Jacobian tracking
// =============================================================================

Mat3 Mat3::identity() {
    Mat3 I;
    I.m[0][0] = I.m[1][1] = I.m[2][2] = 1.0;
    return I;
}

double Mat3::det() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double JacobianTrack::max_drift() const {
    double d = 0.0;
    for (const auto& s : segments) d = std::max(d, s.max_drift);
    return d;
}

JacobianTrack track_jacobian(const Field& f, const TrajectoryRecord& traj, double fd_step,
                             const IntegratorConfig& cfg) {
    if (traj.times.empty()) throw std::invalid_argument("track_jacobian: empty trajectory");
    if (!(fd_step > 0.0)) throw std::invalid_argument("track_jacobian: fd_step must be positive");
    const double sign = traj.backward ? -1.0 : 1.0;

    std::vector<double> cuts{traj.times.front()};
    for (const auto& ev : traj.events) cuts.push_back(ev.t);
    cuts.push_back(traj.times.back());

    JacobianTrack track;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double ta = cuts[s], tb = cuts[s + 1];
        if (!(tb > ta)) continue;
        // Start just inside the segment so FD stencils stay in one region.
        const double pad = (tb - ta) * 1e-6;
        const double t0 = ta + pad, t1 = tb - pad;
        if (!(t1 > t0)) continue;
        const Point3 x = traj.state_at(t0);
        const RegionLabel label = f.piecewise() ? f.label_of(x) : RegionLabel::ExteriorEps;

        auto rhs = [&](const State<12>& yy, State<12>& out) {
            const Vec3 p{yy[0], yy[1], yy[2]};
            const Vec3 v = f.piecewise() ? f.eval_branch(label, p) : f(p);
            out[0] = sign * v.x;
            out[1] = sign * v.y;
            out[2] = sign * v.z;
            double G[3][3];
            for (int j = 0; j < 3; ++j) {
                Vec3 pp = p, pm = p;
                pp[j] += fd_step;
                pm[j] -= fd_step;
                const Vec3 fp = f.piecewise() ? f.eval_branch(label, pp) : f(pp);
                const Vec3 fm = f.piecewise() ? f.eval_branch(label, pm) : f(pm);
                for (int i = 0; i < 3; ++i) G[i][j] = sign * (fp[i] - fm[i]) / (2.0 * fd_step);
            }
            for (int col = 0; col < 3; ++col) {
                for (int row = 0; row < 3; ++row) {
                    double acc = 0.0;
                    for (int k = 0; k < 3; ++k) acc += G[row][k] * yy[3 + col * 3 + k];
                    out[3 + col * 3 + row] = acc;
                }
            }
        };

        State<12> y{};
        y[0] = x.x;
        y[1] = x.y;
        y[2] = x.z;
        y[3] = y[7] = y[11] = 1.0;  // identity, column-major

        JacobianTrack::Segment seg;
        seg.t_begin = t0;
        seg.t_end = t1;
        seg.label = label;

        auto push = [&](double t) {
            Mat3 J;
            for (int col = 0; col < 3; ++col)
                for (int row = 0; row < 3; ++row) J.m[row][col] = y[3 + col * 3 + row];
            seg.times.push_back(t);
            seg.dets.push_back(J.det());
            seg.max_drift = std::max(seg.max_drift, std::fabs(J.det() - 1.0));
        };

        push(t0);
        State<12> k1;
        rhs(y, k1);
        double t = t0;
        double h = std::min(cfg.initial_step, (t1 - t0) / 4.0);
        long steps = 0;
        while (t < t1 && steps < cfg.max_steps) {
            const double h_try = std::min(h, t1 - t);
            if (h_try < 1e-15 * std::max(1.0, std::fabs(t))) break;
            State<12> ynew, yerr, k7;
            dopri5_step<12>(rhs, y, k1, h_try, ynew, yerr, k7);
            const double err = error_norm<12>(y, ynew, yerr, cfg.atol, cfg.rtol);
            ++steps;
            if (err > 1.0) {
                h = h_try * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
                continue;
            }
            t = h_try == t1 - t ? t1 : t + h_try;
            y = ynew;
            k1 = k7;
            push(t);
            const double fac = err > 1e-300 ? 0.9 * std::pow(err, -0.2) : 5.0;
            h = h_try * std::clamp(fac, 0.2, 5.0);
        }
        track.segments.push_back(std::move(seg));
    }
    return track;
}

}  // namespace roughflow
