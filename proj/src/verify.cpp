#include "roughflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "roughflow/exact_flows.hpp"
#include "roughflow/experiments.hpp"
#include "roughflow/fields.hpp"
#include "roughflow/util.hpp"

namespace roughflow {

using nlohmann::json;

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Point3 cyl_point(double r2, double az, double z) {
    const double r = std::sqrt(std::max(0.0, r2));
    return {r * std::cos(az), r * std::sin(az), z};
}

}  // namespace

// =============================================================================
// Divergence
// =============================================================================

VerifySuiteResult verify_divergence(const ApproxParams& g, int per_region, std::uint64_t seed) {
    VerifySuiteResult res;
    res.name = "divergence";
    const Field f = Field::approx(g);
    const double h = 1e-5;
    const double m = 8.0 * h;  // keep stencils clear of the interfaces

    const double ae = g.alpha * g.eps, be = g.beta * g.eps;
    const double ge = g.gamma * g.eps, ee = g.eta * g.eps;

    struct RegionSpec {
        const char* name;
        double z_lo, z_hi;
        std::function<double(double)> r2_max;
    };
    const std::vector<RegionSpec> regions{
        {"P+_eps", ae + m, 1.0, [&](double z) { return 0.9 * z; }},
        {"T+_eps", be + m, ae - m, [&](double z) { return 0.8 * lateral_wall_r2_plus(g, z); }},
        {"C_eps", -ge + m, be - m, [&](double) { return 0.9 * g.cyl_radius2(); }},
        {"T-_eps", -ee + m, -ge - m, [&](double z) { return 0.8 * lateral_wall_r2_minus(g, z); }},
        {"P-_eps", -1.0, -ee - m, [&](double z) { return 0.9 * (-z); }},
    };

    bool pass = true;
    json details;
    for (const auto& reg : regions) {
        HaltonSampler hs(seed);
        std::vector<double> rel;
        int skipped = 0;
        for (int i = 0; i < per_region; ++i) {
            double u, v, w;
            hs.next3(u, v, w);
            const double z = reg.z_lo + (reg.z_hi - reg.z_lo) * w;
            const Point3 p = cyl_point(u * reg.r2_max(z), 2.0 * M_PI * v, z);
            const auto div = divergence_fd(f, p, h);
            const auto scale = gradient_scale_fd(f, p, h);
            if (!div || !scale) {
                ++skipped;
                continue;
            }
            rel.push_back(std::fabs(*div) / std::max(1.0, *scale));
        }
        const double med = median(rel);
        details["regions"][reg.name] = {{"median_rel_divergence", med}, {"skipped", skipped}};
        if (med > 1e-6) pass = false;
    }

    // exterior points: the field vanishes identically, FD divergence is exactly 0
    {
        HaltonSampler hs(seed + 1);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            double u, v, w;
            hs.next3(u, v, w);
            const Point3 p = cyl_point(1.0 + u, 2.0 * M_PI * v, 2.0 * (w - 0.5));
            if (classify_eps(g, p) != RegionLabel::ExteriorEps) continue;
            const auto div = divergence_fd(f, p, h);
            if (div) worst = std::max(worst, std::fabs(*div));
        }
        details["exterior_max_divergence"] = worst;
        if (worst != 0.0) pass = false;
    }

    res.pass = pass;
    res.details = details;
    return res;
}

// =============================================================================
// Tangency
// =============================================================================

VerifySuiteResult verify_tangency(const ApproxParams& g, int per_surface, std::uint64_t seed) {
    VerifySuiteResult res;
    res.name = "tangency";
    const double ae = g.alpha * g.eps, be = g.beta * g.eps;
    const double ge = g.gamma * g.eps, ee = g.eta * g.eps;

    json details;
    double worst_all = 0.0;

    auto run_surface = [&](const char* name, InterfaceId s, auto&& point_at) {
        HaltonSampler hs(seed);
        double worst = 0.0;
        for (int i = 0; i < per_surface; ++i) {
            double u, v, w;
            hs.next3(u, v, w);
            (void)w;
            const Point3 p = point_at(u, 2.0 * M_PI * v);
            worst = std::max(worst, std::fabs(normal_flux(g, p, s)));
        }
        details[name] = worst;
        worst_all = std::max(worst_all, worst);
    };

    run_surface("parab_upper", InterfaceId::ParabUpper, [&](double u, double az) {
        const double z = ae * 1.01 + (1.0 - ae * 1.01) * u;
        return cyl_point(z, az, z);
    });
    run_surface("parab_lower", InterfaceId::ParabLower, [&](double u, double az) {
        const double z = -(ee * 1.01 + (1.0 - ee * 1.01) * u);
        return cyl_point(-z, az, z);
    });
    run_surface("cyl_wall", InterfaceId::CylWall, [&](double u, double az) {
        const double z = -ge + (be + ge) * (0.02 + 0.96 * u);
        return cyl_point(g.cyl_radius2(), az, z);
    });
    run_surface("lateral_plus", InterfaceId::LateralPlus, [&](double u, double az) {
        const double z = be + (ae - be) * (0.02 + 0.96 * u);
        return cyl_point(lateral_wall_r2_plus(g, z), az, z);
    });
    run_surface("lateral_minus", InterfaceId::LateralMinus, [&](double u, double az) {
        const double z = -ge - (ee - ge) * (0.02 + 0.96 * u);
        return cyl_point(lateral_wall_r2_minus(g, z), az, z);
    });

    {  // limit field paraboloid
        HaltonSampler hs(seed + 2);
        double worst = 0.0;
        for (int i = 0; i < per_surface; ++i) {
            double u, v, w;
            hs.next3(u, v, w);
            const double z = 0.1 + 1.4 * u;
            worst = std::max(worst, std::fabs(normal_flux_limit(cyl_point(z, 2.0 * M_PI * v, z))));
            worst = std::max(worst,
                             std::fabs(normal_flux_limit(cyl_point(z, 2.0 * M_PI * w, -z))));
        }
        details["limit_paraboloid"] = worst;
        worst_all = std::max(worst_all, worst);
    }

    res.pass = worst_all <= 1e-8;
    res.details = details;
    res.details["max_abs_flux"] = worst_all;
    return res;
}

// =============================================================================
// Conserved ratio
// =============================================================================

VerifySuiteResult verify_conserved(const ApproxParams& g, double theta, int trajectories,
                                   std::uint64_t seed, const IntegratorConfig& cfg) {
    VerifySuiteResult res;
    res.name = "conserved";

    // closed-form limit trajectories
    HaltonSampler hs(seed);
    double drift_closed = 0.0;
    for (int i = 0; i < trajectories; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        const double z = 0.3 + 0.9 * w;
        const Point3 p = cyl_point(0.9 * u * z, 2.0 * M_PI * v, z);
        const double q0 = conserved_ratio(p);
        for (int m = 1; m <= 20; ++m) {
            const double t = 0.05 * m;
            const Point3 x = flow_limit(theta, t, p);
            if (std::fabs(x.z) < 1e-8) continue;  // ratio undefined at the origin crossing
            drift_closed = std::max(drift_closed, std::fabs(conserved_ratio(x) - q0));
        }
    }

    // engine trajectories of b_eps: drift within paraboloid segments
    SampleSpec sspec;
    sspec.count = trajectories;
    sspec.seed = seed + 7;
    sspec.z_max = 1.0;
    const std::vector<Point3> starts = sample_region_starts(g, sspec, true);
    const Field f = Field::approx(g);
    double drift_engine = 0.0;
    int failures = 0;
    for (const Point3& p : starts) {
        const double T = p.z * p.z / 4.0 + 2.0 * zone_transit_time(g) + 0.05;
        const TrajectoryRecord rec = integrate(f, p, T, cfg);
        if (rec.status != IntegrationStatus::Completed) {
            ++failures;
            continue;
        }
        double ref = -1.0;
        RegionLabel prev = RegionLabel::ExteriorEps;
        for (std::size_t si = 0; si < rec.times.size(); ++si) {
            const RegionLabel l = rec.labels[si];
            const bool parab = l == RegionLabel::PPlusEps || l == RegionLabel::PMinusEps;
            if (!parab || rec.states[si].z == 0.0) {
                prev = l;
                continue;
            }
            if (l != prev) ref = conserved_ratio(rec.states[si]);  // new segment
            drift_engine = std::max(drift_engine, std::fabs(conserved_ratio(rec.states[si]) - ref));
            prev = l;
        }
    }

    res.details = json{{"closed_form_max_drift", drift_closed},
                       {"engine_max_drift", drift_engine},
                       {"engine_failures", failures}};
    res.pass = drift_closed <= 1e-12 && drift_engine <= 1e-6 && failures == 0;
    return res;
}

// =============================================================================
// Volume preservation
// =============================================================================

VerifySuiteResult verify_volume(const ApproxParams& g, int trajectories, std::uint64_t seed,
                                const IntegratorConfig& cfg) {
    VerifySuiteResult res;
    res.name = "volume";
    json details;

    // rigid-rotation control (tight tolerances: the drift target is 1e-10)
    const Field rot = Field::custom([](const Vec3& p) { return Vec3{-4.0 * p.y, 4.0 * p.x, 0.0}; });
    const TrajectoryRecord rrec = integrate(rot, {0.3, 0.0, 0.1}, 1.0, cfg);
    IntegratorConfig tight = cfg;
    tight.rtol = 1e-12;
    tight.atol = 1e-14;
    tight.event_tol = 1e-14;
    const JacobianTrack rtrack = track_jacobian(rot, rrec, 1e-6, tight);
    details["rotation_det_drift"] = rtrack.max_drift();

    // b_eps across all five regions
    SampleSpec sspec;
    sspec.count = trajectories;
    sspec.seed = seed;
    sspec.z_max = 0.8;
    const std::vector<Point3> starts = sample_region_starts(g, sspec, true);
    const Field f = Field::approx(g);
    double worst = 0.0;
    int failures = 0;
    int segment_count = 0;
    for (const Point3& p : starts) {
        const double T = p.z * p.z / 4.0 + 2.0 * zone_transit_time(g) + 0.05;
        const TrajectoryRecord rec = integrate(f, p, T, cfg);
        if (rec.status != IntegrationStatus::Completed) {
            ++failures;
            continue;
        }
        const JacobianTrack track = track_jacobian(f, rec, 1e-6, cfg);
        segment_count += int(track.segments.size());
        worst = std::max(worst, track.max_drift());
    }
    details["beps_max_segment_det_drift"] = worst;
    details["segments"] = segment_count;
    details["engine_failures"] = failures;

    res.pass = rtrack.max_drift() <= 1e-10 && worst <= 1e-4 && failures == 0;
    res.details = details;
    return res;
}

}  // namespace roughflow
