#include "roughflow/exact_flows.hpp"

#include <cmath>
#include <iomanip>

namespace roughflow {

namespace {

inline void rotate(double c, double s, double& x, double& y) {
    const double xr = x * c - y * s;
    const double yr = x * s + y * c;
    x = xr;
    y = yr;
}

}  // namespace

Point3 flow_limit(double theta, double t, const Point3& p) {
    if (t < 0.0) throw std::invalid_argument("flow_limit: t must be >= 0");
    switch (classify_limit(p)) {
        case RegionLabel::ExteriorLimit:
            return p;
        case RegionLabel::PMinus: {
            const double s = std::sqrt(p.z * p.z + 4.0 * t);
            const double w = std::sqrt(s) / std::sqrt(-p.z);
            return {p.x * w, p.y * w, -s};
        }
        case RegionLabel::PPlus: {
            const double tc = p.z * p.z / 4.0;
            if (t < tc) {
                const double s = std::sqrt(p.z * p.z - 4.0 * t);
                const double w = std::sqrt(s) / std::sqrt(p.z);
                return {p.x * w, p.y * w, s};
            }
            const double s = std::sqrt(4.0 * t - p.z * p.z);
            const double w = p.z > 0.0 ? std::sqrt(s) / std::sqrt(p.z) : 0.0;
            double x = p.x * w, y = p.y * w;
            rotate(std::cos(theta), std::sin(theta), x, y);
            return {x, y, -s};
        }
        default:
            return p;
    }
}

Point3 flow_limit_inverse(double theta, double t, const Point3& p) {
    if (t < 0.0) throw std::invalid_argument("flow_limit_inverse: t must be >= 0");
    switch (classify_limit(p)) {
        case RegionLabel::ExteriorLimit:
            return p;
        case RegionLabel::PPlus: {
            const double s = std::sqrt(p.z * p.z + 4.0 * t);
            const double w = p.z > 0.0 ? std::sqrt(s) / std::sqrt(p.z) : 0.0;
            return {p.x * w, p.y * w, s};
        }
        case RegionLabel::PMinus: {
            const double tc = p.z * p.z / 4.0;
            if (t < tc) {
                const double s = std::sqrt(p.z * p.z - 4.0 * t);
                const double w = std::sqrt(s) / std::sqrt(-p.z);
                return {p.x * w, p.y * w, -s};
            }
            const double s = std::sqrt(4.0 * t - p.z * p.z);
            const double w = std::sqrt(s) / std::sqrt(-p.z);
            double x = p.x * w, y = p.y * w;
            rotate(std::cos(theta), -std::sin(theta), x, y);
            return {x, y, s};
        }
        default:
            return p;
    }
}

double conserved_ratio(const Point3& p) {
    if (p.z == 0.0) throw std::domain_error("conserved_ratio: undefined on z = 0");
    return p.radius2() / std::fabs(p.z);
}

double theta0_azimuth(double x, double y) {
    if (x == 0.0 && y == 0.0) return 0.0;
    if (y == 0.0 && x < 0.0) return M_PI;
    return 2.0 * std::atan(y / (x + std::sqrt(x * x + y * y)));
}

Breakpoints breakpoints(const ApproxParams& g, double z) {
    const double ae = g.alpha * g.eps;
    if (z < ae) throw std::invalid_argument("breakpoints: start height must satisfy z >= alpha*eps");
    const double b2e2 = g.beta * g.beta * g.eps * g.eps;
    const double dlog = (8.0 * b2e2 / 27.0) * M_LN2;
    Breakpoints bp;
    bp.t1 = (z * z - ae * ae) / 4.0;
    bp.t2 = bp.t1 + dlog;
    bp.t3 = bp.t2 + 32.0 * b2e2 / 27.0;
    bp.t4 = bp.t3 + dlog;
    return bp;
}

double zone_transit_time(const ApproxParams& g) {
    const double b2e2 = g.beta * g.beta * g.eps * g.eps;
    return b2e2 * (16.0 * M_LN2 + 32.0) / 27.0;
}

const char* segment_name(FlowSegment s) {
    switch (s) {
        case FlowSegment::ParabPlus: return "parab+";
        case FlowSegment::TransPlus: return "trans+";
        case FlowSegment::Cyl: return "cyl";
        case FlowSegment::TransMinus: return "trans-";
        case FlowSegment::ParabMinus: return "parab-";
    }
    return "?";
}

FlowEpsState flow_eps_state(const ApproxParams& g, double t, const Point3& p) {
    if (t < 0.0) throw std::invalid_argument("flow_eps_state: t must be >= 0");
    if (classify_eps(g, p) != RegionLabel::PPlusEps) {
        throw std::invalid_argument("flow_eps_state: start must lie in P+_eps");
    }
    const double be = g.beta * g.eps;
    const double b2e2 = g.beta * g.beta * g.eps * g.eps;
    const double k = 27.0 / (8.0 * b2e2);
    const double q = p.radius2() / p.z;  // conserved ratio, <= 1 in P+
    const double th0 = theta0_azimuth(p.x, p.y);
    const Breakpoints bp = breakpoints(g, p.z);

    FlowEpsState st;

    if (t <= bp.t1) {
        const double s = std::sqrt(p.z * p.z - 4.0 * t);
        const double w = std::sqrt(s) / std::sqrt(p.z);
        st.x = {p.x * w, p.y * w, s};
        st.segment = FlowSegment::ParabPlus;
        st.azimuth = th0;
        st.radius2 = q * s;
        return st;
    }

    // first transition: z from alpha*eps down to beta*eps
    auto trans_plus = [&](double tt) {
        const double s = k * (tt - bp.t1);
        const double es = std::exp(s);
        const double phi = q * g.alpha * g.eps * std::exp(-s) * ((2.0 + es) / 3.0) * ((2.0 + es) / 3.0);
        const double az = th0 + 2.0 * (tt - bp.t1) / b2e2 - (16.0 / 9.0) * std::log((2.0 + es) / 3.0);
        const double z = 4.0 * be / (2.0 + es);
        return std::array<double, 3>{phi, az, z};
    };
    if (t <= bp.t2) {
        auto [phi, az, z] = trans_plus(t);
        const double r = std::sqrt(phi);
        st.x = {r * std::cos(az), r * std::sin(az), z};
        st.segment = FlowSegment::TransPlus;
        st.azimuth = az;
        st.radius2 = phi;
        return st;
    }

    auto [phi2, az2, z2unused] = trans_plus(bp.t2);
    (void)z2unused;

    // cylinder: rigid rotation at rate 1/eps^2 while falling to -gamma*eps
    auto cyl = [&](double tt) {
        const double az = az2 + (tt - bp.t2) / (g.eps * g.eps);
        const double z = be - (27.0 / (16.0 * be)) * (tt - bp.t2);
        return std::array<double, 2>{az, z};
    };
    if (t <= bp.t3) {
        auto [az, z] = cyl(t);
        const double r = std::sqrt(phi2);
        st.x = {r * std::cos(az), r * std::sin(az), z};
        st.segment = FlowSegment::Cyl;
        st.azimuth = az;
        st.radius2 = phi2;
        return st;
    }

    const double az3 = cyl(bp.t3)[0];

    // second transition: z from -gamma*eps down to -eta*eps, rotation unwinds
    // by exactly the first transition's angle
    auto trans_minus = [&](double tt) {
        const double sg = k * (tt - bp.t3);
        const double em = std::exp(-sg);
        const double rho = phi2 * std::exp(sg) * ((1.0 + em) / 2.0) * ((1.0 + em) / 2.0);
        const double az = az3 - (16.0 / 9.0) * std::log((1.0 + em) / 2.0) - 2.0 * (tt - bp.t3) / b2e2;
        const double z = -2.0 * be / (1.0 + em);
        return std::array<double, 3>{rho, az, z};
    };
    if (t <= bp.t4) {
        auto [rho, az, z] = trans_minus(t);
        const double r = std::sqrt(rho);
        st.x = {r * std::cos(az), r * std::sin(az), z};
        st.segment = FlowSegment::TransMinus;
        st.azimuth = az;
        st.radius2 = rho;
        return st;
    }

    auto [rho4, az4, z4] = trans_minus(bp.t4);

    // lower paraboloid with the new initial datum at height -4*beta*eps/3
    const double s = std::sqrt(z4 * z4 + 4.0 * (t - bp.t4));
    const double rad2 = rho4 * s / (-z4);
    const double r = std::sqrt(rad2);
    st.x = {r * std::cos(az4), r * std::sin(az4), -s};
    st.segment = FlowSegment::ParabMinus;
    st.azimuth = az4;
    st.radius2 = rad2;
    return st;
}

Point3 flow_eps_closed(const ApproxParams& g, double t, const Point3& p) {
    return flow_eps_state(g, t, p).x;
}

Dpl2dPair dpl2d_flows(double t, const Vec2& p) {
    if (!(0.0 < p.x && p.x < p.y)) {
        throw std::invalid_argument("dpl2d_flows: point must lie in the wedge 0 < x < y");
    }
    const double sigma = t <= p.y * p.y / 2.0 ? 1.0 : -1.0;
    const double root = std::sqrt(std::fabs(p.y * p.y - 2.0 * t));
    Dpl2dPair out;
    out.plain = {p.x / p.y * root, sigma * root};
    out.mirrored = {sigma * p.x / p.y * root, sigma * root};
    return out;
}

void write_trajectory_csv(std::ostream& os, std::span<const TrajectorySample> samples) {
    os << "t,x,y,z,segment_id\n";
    os << std::setprecision(17);
    for (const auto& s : samples) {
        os << s.t << ',' << s.x.x << ',' << s.x.y << ',' << s.x.z << ',' << s.segment << '\n';
    }
}

}  // namespace roughflow
