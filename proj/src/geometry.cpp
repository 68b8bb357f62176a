#include "roughflow/geometry.hpp"

#include <cmath>

namespace roughflow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

CylCoords cyl_from_cart(const Point3& p) {
    CylCoords c;
    c.r = std::hypot(p.x, p.y);
    c.z = p.z;
    if (c.r == 0.0) {
        c.theta = 0.0;
        return c;
    }
    double t = std::atan2(p.y, p.x);
    if (t < 0.0) t += kTwoPi;
    if (t >= kTwoPi) t = 0.0;
    c.theta = t;
    return c;
}

Point3 cart_from_cyl(const CylCoords& c) {
    return {c.r * std::cos(c.theta), c.r * std::sin(c.theta), c.z};
}

ApproxParams::ApproxParams(double eps_, double theta_) : eps(eps_), theta(theta_) {
    if (!(eps > 0.0)) throw std::invalid_argument("ApproxParams: eps must be positive");
    if (!(theta > 0.0 && theta <= kTwoPi)) {
        throw std::invalid_argument("ApproxParams: theta must lie in (0, 2*pi]");
    }
    beta = std::sqrt(27.0 * theta / 32.0);
    alpha = 4.0 * beta / 3.0;
    gamma = beta;
    eta = 4.0 * beta / 3.0;
}

const char* region_name(RegionLabel label) {
    switch (label) {
        case RegionLabel::PPlus: return "P+";
        case RegionLabel::PMinus: return "P-";
        case RegionLabel::ExteriorLimit: return "exterior";
        case RegionLabel::PPlusEps: return "P+_eps";
        case RegionLabel::TPlusEps: return "T+_eps";
        case RegionLabel::CylEps: return "C_eps";
        case RegionLabel::TMinusEps: return "T-_eps";
        case RegionLabel::PMinusEps: return "P-_eps";
        case RegionLabel::ExteriorEps: return "exterior_eps";
    }
    return "?";
}

RegionLabel classify_limit(const Point3& p) {
    const double r2 = p.radius2();
    if (r2 <= p.z) return RegionLabel::PPlus;
    if (r2 <= -p.z) return RegionLabel::PMinus;
    return RegionLabel::ExteriorLimit;
}

double lateral_wall_r2_plus(const ApproxParams& g, double z) {
    // From 27 r^2 [(z-be)^2 - (be)^2] + 32 (be)^3 = 0 with be = beta*eps.
    const double be = g.beta * g.eps;
    return 32.0 * be * be * be / (27.0 * z * (2.0 * be - z));
}

double lateral_wall_r2_minus(const ApproxParams& g, double z) {
    const double ge = g.gamma * g.eps;
    return 32.0 * ge * ge * ge / (27.0 * (-z) * (2.0 * ge + z));
}

RegionLabel classify_eps(const ApproxParams& g, const Point3& p) {
    const double r2 = p.radius2();
    const double z = p.z;
    const double ae = g.alpha * g.eps;
    const double be = g.beta * g.eps;
    const double ge = g.gamma * g.eps;
    const double ee = g.eta * g.eps;
    const double cw2 = g.cyl_radius2();

    if (z >= ae && r2 <= z) return RegionLabel::PPlusEps;
    if (z >= be && z <= ae) {
        // Inside the funnel: either within the cylinder column or above the
        // lateral surface.
        if (27.0 * r2 <= 32.0 * be || z >= be + be * std::sqrt((27.0 * r2 - 32.0 * be) / (27.0 * r2))) {
            return RegionLabel::TPlusEps;
        }
    }
    if (z >= -ge && z <= be && r2 <= cw2) return RegionLabel::CylEps;
    if (z >= -ee && z <= -ge) {
        if (27.0 * r2 <= 32.0 * ge || -z >= ge + ge * std::sqrt((27.0 * r2 - 32.0 * ge) / (27.0 * r2))) {
            return RegionLabel::TMinusEps;
        }
    }
    if (z <= -ee && r2 <= -z) return RegionLabel::PMinusEps;
    return RegionLabel::ExteriorEps;
}

std::array<double, kNumInterfaces> boundary_values(const ApproxParams& g, const Point3& p) {
    const double r2 = p.radius2();
    const double z = p.z;
    const double be = g.beta * g.eps;
    const double ge = g.gamma * g.eps;

    std::array<double, kNumInterfaces> v{};
    v[int(InterfaceId::PlaneAlpha)] = z - g.alpha * g.eps;
    v[int(InterfaceId::PlaneBeta)] = z - be;
    v[int(InterfaceId::PlaneGammaM)] = z + ge;
    v[int(InterfaceId::PlaneEtaM)] = z + g.eta * g.eps;
    v[int(InterfaceId::ParabUpper)] = r2 - z;
    v[int(InterfaceId::ParabLower)] = r2 + z;
    v[int(InterfaceId::CylWall)] = r2 - g.cyl_radius2();
    const double dzp = z - be;
    const double dzm = z + ge;
    v[int(InterfaceId::LateralPlus)] =
        27.0 * r2 * (dzp * dzp - be * be) + 32.0 * be * be * be;
    v[int(InterfaceId::LateralMinus)] =
        27.0 * r2 * (dzm * dzm - ge * ge) + 32.0 * ge * ge * ge;
    // Lateral entries are positive inside the hourglass; flip so that
    // "negative inside" holds like the other wall entries.
    v[int(InterfaceId::LateralPlus)] = -v[int(InterfaceId::LateralPlus)];
    v[int(InterfaceId::LateralMinus)] = -v[int(InterfaceId::LateralMinus)];
    return v;
}

}  // namespace roughflow
