#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace roughflow {

// =============================================================================
// Basic spatial types
// =============================================================================

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm2() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm2()); }
    double radius2() const { return x * x + y * y; }  // squared planar radius

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

using Point3 = Vec3;

/// Cylindrical coordinates (r, theta, z) with r >= 0 and theta in [0, 2*pi).
/// theta is set to 0 on the axis r = 0.
struct CylCoords {
    double r = 0.0;
    double theta = 0.0;
    double z = 0.0;
};

CylCoords cyl_from_cart(const Point3& p);
Point3 cart_from_cyl(const CylCoords& c);

// =============================================================================
// Approximation parameters
// =============================================================================

/// Geometry constants of the smooth approximation at scale eps with target
/// rotation theta.  beta is the half height of the central cylinder and the
/// only free parameter; alpha, gamma, eta are tied to it so the five regions
/// glue together:
///     beta  = sqrt(27*theta/32),  alpha = eta = 4*beta/3,  gamma = beta.
struct ApproxParams {
    double eps;
    double theta;
    double beta;
    double alpha;
    double gamma;
    double eta;

    ApproxParams(double eps_, double theta_);

    /// Squared radius of the central cylinder, 32*beta*eps/27.
    double cyl_radius2() const { return 32.0 * beta * eps / 27.0; }
};

// =============================================================================
// Region classification
// =============================================================================

/// Pieces of the limit field's support (two symmetric paraboloids).
enum class RegionLabel : int {
    // limit field
    PPlus = 0,
    PMinus = 1,
    ExteriorLimit = 2,
    // approximating field
    PPlusEps = 3,
    TPlusEps = 4,
    CylEps = 5,
    TMinusEps = 6,
    PMinusEps = 7,
    ExteriorEps = 8,
};

const char* region_name(RegionLabel label);

/// Classify against the limit support P = {x^2+y^2 <= z} u {x^2+y^2 <= -z}.
/// On interfaces the label with larger z-extent wins (PPlus before PMinus).
RegionLabel classify_limit(const Point3& p);

/// Classify against the five regions of the approximation.  Boundary points
/// are assigned by the precedence P+ > T+ > C > T- > P-.  The lateral
/// transition surfaces are only active where 27*(x^2+y^2) >= 32*beta*eps;
/// at smaller radii the whole height band belongs to the transition zone.
RegionLabel classify_eps(const ApproxParams& params, const Point3& p);

// =============================================================================
// Interface event functions
// =============================================================================

/// Identity of the interfaces separating regions of the approximation.
enum class InterfaceId : int {
    PlaneAlpha = 0,   // z = alpha*eps   (P+_eps / T+_eps)
    PlaneBeta = 1,    // z = beta*eps    (T+_eps / C_eps)
    PlaneGammaM = 2,  // z = -gamma*eps  (C_eps / T-_eps)
    PlaneEtaM = 3,    // z = -eta*eps    (T-_eps / P-_eps)
    ParabUpper = 4,   // x^2+y^2 = z
    ParabLower = 5,   // x^2+y^2 = -z
    CylWall = 6,      // x^2+y^2 = 32*beta*eps/27
    LateralPlus = 7,  // lateral surface of T+_eps
    LateralMinus = 8, // lateral surface of T-_eps
};

constexpr int kNumInterfaces = 9;

/// One signed scalar per interface, zero exactly on it.  Plane entries are
/// z - z0 (negative below).  Wall entries are negative inside the bounded
/// solid.  The lateral entries vanish on the transition surfaces
///     27 r^2 [(z -+ beta*eps)^2 - beta^2 eps^2] + 32 beta^3 eps^3 = 0
/// and are negative inside the hourglass.
std::array<double, kNumInterfaces> boundary_values(const ApproxParams& params,
                                                   const Point3& p);

/// Squared radius of the T+ lateral wall at height z in (beta*eps, alpha*eps].
double lateral_wall_r2_plus(const ApproxParams& params, double z);
/// Squared radius of the T- lateral wall at height z in [-eta*eps, -gamma*eps).
double lateral_wall_r2_minus(const ApproxParams& params, double z);

}  // namespace roughflow
