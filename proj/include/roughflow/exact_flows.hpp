#pragma once

#include <ostream>
#include <span>

#include "roughflow/fields.hpp"
#include "roughflow/geometry.hpp"

namespace roughflow {

// =============================================================================
// Flows of the limit field
// =============================================================================

/// Closed-form flow X^Theta of the limit field.  Outside the paraboloid pair
/// the flow is the identity; P- trajectories fall forever; P+ trajectories
/// reach the origin at t = z^2/4 and continue on the lower paraboloid rotated
/// by theta in the plane.  At exactly t = z^2/4 the rotated branch is used
/// (both branches give the origin).
Point3 flow_limit(double theta, double t, const Point3& p);

/// Backward flow (X^Theta)^{-1}(t, .): P+ points rise, P- points rise and,
/// past t = z^2/4, continue on the upper paraboloid rotated by -theta.
Point3 flow_limit_inverse(double theta, double t, const Point3& p);

/// (x^2 + y^2)/|z|; constant along the limit flow.  Throws on z = 0.
double conserved_ratio(const Point3& p);

/// Initial azimuth branch used by the closed-form characteristics:
/// pi when y = 0, x < 0, and 2*atan(y / (x + sqrt(x^2+y^2))) otherwise
/// (equal to atan2 modulo 2*pi); zero on the axis.
double theta0_azimuth(double x, double y);

// =============================================================================
// Characteristics of b_eps for starts in P+_eps
// =============================================================================

/// Times at which a trajectory started at height z >= alpha*eps crosses the
/// planes z = alpha*eps, beta*eps, -gamma*eps, -eta*eps:
///   t1 = (z^2 - alpha^2 eps^2)/4,
///   t2 - t1 = t4 - t3 = (8 beta^2 eps^2 / 27) ln 2,
///   t3 - t2 = (32/27) beta^2 eps^2 = theta * eps^2.
struct Breakpoints {
    double t1, t2, t3, t4;
};

Breakpoints breakpoints(const ApproxParams& params, double z);

/// Total time spent between the alpha and eta planes, t4 - t1; independent of
/// the start height.
double zone_transit_time(const ApproxParams& params);

enum class FlowSegment : int {
    ParabPlus = 0,
    TransPlus = 1,
    Cyl = 2,
    TransMinus = 3,
    ParabMinus = 4,
};

const char* segment_name(FlowSegment s);

/// State of the piecewise closed-form characteristic: position plus the
/// unwrapped azimuth and squared planar radius, which make the net-rotation
/// bookkeeping exact.  Across [t1, t4] the azimuth gains
///   theta_bar + theta - theta_bar = theta,
/// with theta_bar = (16/27) ln 2 + (16/9) ln(3/4) the (negative) rotation
/// picked up in the first transition zone.
struct FlowEpsState {
    Point3 x;
    FlowSegment segment;
    double azimuth;
    double radius2;
};

/// Piecewise closed form glued at t1..t4.  Requires p in P+_eps; starts
/// elsewhere are served by the ODE engine.
FlowEpsState flow_eps_state(const ApproxParams& params, double t, const Point3& p);

Point3 flow_eps_closed(const ApproxParams& params, double t, const Point3& p);

// =============================================================================
// 2D pair of non-unique flows
// =============================================================================

struct Dpl2dPair {
    Vec2 plain;     ///< flow whose first component keeps its sign
    Vec2 mirrored;  ///< flow whose first component flips with sigma
};

/// Both closed-form flows through a point of the wedge 0 < x < y; they agree
/// until t = y^2/2 and differ afterwards.
Dpl2dPair dpl2d_flows(double t, const Vec2& p);

// =============================================================================
// Export
// =============================================================================

struct TrajectorySample {
    double t;
    Point3 x;
    const char* segment;
};

/// CSV rows (t, x, y, z, segment_id).
void write_trajectory_csv(std::ostream& os, std::span<const TrajectorySample> samples);

}  // namespace roughflow
