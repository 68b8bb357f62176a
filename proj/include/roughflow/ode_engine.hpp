#pragma once

#include <limits>
#include <span>
#include <vector>

#include "roughflow/fields.hpp"
#include "roughflow/geometry.hpp"

namespace roughflow {

/// Interface code for events that are not geometric region boundaries.
constexpr int kOriginFloorEvent = 100;

struct IntegratorConfig {
    double rtol = 1e-10;
    double atol = 1e-12;
    double initial_step = 1e-4;
    double max_step = std::numeric_limits<double>::infinity();
    double event_tol = 1e-12;  ///< event time bisection width, scaled by max(1,|t|)
    long max_steps = 5'000'000;
    /// The limit field is not integrated through the origin: trajectories in
    /// P+ (forward) or P- (backward) stop at |z| = limit_z_floor with status
    /// LeftDomain; the closed-form flow is the authority there.
    double limit_z_floor = 1e-3;
    bool record_steps = true;  ///< keep every accepted step in the record

    void validate() const;
};

enum class IntegrationStatus { Completed, StepLimit, LeftDomain, StepUnderflow };

const char* status_name(IntegrationStatus s);

struct EventRecord {
    double t;
    int interface_id;  ///< InterfaceId value, or kOriginFloorEvent
};

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<Point3> states;
    std::vector<RegionLabel> labels;
    std::vector<EventRecord> events;
    IntegrationStatus status = IntegrationStatus::Completed;
    bool nudged_start = false;
    long n_steps = 0;
    bool backward = false;

    const Point3& final_state() const { return states.back(); }
    double final_time() const { return times.back(); }
    /// Linear interpolation between recorded samples.
    Point3 state_at(double t) const;
};

/// Adaptive Dormand-Prince integration of dx/dt = f(x) with region-interface
/// event detection for piecewise fields: the current region's formula is
/// frozen between events, plane crossings are located to event_tol by
/// regula falsi on single-step probes, the state is clamped to the interface
/// and integration restarts in the adjacent region.  Deterministic given
/// (f, x0, cfg).  eval_times (sorted, within [0, t_end]) become exact step
/// endpoints and are always recorded.
TrajectoryRecord integrate(const Field& f, const Point3& x0, double t_end,
                           const IntegratorConfig& cfg,
                           std::span<const double> eval_times = {});

/// Same with the field negated: for autonomous fields the backward flow is
/// the inverse flow, X(t,.)^{-1} = X(-t,.).
TrajectoryRecord integrate_backward(const Field& f, const Point3& x0, double t_end,
                                    const IntegratorConfig& cfg,
                                    std::span<const double> eval_times = {});

// =============================================================================
// Volume preservation
// =============================================================================

struct Mat3 {
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    static Mat3 identity();
    double det() const;
};

/// Jacobian of the flow map evolved through the variational equation
/// dJ/dt = grad f (X(t)) J with finite-difference gradients, restarted from
/// the identity on each smooth segment of a completed trajectory.  For
/// divergence-free fields every segment determinant stays 1 up to
/// integration error.
struct JacobianTrack {
    struct Segment {
        double t_begin = 0.0;
        double t_end = 0.0;
        RegionLabel label = RegionLabel::ExteriorEps;
        std::vector<double> times;
        std::vector<double> dets;
        double max_drift = 0.0;  ///< max |det - 1| over the segment
    };
    std::vector<Segment> segments;
    double max_drift() const;
};

JacobianTrack track_jacobian(const Field& f, const TrajectoryRecord& traj, double fd_step,
                             const IntegratorConfig& cfg);

}  // namespace roughflow
