#pragma once

#include <functional>
#include <span>
#include <vector>

#include "roughflow/fields.hpp"
#include "roughflow/geometry.hpp"
#include "roughflow/ode_engine.hpp"

namespace roughflow {

// =============================================================================
// Initial data
// =============================================================================

struct InitialDatum {
    std::function<double(const Point3&)> eval;
    double sup_bound = 1.0;
    double lip_bound = 1.0;
    double ref_radius = 2.0;  ///< ball on which lip_bound is declared
};

/// u0(x,y,z) = x * exp(-(x^2+y^2+z^2)): smooth, bounded, Lipschitz, and it
/// tells rotations apart (not invariant under any planar rotation != 2*pi).
InitialDatum default_datum();

/// Rotation-invariant datum (depends on r and z only); transport solutions of
/// it coincide for every rotation choice.
InitialDatum radial_datum();

/// Check the declared bounds against a sample set (sup and Lipschitz quotient).
bool validate_datum(const InitialDatum& u0, std::span<const Point3> samples);

// =============================================================================
// Characteristic solutions
// =============================================================================

/// u(t, p) = u0((X^theta)^{-1}(t, p)) via the closed-form inverse flow.
double solve_exact(double theta, const InitialDatum& u0, double t, const Point3& p);

/// u^eps(t, p) = u0 evaluated at the engine's backward-flow endpoint.
/// Exterior points short-circuit to u0(p) (the field vanishes there).
/// Engine failures are reported as std::runtime_error.
double solve_eps(const ApproxParams& params, const InitialDatum& u0, double t, const Point3& p,
                 const IntegratorConfig& cfg);

// =============================================================================
// Sampled solutions on a ball grid
// =============================================================================

/// Scalar field sampled at cell centers of the uniform n^3 grid over the
/// bounding cube [-R, R]^3, one slice per time stamp; nodes outside B_R are
/// masked (stored as zero, skipped by every reduction).
struct GridField {
    double radius = 1.0;
    int n = 16;
    std::vector<double> times;
    std::vector<double> values;  // times.size() slices of n^3 node values

    double h() const { return 2.0 * radius / n; }
    std::size_t nodes() const { return std::size_t(n) * n * n; }
    Point3 node(std::size_t flat) const;
    bool inside(std::size_t flat) const { return node(flat).norm2() <= radius * radius; }
    double value(std::size_t time_index, std::size_t flat) const {
        return values[time_index * nodes() + flat];
    }
};

GridField sample_exact_solution(double theta, const InitialDatum& u0, double R, int n,
                                std::span<const double> times, int threads = 1);

GridField sample_eps_solution(const ApproxParams& params, const InitialDatum& u0, double R, int n,
                              std::span<const double> times, const IntegratorConfig& cfg,
                              int threads = 1);

/// CSV persistence: a header row carrying (R, n, t-stamps) followed by one
/// row per node and slice.  read_grid_csv inverts write_grid_csv exactly.
void write_grid_csv(std::ostream& os, const GridField& g);
GridField read_grid_csv(std::istream& is);

/// Cell-sum L^1 distance over the ball between two slices on matching grids.
double l1_loc_distance(const GridField& f, std::size_t fi, const GridField& g, std::size_t gi);

/// Cell-sum pairing of one slice against a test function supported in B_R.
double weak_star_pairing(const GridField& f, std::size_t fi,
                         const std::function<double(const Point3&)>& testfn);

// =============================================================================
// Weak-form residual
// =============================================================================

/// Smooth space-time bump eta(t) psi(x) with psi supported in |x-c| < radius
/// and eta supported in t < t_cut.
struct SpaceTimeBump {
    Point3 center{0, 0, 0};
    double radius = 0.5;
    double t_cut = 1.0;

    double value(double t, const Point3& p) const;
    double dt(double t, const Point3& p) const;
    Vec3 grad(double t, const Point3& p) const;
};

/// | iint u (dphi/dt + b . grad phi) dx dt + int u0 phi(0, .) dx |
/// by trapezoid in time over the sampled stamps and cell sums in space.
/// The first stamp must be t = 0 and the stamps must cover [0, t_cut].
double weak_form_residual(const GridField& u, const Field& b, const SpaceTimeBump& phi);

}  // namespace roughflow
