#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "roughflow/geometry.hpp"

namespace roughflow {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// =============================================================================
// Pointwise field evaluation
// =============================================================================

/// Limit field: b = (-sgn(z) x/z^2, -sgn(z) y/z^2, -2/|z|) on the paraboloid
/// pair P, zero elsewhere.  The plane z = 0 (and the origin) carry the zero
/// vector; the field is only defined up to measure zero there.
Vec3 eval_b(const Point3& p);

/// Approximating field b_eps.  Piecewise:
///   P+_eps : same formula as the limit field,
///   T+_eps : radial/rotational interpolation with third component
///            27 z (z - 2 beta eps) / (16 beta^3 eps^3),
///   C_eps  : rigid rotation (-y, x)/eps^2 with constant fall -27/(16 beta eps),
///   T-_eps : mirror transition,
///   P-_eps : limit formula,
/// and zero outside.  Every piece is divergence free and tangent to the
/// lateral boundaries; the vertical component is continuous across the
/// horizontal interfaces while the rotation rate jumps at z = +-beta*eps
/// (the field is BV, not Lipschitz, across those two planes).
Vec3 eval_b_eps(const ApproxParams& params, const Point3& p);

/// Evaluate the formula of a given region regardless of where p lies; the
/// formulas extend smoothly past the interfaces, which is what the ODE engine
/// integrates between events.
Vec3 eval_b_eps_branch(const ApproxParams& params, RegionLabel label, const Point3& p);

/// Same idea for the limit field's three labels.
Vec3 eval_b_branch(RegionLabel label, const Point3& p);

/// Planar two-branch field with non-unique flows (|x| <= |y| vs |x| > |y|).
Vec2 eval_b_dpl2d(const Vec2& p);

// =============================================================================
// Field handle
// =============================================================================

enum class FieldKind { Limit3D, Approx3D, MollifiedGrid, Custom };

class MollifiedField;

/// Value-semantics handle over the evaluators above plus sampled mollified
/// fields and ad-hoc test fields.  Piecewise kinds expose their region
/// structure so the ODE engine can freeze a branch between events.
class Field {
  public:
    static Field limit();
    static Field approx(const ApproxParams& params);
    static Field custom(std::function<Vec3(const Vec3&)> eval);
    static Field mollified(std::shared_ptr<const MollifiedField> m);

    Vec3 operator()(const Vec3& p) const;

    FieldKind kind() const { return kind_; }
    const ApproxParams* approx_params() const { return params_ ? &*params_ : nullptr; }
    const MollifiedField* grid() const { return grid_.get(); }

    bool piecewise() const { return kind_ == FieldKind::Limit3D || kind_ == FieldKind::Approx3D; }
    RegionLabel label_of(const Vec3& p) const;
    Vec3 eval_branch(RegionLabel label, const Vec3& p) const;

    /// Radii at which |f(.,z)| is non-smooth at height z (quadrature hints).
    std::vector<double> radial_breaks(double z) const;

  private:
    Field() = default;
    FieldKind kind_ = FieldKind::Custom;
    std::optional<ApproxParams> params_;
    std::shared_ptr<const MollifiedField> grid_;
    std::function<Vec3(const Vec3&)> custom_;
};

// =============================================================================
// Numerical regularity diagnostics
// =============================================================================

/// Central-difference divergence estimate.  Returns nullopt when the stencil
/// straddles a region interface of a piecewise field; the caller shrinks h or
/// skips the point (the distributional divergence across interfaces is zero by
/// tangency and is tested separately through normal_flux).
std::optional<double> divergence_fd(const Field& f, const Vec3& p, double h);

/// Largest |df_i/dx_j| from the same central-difference stencil; used to
/// normalize divergence checks.  nullopt on straddling stencils.
std::optional<double> gradient_scale_fd(const Field& f, const Vec3& p, double h);

/// Unit outward normal of one of the boundary surfaces at a point lying on it.
Vec3 surface_normal(const ApproxParams& params, const Point3& p, InterfaceId surface);

/// b_eps . n on a boundary surface of the approximation (zero analytically).
/// Throws std::invalid_argument when p is farther than ~1e-10 from the surface.
double normal_flux(const ApproxParams& params, const Point3& p, InterfaceId surface);

/// Same check for the limit field on the paraboloid walls.
double normal_flux_limit(const Point3& p);

// =============================================================================
// Local L^p integrals
// =============================================================================

struct QuadratureSpec {
    double radius = 1.0;  ///< ball radius R
    double rho = 1e-3;    ///< inner cutoff excising {|z| < rho}
    int nz = 64;          ///< z cells (geometrically graded toward z = 0)
    int nr = 64;          ///< radial cells
    int ntheta = 16;      ///< azimuthal nodes (trapezoid)
    double p = 1.0;       ///< exponent

    void validate() const;
};

/// Integral of |f|^p over B_R minus the slab {|z| < rho}, in cylindrical
/// coordinates with the radial integration split at the field's breakpoints.
double lp_local_integral(const Field& f, const QuadratureSpec& spec);

/// Max |b_eps| over stratified samples of the five regions within |z| <= 1.
double sup_norm_scan(const ApproxParams& params, int budget, std::uint64_t seed);

// =============================================================================
// Mollification
// =============================================================================

struct MollifyGridSpec {
    double r_max = 1.0;
    double z_min = -1.0;
    double z_max = 1.0;
    double spacing = 0.01;
    int quad_pts = 8;  ///< Gauss points per axis for the kernel integral
    int threads = 1;
};

/// Convolution of a rotation-equivariant field with the radial bump
/// c (1 - (|w|/delta)^2)^4, sampled on an (r, z) grid and interpolated
/// bilinearly; the cylindrical components are stored so the sampled field is
/// exactly equivariant.  Outside the sampled box the base field is returned
/// unsmoothed.
class MollifiedField {
  public:
    MollifiedField(const Field& base, double delta, const MollifyGridSpec& spec);

    Vec3 eval(const Vec3& p) const;
    double delta() const { return delta_; }
    const Field& base() const { return base_; }

  private:
    Field base_;
    double delta_;
    MollifyGridSpec spec_;
    int nr_ = 0, nz_ = 0;
    std::vector<double> vr_, vt_, vz_;  // nr_*nz_ cylindrical components
    bool in_box(double r, double z) const;
};

/// delta = 0 returns f itself (byte-compatible path).  Throws when the grid
/// spacing exceeds delta/4.
Field mollify_field(const Field& f, double delta, const MollifyGridSpec& spec);

// =============================================================================
// Export
// =============================================================================

/// CSV rows (x, y, z, bx, by, bz, region_label) for a batch of sample points.
void write_field_samples_csv(std::ostream& os, const Field& f, std::span<const Point3> points);

}  // namespace roughflow
