#include "roughflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "roughflow/util.hpp"

namespace roughflow {

// =============================================================================
// Pointwise evaluation
// =============================================================================

Vec3 eval_b(const Point3& p) {
    return eval_b_branch(classify_limit(p), p);
}

Vec3 eval_b_branch(RegionLabel label, const Point3& p) {
    switch (label) {
        case RegionLabel::PPlus: {
            if (p.z == 0.0) return {0.0, 0.0, 0.0};  // only the origin
            const double inv_z2 = 1.0 / (p.z * p.z);
            return {-p.x * inv_z2, -p.y * inv_z2, -2.0 / p.z};
        }
        case RegionLabel::PMinus: {
            const double inv_z2 = 1.0 / (p.z * p.z);
            return {p.x * inv_z2, p.y * inv_z2, 2.0 / p.z};
        }
        default:
            return {0.0, 0.0, 0.0};
    }
}

Vec3 eval_b_eps(const ApproxParams& g, const Point3& p) {
    return eval_b_eps_branch(g, classify_eps(g, p), p);
}

Vec3 eval_b_eps_branch(const ApproxParams& g, RegionLabel label, const Point3& p) {
    const double be = g.beta * g.eps;
    const double b3e3 = g.beta * g.beta * g.beta * g.eps * g.eps * g.eps;
    switch (label) {
        case RegionLabel::PPlusEps: {
            const double inv_z2 = 1.0 / (p.z * p.z);
            return {-p.x * inv_z2, -p.y * inv_z2, -2.0 / p.z};
        }
        case RegionLabel::TPlusEps: {
            const double a = -(27.0 / 16.0) * (p.z - be) / b3e3;
            const double c = (3.0 * p.z - 4.0 * be) / b3e3;
            const double bz = (27.0 / 16.0) * p.z * (p.z - 2.0 * be) / b3e3;
            return {a * p.x - c * p.y, c * p.x + a * p.y, bz};
        }
        case RegionLabel::CylEps: {
            const double inv_e2 = 1.0 / (g.eps * g.eps);
            return {-p.y * inv_e2, p.x * inv_e2, -27.0 / (16.0 * be)};
        }
        case RegionLabel::TMinusEps: {
            const double a = -(27.0 / 16.0) * (p.z + be) / b3e3;
            const double c = (3.0 * p.z + 4.0 * be) / b3e3;
            const double bz = (27.0 / 16.0) * p.z * (p.z + 2.0 * be) / b3e3;
            return {a * p.x - c * p.y, c * p.x + a * p.y, bz};
        }
        case RegionLabel::PMinusEps: {
            const double inv_z2 = 1.0 / (p.z * p.z);
            return {p.x * inv_z2, p.y * inv_z2, 2.0 / p.z};
        }
        default:
            return {0.0, 0.0, 0.0};
    }
}

Vec2 eval_b_dpl2d(const Vec2& p) {
    const double ax = std::fabs(p.x), ay = std::fabs(p.y);
    if (ax == 0.0 && ay == 0.0) return {0.0, 0.0};
    const double sy = (p.y > 0.0) - (p.y < 0.0);
    if (ax <= ay) {
        return {-sy * p.x / (p.y * p.y), -1.0 / ay};
    }
    return {-sy, -1.0};
}

// =============================================================================
// Field handle
// =============================================================================

Field Field::limit() {
    Field f;
    f.kind_ = FieldKind::Limit3D;
    return f;
}

Field Field::approx(const ApproxParams& params) {
    Field f;
    f.kind_ = FieldKind::Approx3D;
    f.params_ = params;
    return f;
}

Field Field::custom(std::function<Vec3(const Vec3&)> eval) {
    Field f;
    f.kind_ = FieldKind::Custom;
    f.custom_ = std::move(eval);
    return f;
}

Field Field::mollified(std::shared_ptr<const MollifiedField> m) {
    Field f;
    f.kind_ = FieldKind::MollifiedGrid;
    f.grid_ = std::move(m);
    if (f.grid_) f.params_ = f.grid_->base().params_;
    return f;
}

Vec3 Field::operator()(const Vec3& p) const {
    switch (kind_) {
        case FieldKind::Limit3D: return eval_b(p);
        case FieldKind::Approx3D: return eval_b_eps(*params_, p);
        case FieldKind::MollifiedGrid: return grid_->eval(p);
        case FieldKind::Custom: return custom_(p);
    }
    return {};
}

RegionLabel Field::label_of(const Vec3& p) const {
    if (kind_ == FieldKind::Limit3D) return classify_limit(p);
    if (kind_ == FieldKind::Approx3D) return classify_eps(*params_, p);
    throw std::logic_error("Field::label_of: field has no region structure");
}

Vec3 Field::eval_branch(RegionLabel label, const Vec3& p) const {
    if (kind_ == FieldKind::Limit3D) return eval_b_branch(label, p);
    if (kind_ == FieldKind::Approx3D) return eval_b_eps_branch(*params_, label, p);
    throw std::logic_error("Field::eval_branch: field has no region structure");
}

std::vector<double> Field::radial_breaks(double z) const {
    std::vector<double> breaks;
    const double az = std::fabs(z);
    if (kind_ == FieldKind::Limit3D) {
        if (az > 0.0) breaks.push_back(std::sqrt(az));
    } else if (kind_ == FieldKind::Approx3D) {
        const ApproxParams& g = *params_;
        if (z >= g.alpha * g.eps || z <= -g.eta * g.eps) {
            breaks.push_back(std::sqrt(az));
        } else if (z > g.beta * g.eps) {
            breaks.push_back(std::sqrt(lateral_wall_r2_plus(g, z)));
        } else if (z < -g.gamma * g.eps) {
            breaks.push_back(std::sqrt(lateral_wall_r2_minus(g, z)));
        } else {
            breaks.push_back(std::sqrt(g.cyl_radius2()));
        }
    }
    return breaks;
}

// =============================================================================
// Diagnostics
// =============================================================================

namespace {

bool stencil_one_region(const Field& f, const Vec3& p, double h) {
    if (!f.piecewise()) return true;
    const RegionLabel l0 = f.label_of(p);
    for (int d = 0; d < 3; ++d) {
        for (double s : {-h, h}) {
            Vec3 q = p;
            q[d] += s;
            if (f.label_of(q) != l0) return false;
        }
    }
    return true;
}

}  // namespace

std::optional<double> divergence_fd(const Field& f, const Vec3& p, double h) {
    if (!stencil_one_region(f, p, h)) return std::nullopt;
    double div = 0.0;
    for (int d = 0; d < 3; ++d) {
        Vec3 qp = p, qm = p;
        qp[d] += h;
        qm[d] -= h;
        div += (f(qp)[d] - f(qm)[d]) / (2.0 * h);
    }
    return div;
}

std::optional<double> gradient_scale_fd(const Field& f, const Vec3& p, double h) {
    if (!stencil_one_region(f, p, h)) return std::nullopt;
    double scale = 0.0;
    for (int d = 0; d < 3; ++d) {
        Vec3 qp = p, qm = p;
        qp[d] += h;
        qm[d] -= h;
        const Vec3 df = (f(qp) - f(qm)) * (1.0 / (2.0 * h));
        scale = std::max({scale, std::fabs(df.x), std::fabs(df.y), std::fabs(df.z)});
    }
    return scale;
}

namespace {

// Unnormalized outward gradient of the surface's defining function.
Vec3 surface_gradient(const ApproxParams& g, const Point3& p, InterfaceId s) {
    const double be = g.beta * g.eps;
    const double ge = g.gamma * g.eps;
    switch (s) {
        case InterfaceId::ParabUpper: return {2.0 * p.x, 2.0 * p.y, -1.0};
        case InterfaceId::ParabLower: return {2.0 * p.x, 2.0 * p.y, 1.0};
        case InterfaceId::CylWall: return {2.0 * p.x, 2.0 * p.y, 0.0};
        case InterfaceId::LateralPlus: {
            // F = 27 r^2 [(z-be)^2 - be^2] + 32 be^3, outward = -grad F
            const double dz = p.z - be;
            const double fr = 27.0 * (dz * dz - be * be);
            return {-2.0 * p.x * fr, -2.0 * p.y * fr, -54.0 * p.radius2() * dz};
        }
        case InterfaceId::LateralMinus: {
            const double dz = p.z + ge;
            const double fr = 27.0 * (dz * dz - ge * ge);
            return {-2.0 * p.x * fr, -2.0 * p.y * fr, -54.0 * p.radius2() * dz};
        }
        default:
            throw std::invalid_argument("surface_normal: not a lateral/wall surface");
    }
}

double surface_value(const ApproxParams& g, const Point3& p, InterfaceId s) {
    return boundary_values(g, p)[int(s)];
}

RegionLabel surface_region(InterfaceId s, double z) {
    switch (s) {
        case InterfaceId::ParabUpper: return RegionLabel::PPlusEps;
        case InterfaceId::ParabLower: return RegionLabel::PMinusEps;
        case InterfaceId::CylWall: return RegionLabel::CylEps;
        case InterfaceId::LateralPlus: return RegionLabel::TPlusEps;
        case InterfaceId::LateralMinus: return RegionLabel::TMinusEps;
        default:
            return z >= 0.0 ? RegionLabel::PPlusEps : RegionLabel::PMinusEps;
    }
}

}  // namespace

Vec3 surface_normal(const ApproxParams& g, const Point3& p, InterfaceId s) {
    Vec3 n = surface_gradient(g, p, s);
    const double len = n.norm();
    if (len == 0.0) throw std::invalid_argument("surface_normal: degenerate point");
    return n * (1.0 / len);
}

double normal_flux(const ApproxParams& g, const Point3& p, InterfaceId s) {
    const double val = surface_value(g, p, s);
    const double glen = surface_gradient(g, p, s).norm();
    if (glen == 0.0 || std::fabs(val) / glen > 1e-10 * std::max(1.0, p.norm())) {
        throw std::invalid_argument("normal_flux: point is not on the requested surface");
    }
    const Vec3 b = eval_b_eps_branch(g, surface_region(s, p.z), p);
    return b.dot(surface_normal(g, p, s));
}

double normal_flux_limit(const Point3& p) {
    const double r2 = p.radius2();
    const double du = std::fabs(r2 - p.z);
    const double dl = std::fabs(r2 + p.z);
    const bool upper = du <= dl;
    const double dist = (upper ? du : dl) / std::max(1.0, 2.0 * std::sqrt(r2) + 1.0);
    if (dist > 1e-10 * std::max(1.0, p.norm())) {
        throw std::invalid_argument("normal_flux_limit: point is not on the paraboloid");
    }
    Vec3 n{2.0 * p.x, 2.0 * p.y, upper ? -1.0 : 1.0};
    n = n * (1.0 / n.norm());
    const Vec3 b = eval_b_branch(upper ? RegionLabel::PPlus : RegionLabel::PMinus, p);
    return b.dot(n);
}

// =============================================================================
// Local L^p integral
// =============================================================================

void QuadratureSpec::validate() const {
    if (!(rho > 0.0) || !(rho < radius)) throw std::invalid_argument("QuadratureSpec: need 0 < rho < radius");
    if (nz < 8 || nr < 8 || ntheta < 8) throw std::invalid_argument("QuadratureSpec: node counts must be >= 8");
    if (!(p >= 1.0)) throw std::invalid_argument("QuadratureSpec: exponent must be >= 1");
}

namespace {

// 4-point Gauss-Legendre on [0, 1].
constexpr double kGLx[4] = {0.06943184420297371, 0.33000947820757187,
                            0.66999052179242813, 0.93056815579702629};
constexpr double kGLw[4] = {0.17392742256872693, 0.32607257743127307,
                            0.32607257743127307, 0.17392742256872693};

template <typename F>
double gauss_cell(double a, double b, F&& fn) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += kGLw[i] * fn(a + (b - a) * kGLx[i]);
    return s * (b - a);
}

}  // namespace

double lp_local_integral(const Field& f, const QuadratureSpec& spec) {
    spec.validate();
    const double R = spec.radius;
    double total = 0.0;

    for (int sign = -1; sign <= 1; sign += 2) {
        // Geometric z mesh from rho toward R: finer cells near the cutoff where
        // the integrand varies fastest.
        std::vector<double> zedges(spec.nz + 1);
        const double ratio = std::pow(R / spec.rho, 1.0 / spec.nz);
        for (int k = 0; k <= spec.nz; ++k) zedges[k] = spec.rho * std::pow(ratio, k);

        for (int k = 0; k < spec.nz; ++k) {
            total += gauss_cell(zedges[k], zedges[k + 1], [&](double az) {
                const double z = sign * az;
                const double rmax = std::sqrt(std::max(0.0, R * R - z * z));
                if (rmax <= 0.0) return 0.0;

                // Split the radial range at the field's breakpoints.
                std::vector<double> redges{0.0};
                for (double rb : f.radial_breaks(z)) {
                    if (rb > 0.0 && rb < rmax) redges.push_back(rb);
                }
                redges.push_back(rmax);
                std::sort(redges.begin(), redges.end());

                double slice = 0.0;
                for (std::size_t seg = 0; seg + 1 < redges.size(); ++seg) {
                    const int cells = std::max(2, spec.nr / int(redges.size() - 1));
                    const double h = (redges[seg + 1] - redges[seg]) / cells;
                    for (int c = 0; c < cells; ++c) {
                        const double r0 = redges[seg] + c * h;
                        slice += gauss_cell(r0, r0 + h, [&](double r) {
                            double ts = 0.0;
                            for (int m = 0; m < spec.ntheta; ++m) {
                                const double th = 2.0 * M_PI * (m + 0.5) / spec.ntheta;
                                const Vec3 v = f({r * std::cos(th), r * std::sin(th), z});
                                ts += std::pow(v.norm(), spec.p);
                            }
                            return ts * (2.0 * M_PI / spec.ntheta) * r;
                        });
                    }
                }
                return slice;
            });
        }
    }
    return total;
}

// =============================================================================
// Sup-norm scan
// =============================================================================

double sup_norm_scan(const ApproxParams& g, int budget, std::uint64_t seed) {
    if (budget < 1000) throw std::invalid_argument("sup_norm_scan: budget must be >= 1e3");
    HaltonSampler hs(seed);
    const double zmax = 1.0;
    const double ae = g.alpha * g.eps;
    const double be = g.beta * g.eps;
    const double ge = g.gamma * g.eps;
    const double ee = g.eta * g.eps;
    const int per = budget / 5;
    double best = 0.0;

    auto probe = [&](double r2, double th, double z) {
        const Vec3 p{std::sqrt(std::max(0.0, r2)) * std::cos(th),
                     std::sqrt(std::max(0.0, r2)) * std::sin(th), z};
        best = std::max(best, eval_b_eps(g, p).norm());
    };

    for (int i = 0; i < per; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        const double th = 2.0 * M_PI * v;
        if (ae < zmax) {  // P+_eps
            const double z = ae + (zmax - ae) * w;
            probe(u * z, th, z);
        }
        {  // T+_eps
            const double z = be + (ae - be) * w;
            probe(u * lateral_wall_r2_plus(g, std::min(z, ae * (1 - 1e-12))), th, z);
        }
        {  // C_eps
            const double z = -ge + (be + ge) * w;
            probe(u * g.cyl_radius2(), th, z);
        }
        {  // T-_eps
            const double z = -ee + (ee - ge) * w;
            probe(u * lateral_wall_r2_minus(g, std::max(z, -ee * (1 - 1e-12))), th, z);
        }
        if (ee < zmax) {  // P-_eps
            const double z = -(ee + (zmax - ee) * w);
            probe(u * (-z), th, z);
        }
    }
    return best;
}

// =============================================================================
// Mollification
// =============================================================================

namespace {

// Unit-mass radial bump c (1 - (|w|/delta)^2)^4 restricted to |w| < delta.
double bump_unnormalized(double rr2, double delta2) {
    const double t = 1.0 - rr2 / delta2;
    if (t <= 0.0) return 0.0;
    const double t2 = t * t;
    return t2 * t2;
}

}  // namespace

namespace {

// Composite 4-pt Gauss nodes over [a, b] with roughly `span` per cell.
void composite_gauss(double a, double b, double span, std::vector<double>& xs,
                     std::vector<double>& ws) {
    xs.clear();
    ws.clear();
    if (!(b > a)) return;
    const int cells = std::max(1, int(std::ceil((b - a) / span)));
    const double h = (b - a) / cells;
    for (int c = 0; c < cells; ++c) {
        for (int j = 0; j < 4; ++j) {
            xs.push_back(a + h * (c + kGLx[j]));
            ws.push_back(h * kGLw[j]);
        }
    }
}

}  // namespace

MollifiedField::MollifiedField(const Field& base, double delta, const MollifyGridSpec& spec)
    : base_(base), delta_(delta), spec_(spec) {
    if (!(delta > 0.0)) throw std::invalid_argument("MollifiedField: delta must be positive");
    if (spec.spacing > delta / 4.0 + 1e-15) {
        throw std::invalid_argument("MollifiedField: grid spacing must be <= delta/4");
    }
    if (base.kind() != FieldKind::Limit3D && base.kind() != FieldKind::Approx3D) {
        throw std::invalid_argument("MollifiedField: base field must be rotation equivariant");
    }
    nr_ = int(std::ceil(spec.r_max / spec.spacing)) + 1;
    nz_ = int(std::ceil((spec.z_max - spec.z_min) / spec.spacing)) + 1;
    vr_.assign(std::size_t(nr_) * nz_, 0.0);
    vt_.assign(std::size_t(nr_) * nz_, 0.0);
    vz_.assign(std::size_t(nr_) * nz_, 0.0);

    // The convolution is evaluated in axis-centered cylindrical coordinates:
    // all jump surfaces of the base field are z-planes or radii r_break(z'),
    // so splitting the (z', r') cells there leaves piecewise-smooth
    // integrands.  Equivariance kills the odd azimuthal moments, so only
    //   M0 = int psi dphi,   M1 = int psi cos(phi) dphi
    // are needed and the azimuthal integral costs no field evaluations.
    const double d2 = delta * delta;

    // z-plane split positions of the base field
    std::vector<double> plane_z;
    if (base.kind() == FieldKind::Approx3D) {
        const ApproxParams& g = *base.approx_params();
        plane_z = {g.alpha * g.eps, g.beta * g.eps, -g.gamma * g.eps, -g.eta * g.eps};
    } else {
        plane_z = {0.0};
    }

    const int nphi = std::max(8, spec.quad_pts);

    parallel_for(std::size_t(nz_), spec.threads, [&](std::size_t jz) {
        const double z = spec_.z_min + double(jz) * spec_.spacing;
        std::vector<double> zs, zw, rs, rw, ps, pw;

        for (int ir = 0; ir < nr_; ++ir) {
            const double r = double(ir) * spec_.spacing;

            // z' cells split at the field's planes
            std::vector<double> zcuts{z - delta, z + delta};
            for (double zp : plane_z) {
                if (zp > z - delta && zp < z + delta) zcuts.push_back(zp);
            }
            std::sort(zcuts.begin(), zcuts.end());

            double gx = 0.0, gy = 0.0, gz = 0.0, mass = 0.0;
            for (std::size_t zc = 0; zc + 1 < zcuts.size(); ++zc) {
                composite_gauss(zcuts[zc], zcuts[zc + 1], delta / 2.0, zs, zw);
                for (std::size_t iz = 0; iz < zs.size(); ++iz) {
                    const double zp = zs[iz];
                    const double dz2 = (z - zp) * (z - zp);
                    const double rho2 = d2 - dz2;
                    if (rho2 <= 0.0) continue;
                    const double rho = std::sqrt(rho2);

                    // r' cells split at the wall radius and at the kink where
                    // the kernel disk stops covering the full circle
                    const double rlo = std::max(0.0, r - rho);
                    const double rhi = r + rho;
                    std::vector<double> rcuts{rlo, rhi};
                    for (double rb : base_.radial_breaks(zp)) {
                        if (rb > rlo && rb < rhi) rcuts.push_back(rb);
                    }
                    const double kink = rho - r;
                    if (kink > rlo && kink < rhi) rcuts.push_back(kink);
                    std::sort(rcuts.begin(), rcuts.end());

                    for (std::size_t rc = 0; rc + 1 < rcuts.size(); ++rc) {
                        composite_gauss(rcuts[rc], rcuts[rc + 1], delta / 2.0, rs, rw);
                        for (std::size_t irp = 0; irp < rs.size(); ++irp) {
                            const double rp = rs[irp];
                            const double c1 = r * r + rp * rp + dz2;
                            const double c2 = 2.0 * r * rp;
                            // support: c1 - c2 cos(phi) <= delta^2
                            double m0 = 0.0, m1 = 0.0;
                            if (c2 <= 1e-300) {
                                const double psi = bump_unnormalized(c1, d2);
                                m0 = 2.0 * M_PI * psi;
                                m1 = 0.0;
                            } else {
                                const double carg = (c1 - d2) / c2;
                                if (carg >= 1.0) continue;  // no support
                                const double phib = carg <= -1.0 ? M_PI : std::acos(carg);
                                composite_gauss(0.0, phib, M_PI / nphi, ps, pw);
                                for (std::size_t ip = 0; ip < ps.size(); ++ip) {
                                    const double psi =
                                        bump_unnormalized(c1 - c2 * std::cos(ps[ip]), d2);
                                    m0 += 2.0 * pw[ip] * psi;
                                    m1 += 2.0 * pw[ip] * psi * std::cos(ps[ip]);
                                }
                            }
                            const Vec3 f = base_({rp, 0.0, zp});
                            const double wgt = rp * rw[irp] * zw[iz];
                            gx += f.x * m1 * wgt;
                            gy += f.y * m1 * wgt;
                            gz += f.z * m0 * wgt;
                            mass += m0 * wgt;
                        }
                    }
                }
            }

            const std::size_t idx = jz * nr_ + ir;
            vr_[idx] = gx / mass;  // e_r component at azimuth 0
            vt_[idx] = gy / mass;  // e_theta component
            vz_[idx] = gz / mass;
        }
    });
}

bool MollifiedField::in_box(double r, double z) const {
    return r <= spec_.r_max && z >= spec_.z_min && z <= spec_.z_max;
}

Vec3 MollifiedField::eval(const Vec3& p) const {
    const double r = std::hypot(p.x, p.y);
    if (!in_box(r, p.z)) return base_(p);

    const double fi = r / spec_.spacing;
    const double fj = (p.z - spec_.z_min) / spec_.spacing;
    const int i0 = std::min(nr_ - 2, int(fi));
    const int j0 = std::min(nz_ - 2, int(fj));
    const double ti = fi - i0, tj = fj - j0;

    auto lerp2 = [&](const std::vector<double>& v) {
        const std::size_t k00 = std::size_t(j0) * nr_ + i0;
        const std::size_t k10 = k00 + 1;
        const std::size_t k01 = k00 + nr_;
        const std::size_t k11 = k01 + 1;
        return (1 - ti) * (1 - tj) * v[k00] + ti * (1 - tj) * v[k10] +
               (1 - ti) * tj * v[k01] + ti * tj * v[k11];
    };

    const double cr = lerp2(vr_);
    const double ct = lerp2(vt_);
    const double cz = lerp2(vz_);
    double cph = 1.0, sph = 0.0;
    if (r > 0.0) {
        cph = p.x / r;
        sph = p.y / r;
    }
    return {cr * cph - ct * sph, cr * sph + ct * cph, cz};
}

Field mollify_field(const Field& f, double delta, const MollifyGridSpec& spec) {
    if (delta == 0.0) return f;
    return Field::mollified(std::make_shared<MollifiedField>(f, delta, spec));
}

// =============================================================================
// Export
// =============================================================================

void write_field_samples_csv(std::ostream& os, const Field& f, std::span<const Point3> points) {
    os << "x,y,z,bx,by,bz,region_label\n";
    os << std::setprecision(17);
    for (const Point3& p : points) {
        const Vec3 v = f(p);
        const char* label = f.piecewise() ? region_name(f.label_of(p)) : "-";
        os << p.x << ',' << p.y << ',' << p.z << ',' << v.x << ',' << v.y << ',' << v.z << ','
           << label << '\n';
    }
}

}  // namespace roughflow
