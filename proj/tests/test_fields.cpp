#include <doctest.h>

#include <cmath>
#include <sstream>

#include "roughflow/fields.hpp"
#include "roughflow/util.hpp"

using namespace roughflow;

TEST_CASE("limit field pointwise values") {
    const Vec3 a = eval_b({0, 0, 0.5});
    CHECK(a.x == 0.0);
    CHECK(a.y == 0.0);
    CHECK(a.z == doctest::Approx(-4.0).epsilon(1e-15));

    const Vec3 b = eval_b({1, 0, 0.5});
    CHECK(b.norm() == 0.0);

    const Vec3 c = eval_b({0.3, 0.4, -1});
    CHECK(c.x == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(c.y == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(c.z == doctest::Approx(-2.0).epsilon(1e-15));

    CHECK(eval_b({0, 0, 0}).norm() == 0.0);  // origin convention
}

TEST_CASE("limit field odd symmetry in the plane") {
    HaltonSampler hs(5);
    for (int i = 0; i < 300; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        const Point3 p{u - 0.5, v - 0.5, 2.0 * w - 1.0};
        const Vec3 f1 = eval_b(p);
        const Vec3 f2 = eval_b({-p.x, -p.y, p.z});
        CHECK(f2.x == doctest::Approx(-f1.x).epsilon(1e-14));
        CHECK(f2.y == doctest::Approx(-f1.y).epsilon(1e-14));
        CHECK(f2.z == doctest::Approx(f1.z).epsilon(1e-14));
    }
}

TEST_CASE("approximating field values") {
    const ApproxParams g(0.1, M_PI);
    const Vec3 axis = eval_b_eps(g, {0, 0, 0});
    CHECK(axis.x == 0.0);
    CHECK(axis.y == 0.0);
    CHECK(axis.z == doctest::Approx(-27.0 / (16.0 * g.beta * g.eps)).epsilon(1e-15));
    CHECK(axis.z == doctest::Approx(-10.364824484140064).epsilon(1e-12));

    // P-_eps agrees exactly with the limit field
    const Point3 pm{0.2, -0.1, -0.8};
    REQUIRE(classify_eps(g, pm) == RegionLabel::PMinusEps);
    const Vec3 f1 = eval_b_eps(g, pm);
    const Vec3 f2 = eval_b(pm);
    CHECK(f1.x == f2.x);
    CHECK(f1.y == f2.y);
    CHECK(f1.z == f2.z);

    CHECK(eval_b_eps(g, {5, 5, 0}).norm() == 0.0);
}

TEST_CASE("field agreement on the upper paraboloid region") {
    const ApproxParams g(0.05, M_PI_2);
    HaltonSampler hs(7);
    for (int i = 0; i < 200; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        const double z = g.alpha * g.eps + (1.0 - g.alpha * g.eps) * w;
        const double r = std::sqrt(u * z);
        const Point3 p{r * std::cos(2 * M_PI * v), r * std::sin(2 * M_PI * v), z};
        REQUIRE(classify_eps(g, p) == RegionLabel::PPlusEps);
        const Vec3 f1 = eval_b_eps(g, p);
        const Vec3 f2 = eval_b(p);
        CHECK(f1.x == f2.x);
        CHECK(f1.y == f2.y);
        CHECK(f1.z == f2.z);
    }
}

TEST_CASE("vertical component and radial part are continuous across the planes") {
    const ApproxParams g(0.08, M_PI);
    const double be = g.beta * g.eps;
    const double planes[4] = {g.alpha * g.eps, be, -g.gamma * g.eps, -g.eta * g.eps};
    const RegionLabel above[4] = {RegionLabel::PPlusEps, RegionLabel::TPlusEps, RegionLabel::CylEps,
                                  RegionLabel::TMinusEps};
    const RegionLabel below[4] = {RegionLabel::TPlusEps, RegionLabel::CylEps, RegionLabel::TMinusEps,
                                  RegionLabel::PMinusEps};
    for (int k = 0; k < 4; ++k) {
        const Point3 p{0.05, 0.02, planes[k]};
        const Vec3 fa = eval_b_eps_branch(g, above[k], p);
        const Vec3 fb = eval_b_eps_branch(g, below[k], p);
        CHECK(fa.z == doctest::Approx(fb.z).epsilon(1e-12));
        // radial parts agree; (the rotation rate jumps at z = +-beta*eps by
        // construction, so only compare the radial projection)
        const double rr = std::sqrt(p.radius2());
        const double ra = (fa.x * p.x + fa.y * p.y) / rr;
        const double rb = (fb.x * p.x + fb.y * p.y) / rr;
        CHECK(ra == doctest::Approx(rb).epsilon(1e-10));
    }
}

TEST_CASE("2D field branch values") {
    const Vec2 a = eval_b_dpl2d({0, 1});
    CHECK(a.x == 0.0);
    CHECK(a.y == doctest::Approx(-1.0));
    const Vec2 b = eval_b_dpl2d({1, 0.5});
    CHECK(b.x == doctest::Approx(-1.0));
    CHECK(b.y == doctest::Approx(-1.0));
    const Vec2 c = eval_b_dpl2d({-1, -0.5});
    CHECK(c.x == doctest::Approx(1.0));
    CHECK(c.y == doctest::Approx(-1.0));
    CHECK(eval_b_dpl2d({0, 0}).x == 0.0);
}

TEST_CASE("finite-difference divergence") {
    const Field constant = Field::custom([](const Vec3&) { return Vec3{1.0, -2.0, 0.5}; });
    CHECK(*divergence_fd(constant, {0.2, 0.1, -0.3}, 1e-5) == 0.0);

    const Field linear = Field::custom([](const Vec3& p) { return Vec3{p.x, p.y, -2.0 * p.z}; });
    CHECK(std::fabs(*divergence_fd(linear, {0.4, -0.2, 0.9}, 1e-4)) <= 1e-12);

    const ApproxParams g(0.1, M_PI);
    const Field f = Field::approx(g);
    const Point3 in_cyl{0.1, 0.05, 0.0};
    REQUIRE(classify_eps(g, in_cyl) == RegionLabel::CylEps);
    CHECK(std::fabs(*divergence_fd(f, in_cyl, 1e-5)) <= 1e-8);

    // stencil straddling an interface is refused
    const Point3 near_plane{0.05, 0.0, g.beta * g.eps - 1e-7};
    CHECK_FALSE(divergence_fd(f, near_plane, 1e-5).has_value());
}

TEST_CASE("normal flux vanishes on the boundary surfaces") {
    const ApproxParams g(0.1, M_PI_2);

    // paraboloid wall of the limit field: hand algebra gives exactly zero
    for (double z : {0.3, 0.7, 1.4}) {
        const Point3 p{std::sqrt(z) * 0.6, std::sqrt(z) * 0.8, z};
        CHECK(std::fabs(normal_flux_limit(p)) <= 1e-10);
        const Point3 q{std::sqrt(z) * 0.6, std::sqrt(z) * 0.8, -z};
        CHECK(std::fabs(normal_flux_limit(q)) <= 1e-10);
    }

    // cylinder wall: azimuthal field is orthogonal to the radial normal
    const double rw = std::sqrt(g.cyl_radius2());
    CHECK(std::fabs(normal_flux(g, {rw, 0, 0}, InterfaceId::CylWall)) <= 1e-14);

    // lateral transition surface
    const double z = 1.2 * g.beta * g.eps;
    const double r = std::sqrt(lateral_wall_r2_plus(g, z));
    CHECK(std::fabs(normal_flux(g, {r * 0.6, r * 0.8, z}, InterfaceId::LateralPlus)) <= 1e-8);

    CHECK_THROWS_AS(normal_flux(g, {1.0, 1.0, 1.0}, InterfaceId::CylWall), std::invalid_argument);
}

// Independent oracle: the axisymmetric reduction of int |b|^p over the ball
// minus the slab.  The inner radial integral has the closed form
//   (1/(p+2)) z^{-2p} [ (u_max + 4 z^2)^{p/2+1} - (4 z^2)^{p/2+1} ]
// with u_max = min(|z|, R^2 - z^2), leaving a 1D z-integral done adaptively.
namespace {
double reduced_inner(double z, double R, double p) {
    const double umax = std::min(z, R * R - z * z);
    if (umax <= 0.0) return 0.0;
    const double e = p / 2.0 + 1.0;
    return std::pow(z, -2.0 * p) / (2.0 * e) *
           (std::pow(umax + 4.0 * z * z, e) - std::pow(4.0 * z * z, e));
}

double simpson(double a, double b, double R, double p, int depth, double fa, double fm, double fb) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = reduced_inner(lm, R, p), frm = reduced_inner(rm, R, p);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth > 24 || std::fabs(left + right - whole) < 1e-12 * std::fabs(left + right)) {
        return left + right;
    }
    return simpson(a, m, R, p, depth + 1, fa, flm, fm) +
           simpson(m, b, R, p, depth + 1, fm, frm, fb);
}

double reduced_lp_oracle(double R, double rho, double p) {
    const double fa = reduced_inner(rho, R, p);
    const double fb = reduced_inner(R, R, p);
    const double fm = reduced_inner(0.5 * (rho + R), R, p);
    // both halves z > 0 and z < 0, and the 2*pi azimuthal factor
    return 2.0 * 2.0 * M_PI * simpson(rho, R, R, p, 0, fa, fm, fb);
}
}  // namespace

TEST_CASE("local Lp integral against the reduced oracle") {
    const Field f = Field::limit();
    QuadratureSpec spec;
    spec.radius = 1.0;
    spec.rho = 1e-2;
    spec.p = 1.0;
    const double full = lp_local_integral(f, spec);
    const double oracle = reduced_lp_oracle(1.0, 1e-2, 1.0);
    CHECK(std::fabs(full - oracle) / oracle <= 2e-3);

    const Field zero = Field::custom([](const Vec3&) { return Vec3{}; });
    QuadratureSpec zs = spec;
    CHECK(lp_local_integral(zero, zs) == 0.0);
}

TEST_CASE("p = 1 stabilizes under cutoff halving, p = 2 diverges") {
    const Field f = Field::limit();
    QuadratureSpec spec;
    spec.radius = 1.0;

    spec.p = 1.0;
    std::vector<double> vals;
    for (double rho : {4e-3, 2e-3, 1e-3}) {
        spec.rho = rho;
        vals.push_back(lp_local_integral(f, spec));
    }
    CHECK(std::fabs(vals[2] - vals[1]) / vals[2] <= 0.01);

    spec.p = 2.0;
    spec.rho = 1e-2;
    const double i2a = lp_local_integral(f, spec);
    spec.rho = 1e-3;
    const double i2b = lp_local_integral(f, spec);
    CHECK(i2b >= 2.0 * i2a);  // a full cutoff decade at least doubles it
}

TEST_CASE("sup norm scan scales like eps^{-3/2}") {
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
    std::vector<double> scans;
    for (double eps : eps_list) {
        scans.push_back(sup_norm_scan(ApproxParams(eps, M_PI_2), 5000, 9));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        const double x = std::log(eps_list[i]), y = std::log(scans[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = double(eps_list.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(-slope >= 1.3);
    CHECK(-slope <= 1.7);

    // the cylinder wall dominates: |b| there is known in closed form
    const ApproxParams g(0.05, M_PI_2);
    const double wall = std::hypot(std::sqrt(g.cyl_radius2()) / (g.eps * g.eps),
                                   27.0 / (16.0 * g.beta * g.eps));
    CHECK(sup_norm_scan(g, 5000, 9) >= 0.95 * wall);
    CHECK(sup_norm_scan(g, 5000, 9) <= 1.0001 * wall);
}

TEST_CASE("gradient scan scales like eps^{-5/2}") {
    // spot check of the sup-gradient bound inside the transition zones
    std::vector<double> eps_list{0.2, 0.1, 0.05};
    std::vector<double> grads;
    for (double eps : eps_list) {
        const ApproxParams g(eps, M_PI_2);
        const Field f = Field::approx(g);
        HaltonSampler hs(13);
        double worst = 0.0;
        for (int i = 0; i < 500; ++i) {
            double u, v, w;
            hs.next3(u, v, w);
            const double z = g.beta * g.eps * (1.05 + 0.25 * w);
            const double r = std::sqrt(0.7 * u * lateral_wall_r2_plus(g, z));
            const auto s = gradient_scale_fd(
                f, {r * std::cos(2 * M_PI * v), r * std::sin(2 * M_PI * v), z}, 1e-6);
            if (s) worst = std::max(worst, *s);
        }
        grads.push_back(worst);
    }
    const double rate = std::log(grads[0] / grads[2]) / std::log(eps_list[0] / eps_list[2]);
    CHECK(-rate >= 2.2);
    CHECK(-rate <= 2.8);
}

TEST_CASE("mollification basics") {
    const ApproxParams g(0.1, M_PI_2);
    const Field base = Field::approx(g);

    // delta = 0 is the identity path
    MollifyGridSpec spec;
    spec.r_max = 0.5;
    spec.z_min = -0.4;
    spec.z_max = 0.4;
    spec.spacing = 0.005;
    const Field same = mollify_field(base, 0.0, spec);
    CHECK(same.kind() == FieldKind::Approx3D);

    CHECK_THROWS_AS(MollifiedField(base, 0.01, spec), std::invalid_argument);  // spacing > delta/4
}

TEST_CASE("mollified field reproduces smooth values and averages jumps") {
    const ApproxParams g(0.1, M_PI_2);
    const Field base = Field::approx(g);
    const double be = g.beta * g.eps;

    auto build = [&](double delta) {
        MollifyGridSpec spec;
        spec.r_max = 0.6;
        spec.z_min = -0.45;
        spec.z_max = 0.55;
        spec.spacing = delta / 4.0;
        spec.threads = 2;
        return mollify_field(base, delta, spec);
    };

    // interior accuracy is O(delta^2): errors drop by about 4 under halving
    const Point3 deep{0.25, 0.1, 0.45};  // P+_eps, far from every interface
    REQUIRE(classify_eps(g, deep) == RegionLabel::PPlusEps);
    const Field m1 = build(0.04);
    const Field m2 = build(0.02);
    const double e1 = (m1(deep) - base(deep)).norm();
    const double e2 = (m2(deep) - base(deep)).norm();
    CHECK(e1 / e2 >= 2.2);
    CHECK(e1 / e2 <= 7.0);

    // on the rotation-jump plane the smoothed azimuthal velocity sits strictly
    // between the one-sided limits
    const double r0 = 0.5 * std::sqrt(g.cyl_radius2());
    const Point3 on_plane{r0, 0.0, be};
    const double vt_above = eval_b_eps_branch(g, RegionLabel::TPlusEps, on_plane).y;
    const double vt_below = eval_b_eps_branch(g, RegionLabel::CylEps, on_plane).y;
    const double vt_smooth = m2(on_plane).y;
    CHECK(vt_smooth > std::min(vt_above, vt_below));
    CHECK(vt_smooth < std::max(vt_above, vt_below));

    // the constant fall speed is reproduced exactly by the mass normalization
    // and the linear rotation to quadrature accuracy: probe deep inside the
    // cylinder where the field is linear
    const Point3 cyl_pt{0.02, 0.01, -0.02};
    REQUIRE(classify_eps(g, cyl_pt) == RegionLabel::CylEps);
    CHECK((m2(cyl_pt) - base(cyl_pt)).norm() <= 1e-5 * base(cyl_pt).norm());
}

TEST_CASE("mollified divergence stays small at grid scale") {
    const ApproxParams g(0.1, M_PI_2);
    const Field base = Field::approx(g);
    MollifyGridSpec spec;
    spec.r_max = 0.8;
    spec.z_min = -0.9;
    spec.z_max = 1.0;
    spec.spacing = 1e-2;
    spec.threads = 2;
    const Field m = mollify_field(base, 0.04, spec);

    HaltonSampler hs(21);
    std::vector<double> rel;
    for (int i = 0; i < 400; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        const double r = 0.7 * u;
        const Point3 p{r * std::cos(2 * M_PI * v), r * std::sin(2 * M_PI * v), -0.8 + 1.6 * w};
        const auto d = divergence_fd(m, p, 1e-2);
        const auto s = gradient_scale_fd(m, p, 1e-2);
        if (d && s) rel.push_back(std::fabs(*d) / std::max(1.0, *s));
    }
    std::sort(rel.begin(), rel.end());
    CHECK(rel[rel.size() / 2] <= 1e-3);
}

TEST_CASE("field csv export") {
    const Field f = Field::limit();
    std::vector<Point3> pts{{0, 0, 0.5}, {1, 0, 0.5}};
    std::ostringstream os;
    write_field_samples_csv(os, f, pts);
    const std::string out = os.str();
    CHECK(out.find("x,y,z,bx,by,bz,region_label") == 0);
    CHECK(out.find("P+") != std::string::npos);
    CHECK(out.find("exterior") != std::string::npos);

    SUBCASE("axis segment: fall speed is -2/|z|, monotone in z") {
        std::vector<Point3> axis;
        for (int i = 1; i <= 8; ++i) axis.push_back({0, 0, 0.2 * i});
        double prev = -1e9;
        for (const Point3& p : axis) {
            const double bz = f(p).z;
            CHECK(bz == doctest::Approx(-2.0 / p.z).epsilon(1e-15));
            CHECK(bz > prev);
            prev = bz;
        }
    }

    SUBCASE("exterior box: all-zero velocity columns") {
        const ApproxParams g(0.1, M_PI);
        const Field fa = Field::approx(g);
        for (double x : {1.2, 1.6}) {
            for (double z : {-0.4, 0.0, 0.4}) {
                CHECK(fa({x, 0.9, z}).norm() == 0.0);
            }
        }
    }

    SUBCASE("mixed box: labels in the csv match a reclassification") {
        const ApproxParams g(0.1, M_PI);
        const Field fa = Field::approx(g);
        std::vector<Point3> box;
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < 4; ++k) box.push_back({-0.5 + i / 3.0, 0.1, -0.5 + k / 3.0});
        std::ostringstream os2;
        write_field_samples_csv(os2, fa, box);
        std::istringstream is(os2.str());
        std::string line;
        std::getline(is, line);  // header
        for (const Point3& p : box) {
            REQUIRE(std::getline(is, line));
            const std::string label = line.substr(line.rfind(',') + 1);
            CHECK(label == region_name(classify_eps(g, p)));
        }
    }
}
