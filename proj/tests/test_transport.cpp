#include <doctest.h>

#include <cmath>
#include <sstream>

#include "roughflow/exact_flows.hpp"
#include "roughflow/transport.hpp"
#include "roughflow/util.hpp"

using namespace roughflow;

TEST_CASE("datum bounds hold on samples") {
    const InitialDatum u0 = default_datum();
    HaltonSampler hs(31);
    std::vector<Point3> pts;
    for (int i = 0; i < 60; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        pts.push_back({4.0 * (u - 0.5), 4.0 * (v - 0.5), 4.0 * (w - 0.5)});
    }
    CHECK(validate_datum(u0, pts));
    CHECK(validate_datum(radial_datum(), pts));
}

TEST_CASE("exact solution basics") {
    const InitialDatum u0 = default_datum();
    const Point3 p{0.3, -0.2, 0.7};
    CHECK(solve_exact(1.0, u0, 0.0, p) == doctest::Approx(u0.eval(p)).epsilon(1e-15));

    // radial data cannot see the rotation
    const InitialDatum ur = radial_datum();
    const Point3 q{0.1, 0.4, -1.2};
    const double a = solve_exact(M_PI_2, ur, 0.8, q);
    const double b = solve_exact(M_PI, ur, 0.8, q);
    CHECK(a == doctest::Approx(b).epsilon(1e-13));

    // the default datum does: frozen composition values at p = (0, 0.4, -1.8)
    const Point3 r{0.0, 0.4, -1.8};
    CHECK(solve_exact(M_PI_2, u0, 1.0, r) == doctest::Approx(0.12047839791650786).epsilon(1e-10));
    CHECK(std::fabs(solve_exact(M_PI, u0, 1.0, r)) <= 1e-12);
}

TEST_CASE("eps solution agrees with the exact one away from the zone") {
    const ApproxParams g(0.1, M_PI_2);
    const InitialDatum u0 = default_datum();
    IntegratorConfig cfg;

    // exterior point: both are the datum
    const Point3 ext{1.5, 0.0, 0.2};
    CHECK(solve_eps(g, u0, 0.7, ext, cfg) == doctest::Approx(u0.eval(ext)).epsilon(1e-15));

    // P- point at small time: the backward trajectory stays in P-_eps where
    // the two fields coincide
    const Point3 pm{0.2, 0.1, -1.0};
    const double t = 0.1;
    const double a = solve_eps(g, u0, t, pm, cfg);
    const double b = solve_exact(M_PI_2, u0, t, pm);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("sup error of the eps solution shrinks like sqrt(eps)") {
    const InitialDatum u0 = default_datum();
    IntegratorConfig cfg;
    cfg.rtol = 1e-9;
    cfg.atol = 1e-11;
    HaltonSampler hs(37);
    std::vector<Point3> pts;
    for (int i = 0; i < 40; ++i) {
        double u, v, w;
        hs.next3(u, v, w);
        const double z = -(0.2 + 1.2 * w);
        const double r = std::sqrt(0.9 * u * (-z));
        pts.push_back({r * std::cos(2 * M_PI * v), r * std::sin(2 * M_PI * v), z});
    }
    std::vector<double> eps_list{0.2, 0.1, 0.05};
    std::vector<double> sups;
    for (double eps : eps_list) {
        const ApproxParams g(eps, M_PI_2);
        double sup = 0.0;
        for (const Point3& p : pts) {
            const double a = solve_eps(g, u0, 0.8, p, cfg);
            const double b = solve_exact(M_PI_2, u0, 0.8, p);
            sup = std::max(sup, std::fabs(a - b));
        }
        sups.push_back(sup);
        // Lip(u0) * C sqrt(eps) with a generous C
        CHECK(sup <= u0.lip_bound * 3.0 * std::sqrt(eps));
    }
    CHECK(sups[1] < sups[0]);
    CHECK(sups[2] < sups[1]);
}

TEST_CASE("grid distances") {
    const InitialDatum u0 = default_datum();
    const std::vector<double> times{1.0};

    SUBCASE("identical grids have zero distance") {
        const GridField a = sample_exact_solution(M_PI_2, u0, 1.0, 24, times, 2);
        CHECK(l1_loc_distance(a, 0, a, 0) == 0.0);
    }

    SUBCASE("ball volume from the indicator pair") {
        GridField ones, zeros;
        ones.radius = zeros.radius = 1.0;
        ones.n = zeros.n = 64;
        ones.times = zeros.times = {0.0};
        ones.values.assign(ones.nodes(), 1.0);
        zeros.values.assign(zeros.nodes(), 0.0);
        const double vol = l1_loc_distance(ones, 0, zeros, 0);
        CHECK(vol == doctest::Approx(4.0 * M_PI / 3.0).epsilon(0.01));
    }

    SUBCASE("rotation pair distance is positive and grid stable") {
        const GridField a24 = sample_exact_solution(M_PI_2, u0, 2.0, 24, times, 2);
        const GridField b24 = sample_exact_solution(M_PI, u0, 2.0, 24, times, 2);
        const GridField a32 = sample_exact_solution(M_PI_2, u0, 2.0, 32, times, 2);
        const GridField b32 = sample_exact_solution(M_PI, u0, 2.0, 32, times, 2);
        const double d24 = l1_loc_distance(a24, 0, b24, 0);
        const double d32 = l1_loc_distance(a32, 0, b32, 0);
        CHECK(d24 > 0.0);
        CHECK(std::fabs(d32 - d24) / d32 <= 0.10);

        // identical angles give zero
        CHECK(l1_loc_distance(a24, 0, a24, 0) == 0.0);
    }

    SUBCASE("grid mismatch is an error") {
        const GridField a = sample_exact_solution(M_PI_2, u0, 1.0, 16, times, 1);
        const GridField b = sample_exact_solution(M_PI_2, u0, 1.0, 24, times, 1);
        CHECK_THROWS_AS(l1_loc_distance(a, 0, b, 0), std::invalid_argument);
    }
}

TEST_CASE("grid csv round trip") {
    const InitialDatum u0 = default_datum();
    const GridField g = sample_exact_solution(1.3, u0, 1.5, 12, std::vector<double>{0.0, 0.4}, 1);
    std::stringstream ss;
    write_grid_csv(ss, g);
    const GridField back = read_grid_csv(ss);
    CHECK(back.radius == g.radius);
    CHECK(back.n == g.n);
    REQUIRE(back.times.size() == g.times.size());
    CHECK(back.times[1] == g.times[1]);
    REQUIRE(back.values.size() == g.values.size());
    for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(back.values[i] == g.values[i]);
}

TEST_CASE("maximum principle on the grid") {
    const InitialDatum u0 = default_datum();
    const GridField g = sample_exact_solution(2.2, u0, 2.0, 24, std::vector<double>{0.9}, 2);
    double vmax = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        if (g.inside(i)) vmax = std::max(vmax, std::fabs(g.value(0, i)));
    }
    CHECK(vmax <= u0.sup_bound + 1e-12);
}

TEST_CASE("weak-star pairing basics") {
    const InitialDatum u0 = default_datum();
    GridField zeros;
    zeros.radius = 1.0;
    zeros.n = 16;
    zeros.times = {0.0};
    zeros.values.assign(zeros.nodes(), 0.0);
    const SpaceTimeBump bump{{0, 0, 0}, 0.5, 1.0};
    CHECK(weak_star_pairing(zeros, 0, [&](const Point3& p) { return bump.value(0.0, p); }) == 0.0);

    const GridField u = sample_exact_solution(1.0, u0, 1.0, 16, std::vector<double>{0.5}, 1);
    CHECK(weak_star_pairing(u, 0, [](const Point3&) { return 0.0; }) == 0.0);
}

TEST_CASE("weak-star pairings of eps solutions approach the exact ones") {
    const InitialDatum u0 = default_datum();
    IntegratorConfig cfg;
    cfg.rtol = 1e-8;
    cfg.atol = 1e-10;
    const std::vector<double> times{0.6};
    const double R = 1.6;
    const int n = 20;
    const GridField exact = sample_exact_solution(M_PI_2, u0, R, n, times, 2);
    const SpaceTimeBump bump{{0.0, 0.0, -0.8}, 0.5, 1.0};
    auto testfn = [&](const Point3& p) { return bump.value(0.0, p); };
    const double target = weak_star_pairing(exact, 0, testfn);

    std::vector<double> errs;
    for (double eps : {0.2, 0.1}) {
        const GridField ue = sample_eps_solution(ApproxParams(eps, M_PI_2), u0, R, n, times, cfg, 2);
        errs.push_back(std::fabs(weak_star_pairing(ue, 0, testfn) - target));
    }
    CHECK(errs[1] < errs[0]);
}

TEST_CASE("weak-form residual") {
    const InitialDatum u0 = default_datum();
    const Field b = Field::limit();
    const SpaceTimeBump phi{{0.4, 0.0, -1.0}, 0.5, 0.6};

    auto residual_at = [&](int n, int stamps) {
        std::vector<double> times(stamps);
        for (int i = 0; i < stamps; ++i) times[i] = 0.8 * i / (stamps - 1);
        const GridField u = sample_exact_solution(M_PI_2, u0, 2.0, n, times, 2);
        return weak_form_residual(u, b, phi);
    };

    SUBCASE("exact solutions satisfy the identity under refinement") {
        const double coarse = residual_at(24, 9);
        const double fine = residual_at(48, 17);
        CHECK(fine * 2.0 <= coarse);
    }

    SUBCASE("constants are weak solutions of the divergence-free equation") {
        std::vector<double> times(9);
        for (int i = 0; i < 9; ++i) times[i] = 0.8 * i / 8.0;
        GridField u;
        u.radius = 2.0;
        u.n = 32;
        u.times = times;
        u.values.assign(times.size() * u.nodes(), 0.7);
        const double res = weak_form_residual(u, b, phi);
        CHECK(res <= 2e-3);
    }

    SUBCASE("a frozen non-solution is rejected") {
        std::vector<double> times(17);
        for (int i = 0; i < 17; ++i) times[i] = 0.8 * i / 16.0;
        GridField frozen = sample_exact_solution(M_PI_2, u0, 2.0, 32, std::vector<double>{0.0}, 2);
        GridField u;
        u.radius = 2.0;
        u.n = 32;
        u.times = times;
        u.values.reserve(times.size() * u.nodes());
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            u.values.insert(u.values.end(), frozen.values.begin(), frozen.values.end());
        }
        const double bad = weak_form_residual(u, b, phi);
        const double good = residual_at(32, 17);
        CHECK(bad >= 10.0 * good);
    }

    SUBCASE("escaping support is an error") {
        std::vector<double> times{0.0, 0.2};
        const GridField u = sample_exact_solution(M_PI_2, u0, 2.0, 8, times, 1);
        CHECK_THROWS_AS(weak_form_residual(u, b, SpaceTimeBump{{0, 0, -1}, 0.5, 0.9}),
                        std::invalid_argument);
    }
}
