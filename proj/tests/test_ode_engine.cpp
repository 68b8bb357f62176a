#include <doctest.h>

#include <cmath>
#include <cstring>

#include "roughflow/exact_flows.hpp"
#include "roughflow/ode_engine.hpp"

using namespace roughflow;

TEST_CASE("constant field integrates exactly") {
    const Field f = Field::custom([](const Vec3&) { return Vec3{0.4, -0.2, 1.0}; });
    IntegratorConfig cfg;
    const TrajectoryRecord rec = integrate(f, {1, 2, 3}, 1.0, cfg);
    REQUIRE(rec.status == IntegrationStatus::Completed);
    CHECK((rec.final_state() - Point3{1.4, 1.8, 4.0}).norm() <= 1e-12);
}

TEST_CASE("engine matches the closed form through all regions") {
    const ApproxParams g(0.05, M_PI_2);
    const Point3 x0{0.3, 0.0, 1.0};
    IntegratorConfig cfg;
    const TrajectoryRecord rec = integrate(Field::approx(g), x0, 0.5, cfg);
    REQUIRE(rec.status == IntegrationStatus::Completed);
    const Point3 expected = flow_eps_closed(g, 0.5, x0);
    CHECK((rec.final_state() - expected).norm() <= 1e-6);

    // detected events match the breakpoints
    const Breakpoints bp = breakpoints(g, x0.z);
    REQUIRE(rec.events.size() == 4);
    CHECK(std::fabs(rec.events[0].t - bp.t1) <= 1e-9);
    CHECK(std::fabs(rec.events[1].t - bp.t2) <= 1e-9);
    CHECK(std::fabs(rec.events[2].t - bp.t3) <= 1e-9);
    CHECK(std::fabs(rec.events[3].t - bp.t4) <= 1e-9);
    CHECK(rec.events[0].interface_id == int(InterfaceId::PlaneAlpha));
    CHECK(rec.events[3].interface_id == int(InterfaceId::PlaneEtaM));
}

TEST_CASE("forward-backward round trip") {
    const ApproxParams g(0.05, M_PI_2);
    const Point3 x0{0.3, 0.1, 1.0};
    IntegratorConfig cfg;
    const TrajectoryRecord fwd = integrate(Field::approx(g), x0, 0.5, cfg);
    REQUIRE(fwd.status == IntegrationStatus::Completed);
    const TrajectoryRecord back = integrate_backward(Field::approx(g), fwd.final_state(), 0.5, cfg);
    REQUIRE(back.status == IntegrationStatus::Completed);
    CHECK((back.final_state() - x0).norm() <= 1e-6);
}

TEST_CASE("exterior starts never move") {
    const ApproxParams g(0.1, M_PI);
    IntegratorConfig cfg;
    const TrajectoryRecord rec = integrate(Field::approx(g), {2, 2, 0.1}, 1.0, cfg);
    REQUIRE(rec.status == IntegrationStatus::Completed);
    CHECK((rec.final_state() - Point3{2, 2, 0.1}).norm() == 0.0);

    const TrajectoryRecord bk = integrate_backward(Field::approx(g), {2, 2, 0.1}, 1.0, cfg);
    CHECK((bk.final_state() - Point3{2, 2, 0.1}).norm() == 0.0);
}

TEST_CASE("backward flow of b_eps matches the limit inverse before the zone") {
    const ApproxParams g(0.05, M_PI_2);
    const Point3 x0{0.2, -0.1, -0.9};
    REQUIRE(classify_eps(g, x0) == RegionLabel::PMinusEps);
    // the backward trajectory first reaches z = -eta*eps at this time
    const double t_zone = (x0.z * x0.z - std::pow(g.eta * g.eps, 2)) / 4.0;
    IntegratorConfig cfg;
    const double T = 0.8 * t_zone;
    const TrajectoryRecord rec = integrate_backward(Field::approx(g), x0, T, cfg);
    REQUIRE(rec.status == IntegrationStatus::Completed);
    const Point3 expected = flow_limit_inverse(M_PI_2, T, x0);
    CHECK((rec.final_state() - expected).norm() <= 1e-8);
}

TEST_CASE("tolerance decades control the error") {
    const ApproxParams g(0.1, M_PI_2);
    const Point3 x0{0.25, 0.05, 0.8};
    const Point3 truth = flow_eps_closed(g, 0.3, x0);

    auto err_at = [&](double rtol) {
        IntegratorConfig cfg;
        cfg.rtol = rtol;
        cfg.atol = rtol * 1e-2;
        cfg.event_tol = std::min(1e-12, cfg.atol);
        const TrajectoryRecord rec = integrate(Field::approx(g), x0, 0.3, cfg);
        REQUIRE(rec.status == IntegrationStatus::Completed);
        return (rec.final_state() - truth).norm();
    };
    const double e6 = err_at(1e-6);
    const double e7 = err_at(1e-7);
    CHECK(e7 * 4.0 <= e6);  // a tolerance decade buys at least 4x
}

TEST_CASE("fixed-step order is at least four") {
    // rigid rotation with a known solution; forcing the step size through
    // max_step turns the controller into a fixed-step method
    const Field rot = Field::custom([](const Vec3& p) { return Vec3{-p.y, p.x, 0.0}; });
    auto err_at = [&](double h) {
        IntegratorConfig cfg;
        cfg.rtol = 1e30;
        cfg.atol = 1e30;
        cfg.event_tol = 1.0;
        cfg.initial_step = h;
        cfg.max_step = h;
        cfg.record_steps = false;
        const TrajectoryRecord rec = integrate(rot, {1, 0, 0}, 1.0, cfg);
        const Point3 truth{std::cos(1.0), std::sin(1.0), 0.0};
        return (rec.final_state() - truth).norm();
    };
    const double e1 = err_at(0.02);
    const double e2 = err_at(0.01);
    CHECK(e1 / e2 >= 4.0);
}

TEST_CASE("event determinism: repeated runs are bit identical") {
    const ApproxParams g(0.05, M_PI);
    IntegratorConfig cfg;
    const TrajectoryRecord a = integrate(Field::approx(g), {0.2, 0.1, 0.9}, 0.4, cfg);
    const TrajectoryRecord b = integrate(Field::approx(g), {0.2, 0.1, 0.9}, 0.4, cfg);
    // record invariants: strictly increasing times, labels constant between events
    for (std::size_t i = 0; i + 1 < a.times.size(); ++i) {
        CHECK(a.times[i + 1] > a.times[i]);
        bool crosses_event = false;
        for (const auto& ev : a.events) {
            if (ev.t > a.times[i] && ev.t <= a.times[i + 1]) crosses_event = true;
        }
        if (!crosses_event) CHECK(a.labels[i + 1] == a.labels[i]);
    }
    REQUIRE(a.times.size() == b.times.size());
    CHECK(std::memcmp(a.times.data(), b.times.data(), a.times.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.states.data(), b.states.data(), a.states.size() * sizeof(Point3)) == 0);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) CHECK(a.events[i].t == b.events[i].t);
}

TEST_CASE("step limit is reported") {
    const ApproxParams g(0.05, M_PI);
    IntegratorConfig cfg;
    cfg.max_steps = 10;
    const TrajectoryRecord rec = integrate(Field::approx(g), {0.2, 0.1, 0.9}, 0.4, cfg);
    CHECK(rec.status == IntegrationStatus::StepLimit);
}

TEST_CASE("limit field refuses integration through the origin") {
    IntegratorConfig cfg;
    cfg.limit_z_floor = 1e-3;
    const TrajectoryRecord rec = integrate(Field::limit(), {0.1, 0.0, 0.5}, 1.0, cfg);
    CHECK(rec.status == IntegrationStatus::LeftDomain);
    CHECK(rec.final_state().z == doctest::Approx(1e-3).epsilon(1e-6));
    REQUIRE(!rec.events.empty());
    CHECK(rec.events.back().interface_id == kOriginFloorEvent);

    // away from the origin the limit field integrates fine (P- falls freely)
    const TrajectoryRecord ok = integrate(Field::limit(), {0.1, 0.0, -0.5}, 1.0, cfg);
    CHECK(ok.status == IntegrationStatus::Completed);
    const Point3 expected = flow_limit(1.0, 1.0, {0.1, 0.0, -0.5});
    CHECK((ok.final_state() - expected).norm() <= 1e-8);
}

TEST_CASE("starts on an interface are nudged deterministically") {
    const ApproxParams g(0.1, M_PI);
    IntegratorConfig cfg;
    const Point3 on_plane{0.05, 0.0, g.alpha * g.eps};
    const TrajectoryRecord rec = integrate(Field::approx(g), on_plane, 0.01, cfg);
    CHECK(rec.nudged_start);
    CHECK(rec.status == IntegrationStatus::Completed);
}

TEST_CASE("jacobian tracking") {
    IntegratorConfig cfg;

    SUBCASE("constant field keeps the identity") {
        const Field f = Field::custom([](const Vec3&) { return Vec3{1.0, 0.0, 0.0}; });
        const TrajectoryRecord rec = integrate(f, {0, 0, 0}, 1.0, cfg);
        const JacobianTrack track = track_jacobian(f, rec, 1e-6, cfg);
        CHECK(track.max_drift() <= 1e-12);
    }

    SUBCASE("fast rigid rotation preserves volume") {
        const Field rot = Field::custom([](const Vec3& p) { return Vec3{-100.0 * p.y, 100.0 * p.x, 0.0}; });
        const TrajectoryRecord rec = integrate(rot, {0.3, 0.0, 0.0}, 0.5, cfg);
        IntegratorConfig tight = cfg;
        tight.rtol = 1e-12;
        tight.atol = 1e-14;
        tight.event_tol = 1e-14;
        const JacobianTrack track = track_jacobian(rot, rec, 1e-7, tight);
        CHECK(track.max_drift() <= 1e-10);
    }

    SUBCASE("b_eps trajectories preserve volume per segment") {
        const ApproxParams g(0.1, M_PI_2);
        const Point3 x0{0.2, 0.1, 0.7};
        const double T = x0.z * x0.z / 4.0 + 2.0 * zone_transit_time(g) + 0.02;
        const TrajectoryRecord rec = integrate(Field::approx(g), x0, T, cfg);
        REQUIRE(rec.status == IntegrationStatus::Completed);
        REQUIRE(rec.events.size() == 4);  // all five regions visited
        const JacobianTrack track = track_jacobian(Field::approx(g), rec, 1e-6, cfg);
        CHECK(track.segments.size() == 5);
        CHECK(track.max_drift() <= 1e-4);
        for (const auto& seg : track.segments) {
            for (double det : seg.dets) CHECK(det > 0.0);
        }
    }
}
