// Python bindings for the main operations: fields, closed-form flows,
// breakpoints, the ODE engine, and point transport solves.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>

#include "roughflow/exact_flows.hpp"
#include "roughflow/fields.hpp"
#include "roughflow/geometry.hpp"
#include "roughflow/ode_engine.hpp"
#include "roughflow/transport.hpp"

namespace py = pybind11;
using namespace roughflow;

namespace {

using Triple = std::array<double, 3>;

Point3 to_point(const Triple& a) { return {a[0], a[1], a[2]}; }
Triple from_vec(const Vec3& v) { return {v.x, v.y, v.z}; }

IntegratorConfig make_config(double rtol, double atol, double event_tol, long max_steps) {
    IntegratorConfig cfg;
    cfg.rtol = rtol;
    cfg.atol = atol;
    cfg.event_tol = event_tol;
    cfg.max_steps = max_steps;
    cfg.record_steps = true;
    return cfg;
}

py::dict record_to_dict(const TrajectoryRecord& rec) {
    py::list times, states, labels, events;
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        times.append(rec.times[i]);
        states.append(from_vec(rec.states[i]));
        labels.append(region_name(rec.labels[i]));
    }
    for (const auto& ev : rec.events) events.append(py::make_tuple(ev.t, ev.interface_id));
    py::dict d;
    d["times"] = times;
    d["states"] = states;
    d["labels"] = labels;
    d["events"] = events;
    d["status"] = status_name(rec.status);
    d["steps"] = rec.n_steps;
    return d;
}

}  // namespace

PYBIND11_MODULE(roughflow, m) {
    m.doc() = "Numerical laboratory for non-unique flows of a rough divergence-free "
              "vector field and its smooth approximations";

    py::class_<ApproxParams>(m, "ApproxParams")
        .def(py::init<double, double>(), py::arg("eps"), py::arg("theta"))
        .def_readonly("eps", &ApproxParams::eps)
        .def_readonly("theta", &ApproxParams::theta)
        .def_readonly("beta", &ApproxParams::beta)
        .def_readonly("alpha", &ApproxParams::alpha)
        .def_readonly("gamma", &ApproxParams::gamma)
        .def_readonly("eta", &ApproxParams::eta)
        .def("cyl_radius2", &ApproxParams::cyl_radius2);

    py::class_<Breakpoints>(m, "Breakpoints")
        .def_readonly("t1", &Breakpoints::t1)
        .def_readonly("t2", &Breakpoints::t2)
        .def_readonly("t3", &Breakpoints::t3)
        .def_readonly("t4", &Breakpoints::t4);

    m.def("classify_limit",
          [](const Triple& p) { return std::string(region_name(classify_limit(to_point(p)))); });
    m.def("classify_eps", [](const ApproxParams& g, const Triple& p) {
        return std::string(region_name(classify_eps(g, to_point(p))));
    });

    m.def("eval_b", [](const Triple& p) { return from_vec(eval_b(to_point(p))); });
    m.def("eval_b_eps", [](const ApproxParams& g, const Triple& p) {
        return from_vec(eval_b_eps(g, to_point(p)));
    });
    m.def("eval_b_dpl2d", [](double x, double y) {
        const Vec2 v = eval_b_dpl2d({x, y});
        return std::make_pair(v.x, v.y);
    });

    m.def("flow_limit", [](double theta, double t, const Triple& p) {
        return from_vec(flow_limit(theta, t, to_point(p)));
    });
    m.def("flow_limit_inverse", [](double theta, double t, const Triple& p) {
        return from_vec(flow_limit_inverse(theta, t, to_point(p)));
    });
    m.def("flow_eps_closed", [](const ApproxParams& g, double t, const Triple& p) {
        return from_vec(flow_eps_closed(g, t, to_point(p)));
    });
    m.def("breakpoints", [](const ApproxParams& g, double z) { return breakpoints(g, z); });
    m.def("zone_transit_time", &zone_transit_time);
    m.def("conserved_ratio", [](const Triple& p) { return conserved_ratio(to_point(p)); });
    m.def("theta0_azimuth", &theta0_azimuth);

    m.def("dpl2d_flows", [](double t, double x, double y) {
        const Dpl2dPair pair = dpl2d_flows(t, {x, y});
        return std::make_pair(std::make_pair(pair.plain.x, pair.plain.y),
                              std::make_pair(pair.mirrored.x, pair.mirrored.y));
    });

    m.def(
        "integrate_eps",
        [](const ApproxParams& g, const Triple& x0, double t_end, bool backward, double rtol,
           double atol, double event_tol, long max_steps) {
            const IntegratorConfig cfg = make_config(rtol, atol, event_tol, max_steps);
            const Field f = Field::approx(g);
            const TrajectoryRecord rec = backward
                                             ? integrate_backward(f, to_point(x0), t_end, cfg)
                                             : integrate(f, to_point(x0), t_end, cfg);
            return record_to_dict(rec);
        },
        py::arg("params"), py::arg("x0"), py::arg("t_end"), py::arg("backward") = false,
        py::arg("rtol") = 1e-10, py::arg("atol") = 1e-12, py::arg("event_tol") = 1e-12,
        py::arg("max_steps") = 5000000);

    m.def(
        "solve_exact",
        [](double theta, double t, const Triple& p) {
            return solve_exact(theta, default_datum(), t, to_point(p));
        },
        py::arg("theta"), py::arg("t"), py::arg("p"),
        "transport solution of the default datum x*exp(-|x|^2) along the exact flow");

    m.def(
        "solve_eps",
        [](const ApproxParams& g, double t, const Triple& p, double rtol, double atol) {
            IntegratorConfig cfg;
            cfg.rtol = rtol;
            cfg.atol = atol;
            return solve_eps(g, default_datum(), t, to_point(p), cfg);
        },
        py::arg("params"), py::arg("t"), py::arg("p"), py::arg("rtol") = 1e-9,
        py::arg("atol") = 1e-11);

    m.attr("__version__") = "0.1.0";
}
