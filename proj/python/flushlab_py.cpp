#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flushlab/baseflow.hpp"
#include "flushlab/errors.hpp"
#include "flushlab/experiment.hpp"
#include "flushlab/heat.hpp"
#include "flushlab/io.hpp"
#include "flushlab/norms.hpp"
#include "flushlab/ns.hpp"
#include "flushlab/operators.hpp"
#include "flushlab/transport.hpp"

namespace py = pybind11;
using namespace flushlab;
using field::Field2D;
using field::Grid;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (ncomp, ny + 1, nx)
Array to_array(const Field2D& u) {
  const Grid& g = u.grid();
  Array a({u.ncomp(), g.ny + 1, g.nx});
  auto m = a.mutable_unchecked<3>();
  for (int c = 0; c < u.ncomp(); ++c)
    for (int j = 0; j <= g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) m(c, j, i) = u.at(c, j, i);
  return a;
}

Field2D from_array(const Grid& g, Array a, double t) {
  if (a.ndim() == 2) a = a.reshape({py::ssize_t(1), a.shape(0), a.shape(1)});
  if (a.ndim() != 3 || a.shape(1) != g.ny + 1 || a.shape(2) != g.nx || a.shape(0) < 1 || a.shape(0) > 2)
    throw ShapeError("array must have shape (ncomp, ny + 1, nx) with ncomp 1 or 2");
  Field2D u(g, static_cast<int>(a.shape(0)), t);
  auto m = a.unchecked<3>();
  for (int c = 0; c < u.ncomp(); ++c)
    for (int j = 0; j <= g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) u.at(c, j, i) = m(c, j, i);
  return u;
}

template <class T>
std::vector<T> column(const std::vector<ns::Diagnostic>& d, T ns::Diagnostic::*f) {
  std::vector<T> v;
  v.reserve(d.size());
  for (const auto& x : d) v.push_back(x.*f);
  return v;
}

py::dict run_dict(const ns::RunResult& r) {
  py::dict d;
  d["final_norm"] = r.final_norm;
  d["final_ratio"] = r.final_ratio;
  d["pass"] = r.pass;
  d["phantom_l1_hk"] = r.phantom_l1_hk;
  d["residual_max"] = r.residual_max;
  d["r_sup"] = r.r_sup;
  d["steps"] = r.steps;
  d["total_loss"] = r.total_loss;
  d["warnings"] = r.warnings;
  py::dict diag;
  diag["t"] = column(r.diag, &ns::Diagnostic::t);
  diag["omega_norm"] = column(r.diag, &ns::Diagnostic::omega_norm);
  diag["r_norm"] = column(r.diag, &ns::Diagnostic::r_norm);
  diag["rho"] = column(r.diag, &ns::Diagnostic::rho);
  diag["ell"] = column(r.diag, &ns::Diagnostic::ell);
  diag["b"] = column(r.diag, &ns::Diagnostic::b);
  d["diagnostics"] = diag;
  if (r.radius) {
    py::dict rad;
    rad["t"] = r.radius->t;
    rad["rho"] = r.radius->rho;
    rad["valid"] = r.radius->valid;
    rad["invalid_at"] = r.radius->invalid_at;
    rad["N"] = r.radius->N;
    d["radius"] = rad;
  }
  d["manifest"] = ns::manifest_json(r);
  return d;
}

ns::RunOptions run_options(int nx, int ny, int m, bool flush, bool regularize, bool enforce_budget, bool co_integrate,
                           double rho0, double output_dt, int ledger_samples) {
  ns::RunOptions o;
  o.nx = nx;
  o.ny = ny;
  o.m = m;
  o.flush = flush;
  o.regularize = regularize;
  o.enforce_budget = enforce_budget;
  o.co_integrate = co_integrate;
  o.rho0 = rho0;
  o.output_dt = output_dt;
  o.ledger_samples = ledger_samples;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Boundary-layer flushing toolkit: fields, base flows, heat layers, transport and the scaled solver.";
  m.attr("__version__") = FLUSHLAB_VERSION;

  static py::exception<Error> error(m, "Error");
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<NumericError> numeric_error(m, "NumericError", error.ptr());
  static py::exception<BudgetExceededError> budget_error(m, "BudgetExceededError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric_error, e.what());
    } catch (const BudgetExceededError& e) {
      py::set_error(budget_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  // field-core
  py::class_<Grid>(m, "Grid")
      .def_readonly("nx", &Grid::nx)
      .def_readonly("ny", &Grid::ny)
      .def_readonly("x_min", &Grid::x_min)
      .def_readonly("x_max", &Grid::x_max)
      .def_readonly("L", &Grid::L)
      .def_property_readonly("dx", &Grid::dx)
      .def_property_readonly("dy", &Grid::dy)
      .def_property_readonly("x", [](const Grid& g) {
        std::vector<double> v(g.nx);
        for (int i = 0; i < g.nx; ++i) v[i] = g.x(i);
        return v;
      })
      .def_property_readonly("y", [](const Grid& g) {
        std::vector<double> v(g.ny + 1);
        for (int j = 0; j <= g.ny; ++j) v[j] = g.y(j);
        return v;
      })
      .def("__repr__", [](const Grid& g) {
        return "Grid(nx=" + std::to_string(g.nx) + ", ny=" + std::to_string(g.ny) + ", x=[" + io::format_number(g.x_min) +
               ", " + io::format_number(g.x_max) + "), L=" + io::format_number(g.L) + ")";
      });
  m.def("make_grid", &field::make_grid, py::arg("nx"), py::arg("ny"), py::arg("x_min") = -4.0, py::arg("x_max") = 6.0,
        py::arg("L") = 1.0);

  py::class_<Field2D>(m, "Field2D")
      .def(py::init([](const Grid& g, Array a, double t) { return from_array(g, a, t); }), py::arg("grid"), py::arg("values"),
           py::arg("time") = 0.0)
      .def_property_readonly("grid", &Field2D::grid)
      .def_property_readonly("ncomp", &Field2D::ncomp)
      .def_property_readonly("time", &Field2D::time)
      .def("to_numpy", &to_array)
      .def("max_abs", &Field2D::max_abs)
      .def("__add__", [](const Field2D& a, const Field2D& b) { return a + b; })
      .def("__sub__", [](const Field2D& a, const Field2D& b) { return a - b; })
      .def("__rmul__", [](const Field2D& a, double s) { return s * a; })
      .def("__mul__", [](const Field2D& a, double s) { return s * a; });

  m.def("l2", [](const Field2D& u, std::optional<std::pair<double, double>> w) { return field::l2(u, w); }, py::arg("u"),
        py::arg("window") = py::none(), "L2 norm, optionally restricted to an x window.");
  m.def("perp_grad", py::overload_cast<const Field2D&>(&field::perp_grad));
  m.def("curl", &field::curl2d);
  m.def("stream_function_of", &field::stream_function_of);
  m.def("divergence_max", &field::divergence_max, py::arg("u"), py::arg("interior_only") = true);
  m.def("extend_initial_data", [](const Field2D& u, double tail_bound) {
    auto e = field::extend_initial_data(u, tail_bound);
    return py::make_tuple(e.u, e.psi, e.tail, e.ratio);
  }, py::arg("u_star"), py::arg("tail_bound") = 1e-6, "Returns (u, psi, tail, tail_ratio).");
  m.def("write_field", &io::write_field);
  m.def("read_field", &io::read_field);

  // baseflow-design
  py::class_<baseflow::BaseFlow>(m, "BaseFlow")
      .def_property_readonly("T", &baseflow::BaseFlow::T)
      .def_property_readonly("L", &baseflow::BaseFlow::L)
      .def_property_readonly("m", &baseflow::BaseFlow::m)
      .def("__call__", [](const baseflow::BaseFlow& h, double t) { return h(t); })
      .def("derivative", [](const baseflow::BaseFlow& h, double t) { return static_cast<double>(h.derivative(t)); })
      .def("displacement", [](const baseflow::BaseFlow& h, double t) { return static_cast<double>(h.displacement(t)); })
      .def("moment", [](const baseflow::BaseFlow& h, int n, double s0) { return static_cast<double>(h.moment(n, s0)); })
      .def("t_moment", [](const baseflow::BaseFlow& h, int k) { return static_cast<double>(baseflow::t_moment(h, k)); })
      .def("residual", [](const baseflow::BaseFlow& h) {
        auto r = h.residual();
        py::dict d;
        d["left_integral"] = r.left_integral;
        d["right_integral"] = r.right_integral;
        d["max_moment"] = r.max_moment;
        return d;
      });
  m.def("design_base_flow", [](double T, double L, int mm) { return baseflow::design_base_flow(T, L, mm); }, py::arg("T") = 3.0,
        py::arg("L") = 1.0, py::arg("m") = 1);

  // blayer-heat
  py::class_<heat::HalfLineProfile>(m, "HalfLineProfile")
      .def("value", [](const heat::HalfLineProfile& V, double t, double z) { return static_cast<double>(V.value(t, z)); })
      .def("dz", [](const heat::HalfLineProfile& V, double t, double z) { return static_cast<double>(V.dz(t, z)); });
  m.def("solve_boundary_layer", [](const baseflow::BaseFlow& h, bool tabulate) {
    heat::ProfileGrid g;
    g.tabulate = tabulate;
    return heat::solve_boundary_layer(h, g);
  }, py::arg("h"), py::arg("tabulate") = false, py::call_guard<py::gil_scoped_release>());
  m.def("l2_norm", &heat::l2_norm);
  m.def("z_moment", &heat::z_moment);
  m.def("rescaled_trace_norm", &heat::rescaled_trace_norm);
  m.def("decay_series", &heat::decay_series, py::arg("V"), py::arg("t1"), py::arg("t2"), py::arg("n") = 31);
  m.def("fit_decay_exponent", &heat::fit_decay_exponent);
  m.def("total_radius_loss", [](const heat::HalfLineProfile& V) {
    auto r = heat::total_radius_loss(V);
    py::dict d;
    d["value"] = r.value;
    d["solved"] = r.solved;
    d["tail"] = r.tail;
    d["tail_fraction"] = r.tail_fraction;
    d["exponent"] = r.exponent;
    d["divergent"] = r.divergent;
    d["warning"] = r.warning;
    return d;
  }, py::call_guard<py::gil_scoped_release>());

  // transport-control
  py::class_<transport::TransportProfile>(m, "TransportProfile")
      .def(py::init([](const Field2D& u_star, const baseflow::BaseFlow& h) {
        return transport::make_profile(u_star, h, baseflow::design_cutoff(h.T()));
      }), py::arg("u_star"), py::arg("h"))
      .def("velocity", &transport::TransportProfile::velocity)
      .def("force", &transport::TransportProfile::total_force)
      .def("displacement", &transport::TransportProfile::displacement);

  // ns-solver
  py::class_<ns::ScalingConfig>(m, "ScalingConfig")
      .def(py::init([](double eps, double T, double L, double eta, int k, double delta, double theta) {
        ns::ScalingConfig c{eps, T, L, eta, k, delta, theta};
        c.validate();
        return c;
      }), py::arg("eps") = 0.1, py::arg("T") = 3.0, py::arg("L") = 1.0, py::arg("eta") = 1e-3, py::arg("k") = 2,
           py::arg("delta") = 0.1, py::arg("theta") = 1.0)
      .def_readonly("eps", &ns::ScalingConfig::eps)
      .def_readonly("T", &ns::ScalingConfig::T)
      .def_readonly("L", &ns::ScalingConfig::L)
      .def_readonly("eta", &ns::ScalingConfig::eta)
      .def_readonly("k", &ns::ScalingConfig::k)
      .def_readonly("delta", &ns::ScalingConfig::delta)
      .def_readonly("theta", &ns::ScalingConfig::theta);

  m.def("bundled_datum", [](const Grid& g, double sigma, double amplitude) { return ns::bundled_datum(g, sigma, amplitude).u; },
        py::arg("grid"), py::arg("sigma") = 0.07, py::arg("amplitude") = 0.05);
  m.def("step_ns", &ns::step_ns, py::arg("state"), py::arg("dt"), py::arg("eps"), py::arg("force"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_scaled",
        [](const ns::ScalingConfig& c, const Field2D& u_star, int nx, int ny, int mm, bool flush, bool regularize,
           bool enforce_budget, bool co_integrate, double rho0, double output_dt, int ledger_samples) {
          const auto o = run_options(nx, ny, mm, flush, regularize, enforce_budget, co_integrate, rho0, output_dt, ledger_samples);
          ns::RunResult r;
          {
            py::gil_scoped_release release;
            r = ns::run_scaled(c, u_star, o);
          }
          return run_dict(r);
        },
        py::arg("config"), py::arg("u_star"), py::arg("nx") = 320, py::arg("ny") = 128, py::arg("m") = 1,
        py::arg("flush") = true, py::arg("regularize") = false, py::arg("enforce_budget") = true,
        py::arg("co_integrate") = false, py::arg("rho0") = 0.0, py::arg("output_dt") = 0.05,
        py::arg("ledger_samples") = 301);
  m.def("manufactured_convergence", [](double eps) {
    auto r = ns::manufactured_convergence(eps);
    return py::make_tuple(r.space_order, r.time_order);
  }, py::arg("eps") = 0.1, "Returns (space_order, time_order).");

  // experiment-cli
  m.def("scenario_json", [](const std::string& kind, const std::string& text) {
    return experiment::scenario_json(experiment::parse_config_text(text, experiment::kind_from_name(kind)));
  }, py::arg("kind"), py::arg("config_text") = "", "Parse a YAML config and return the resolved settings as JSON.");
  m.def("run_scenario", [](const std::string& kind, const std::string& text, const std::string& out) {
    auto s = experiment::parse_config_text(text, experiment::kind_from_name(kind));
    s.out_dir = out;
    std::vector<experiment::Criterion> cs;
    {
      py::gil_scoped_release release;
      cs = experiment::run_scenario(s);
    }
    py::list res;
    for (const auto& c : cs) {
      py::dict d;
      d["id"] = c.id;
      d["title"] = c.title;
      d["pass"] = c.pass;
      py::dict v;
      for (const auto& x : c.values) v[py::str(x.name)] = x.value;
      d["values"] = v;
      res.append(d);
    }
    return res;
  }, py::arg("kind"), py::arg("config_text"), py::arg("out"));
}
