#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bubblelab/cli.hpp"
#include "bubblelab/diagnostics.hpp"
#include "bubblelab/errors.hpp"
#include "bubblelab/linearization.hpp"
#include "bubblelab/liouville.hpp"

namespace py = pybind11;
using namespace bubblelab;

namespace {

py::dict fit_dict(const diagnostics::LinearFit& f) {
  py::dict d;
  d["slope"] = f.slope;
  d["intercept"] = f.intercept;
  d["r2"] = f.r2;
  d["r2_ok"] = f.r2_ok;
  d["points"] = f.points;
  d["window"] = py::make_tuple(f.window.lo, f.window.hi);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Blow-up branches of the singular mean field equation on the unit disk";

  static py::exception<Error> base(m, "Error");
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
  py::register_exception<SolverError>(m, "SolverError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<greenfns::WeightSpec>(m, "WeightSpec")
      .def_static("constant", &greenfns::WeightSpec::constant_spec, py::arg("alpha"),
                  py::arg("c") = 1.0)
      .def_static("gaussian", &greenfns::WeightSpec::gaussian_spec, py::arg("alpha"),
                  py::arg("beta"))
      .def_static("polynomial", &greenfns::WeightSpec::polynomial_spec, py::arg("alpha"),
                  py::arg("coefficients"))
      .def_readonly("alpha", &greenfns::WeightSpec::alpha)
      .def_property_readonly("kind", [](const greenfns::WeightSpec& s) { return greenfns::to_string(s.kind); })
      .def("hstar", &greenfns::WeightSpec::hstar)
      .def("validate", &greenfns::WeightSpec::validate);

  py::class_<MeshPolicy>(m, "MeshPolicy")
      .def(py::init([](int nodes, int degree, double core_fraction) {
             return MeshPolicy{nodes, degree, core_fraction};
           }),
           py::arg("nodes") = 512, py::arg("degree") = 4, py::arg("core_fraction") = 0.3)
      .def_readwrite("nodes", &MeshPolicy::nodes)
      .def_readwrite("degree", &MeshPolicy::degree)
      .def_readwrite("core_fraction", &MeshPolicy::core_fraction);

  py::class_<SolutionPoint>(m, "SolutionPoint")
      .def_readonly("rho", &SolutionPoint::rho)
      .def_readonly("lam", &SolutionPoint::lambda)
      .def_readonly("gamma", &SolutionPoint::gamma)
      .def_readonly("sigma", &SolutionPoint::sigma)
      .def_readonly("mass_total", &SolutionPoint::mass_total)
      .def_readonly("local_mass", &SolutionPoint::local_mass)
      .def_readonly("res_norm", &SolutionPoint::res_norm)
      .def_readonly("u", &SolutionPoint::u)
      .def_property_readonly("r", [](const SolutionPoint& p) { return p.mesh->r(); })
      .def("u_at", [](const SolutionPoint& p, double r) { return p.u_at(r).value; })
      .def("local_mass_at", &SolutionPoint::local_mass_at);

  py::class_<Branch>(m, "Branch")
      .def_readonly("points", &Branch::points)
      .def_readonly("fold_flags", &Branch::fold_flags)
      .def_readonly("complete", &Branch::complete)
      .def_readonly("failure", &Branch::failure)
      .def("__len__", [](const Branch& b) { return b.points.size(); });

  m.def("bubble_profile", &liouville::bubble_profile, py::arg("alpha"), py::arg("mu"), py::arg("r"));
  m.def("green_disk", &greenfns::green_disk, py::arg("x"), py::arg("y"));
  m.def("ell_coefficient", py::overload_cast<const greenfns::WeightSpec&>(&greenfns::ell_coefficient),
        py::arg("spec"));

  m.def(
      "exact_disk_family",
      [](const greenfns::WeightSpec& spec, double m_, const MeshPolicy& policy) {
        return exact_disk_family(spec, m_, mesh_for_exact_family(spec.alpha, m_, policy));
      },
      py::arg("spec"), py::arg("m"), py::arg("policy") = MeshPolicy{});
  m.def(
      "solve_fixed_rho",
      [](const SolutionPoint& start, double rho) {
        return newton_solve(Constraint::rho(rho), start.u, start.spec, start.mesh, {}, start.rho);
      },
      py::arg("start"), py::arg("rho"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "solve_at_lambda",
      [](double lambda, const greenfns::WeightSpec& spec, const MeshPolicy& policy) {
        return solve_at_lambda(lambda, spec, policy);
      },
      py::arg("lam"), py::arg("spec"), py::arg("policy") = MeshPolicy{},
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "continue_branch",
      [](double start, double end, int steps, const greenfns::WeightSpec& spec,
         const MeshPolicy& policy) { return continue_branch(start, end, steps, spec, policy); },
      py::arg("start"), py::arg("end"), py::arg("steps"), py::arg("spec"),
      py::arg("policy") = MeshPolicy{}, py::call_guard<py::gil_scoped_release>());

  m.def(
      "mode_eigenvalues",
      [](const SolutionPoint& p, int k, int count) {
        return mode_spectrum(build_mode_operator(p, k), count).eigenvalues;
      },
      py::arg("point"), py::arg("k"), py::arg("count") = 8);
  m.def(
      "nondegeneracy_minima",
      [](const Branch& b, int k_max) {
        std::vector<double> out;
        for (const auto& row : nondegeneracy_scan(b, k_max)) out.push_back(row.min_magnitude);
        return out;
      },
      py::arg("branch"), py::arg("k_max") = 8);

  m.def(
      "rate_law_fit",
      [](const Branch& b, double lo, double hi) { return fit_dict(diagnostics::rate_law_fit(b, {lo, hi})); },
      py::arg("branch"), py::arg("lo") = 8.0, py::arg("hi") = 14.0);
  m.def("matching_residual", &diagnostics::matching_residual, py::arg("point"));
  m.def("outer_profile_residual", &diagnostics::outer_profile_residual, py::arg("point"),
        py::arg("r0") = 0.5);
  m.def(
      "pohozaev_residual_linearized",
      [](const SolutionPoint& p, double r) {
        return diagnostics::pohozaev_residual_linearized(p, local_kernel_field(p), r);
      },
      py::arg("point"), py::arg("r") = 0.25);

  m.def(
      "config_hash",
      [](const std::string& text) { return cli::config_hash(cli::parse_config(nlohmann::json::parse(text))); },
      py::arg("config_json"));
  m.def(
      "verify_report",
      [](const std::string& text) {
        const auto config = cli::parse_config(nlohmann::json::parse(text));
        py::gil_scoped_release release;
        return cli::verify_report(config, cli::run_branch(config)).dump(2);
      },
      py::arg("config_json"));
}
