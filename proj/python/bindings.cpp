#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "recipkit/dynamics.hpp"
#include "recipkit/error.hpp"
#include "recipkit/geometry.hpp"
#include "recipkit/io.hpp"
#include "recipkit/legendre.hpp"
#include "recipkit/linear_analysis.hpp"
#include "recipkit/models.hpp"
#include "recipkit/nonlinear_reciprocity.hpp"

namespace py = pybind11;
using namespace recipkit;

namespace {

const models::ModelEntry& model(const std::string& name) {
  static const auto reg = models::builtin_registry();
  return models::find_model(reg, name);
}

SignatureMatrix signature(const std::vector<int>& d) { return SignatureMatrix(d); }

py::dict trajectory_dict(const dynamics::Trajectory& t) {
  const auto stack = [](const std::vector<Vector>& v) {
    Matrix M(static_cast<Eigen::Index>(v.size()), v.empty() ? 0 : v.front().size());
    for (size_t k = 0; k < v.size(); ++k) M.row(static_cast<Eigen::Index>(k)) = v[k].transpose();
    return M;
  };
  py::dict d;
  d["t"] = Eigen::Map<const Vector>(t.times.data(), static_cast<Eigen::Index>(t.times.size())).eval();
  d["x"] = stack(t.states);
  d["u"] = stack(t.inputs);
  d["y"] = stack(t.outputs);
  for (const auto& [k, v] : t.monitors) {
    d[py::str(k)] = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  }
  return d;
}

/// Constant input u on [0, horizon] from the model's default (or given) initial state.
py::dict simulate(const std::string& name, double horizon, double step, const std::optional<Vector>& u,
                  const std::optional<Vector>& x0) {
  const auto& e = model(name);
  dynamics::SimOptions o;
  o.step = step;
  const Vector x = x0.value_or(e.x0);
  const auto input = [&](int m) { return dynamics::constant_input(u.value_or(Vector::Zero(m))); };
  dynamics::Trajectory t;
  switch (e.kind) {
    case models::ModelKind::kLinear:
      t = dynamics::simulate_linear(*e.linear, x, input(e.linear->m()), 0, horizon, o);
      break;
    case models::ModelKind::kHessian: {
      const auto hs = e.hessian();
      t = dynamics::simulate_pseudo_gradient(hs, x, input(hs.nu), 0, horizon, o);
      break;
    }
    case models::ModelKind::kPortHamiltonian: {
      const auto ph = e.port_hamiltonian();
      t = dynamics::simulate_port_hamiltonian(ph, x, input(ph.m), 0, horizon, o);
      break;
    }
    case models::ModelKind::kAffine: {
      const auto a = e.affine();
      t = dynamics::simulate_affine(a, x, input(a.nu), 0, horizon, o);
      break;
    }
  }
  if (e.storage) dynamics::attach_storage(t, e.storage());
  return trajectory_dict(t);
}

}  // namespace

PYBIND11_MODULE(_recipkit, m) {
  m.doc() = "Reciprocity, passivity and relaxation analysis of input-output systems";

  py::register_exception<Error>(m, "RecipkitError", PyExc_RuntimeError);

  py::class_<linear::LinearSystem>(m, "LinearSystem")
      .def(py::init([](Matrix A, Matrix B, Matrix C, std::optional<Matrix> D) {
             linear::LinearSystem s(A, B, C, D.value_or(Matrix::Zero(C.rows(), B.cols())));
             s.validate();
             return s;
           }),
           py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D") = py::none())
      .def_readonly("A", &linear::LinearSystem::A)
      .def_readonly("B", &linear::LinearSystem::B)
      .def_readonly("C", &linear::LinearSystem::C)
      .def_readonly("D", &linear::LinearSystem::D)
      .def_property_readonly("n", &linear::LinearSystem::n)
      .def_property_readonly("m", &linear::LinearSystem::m);

  m.def(
      "check_linear_reciprocity",
      [](const linear::LinearSystem& s, const Matrix& G, const std::vector<int>& sigma, double tol) {
        const auto r = linear::check_linear_reciprocity(s, G, signature(sigma), tol);
        return py::dict(py::arg("reciprocal") = r.reciprocal, py::arg("residual") = r.residual);
      },
      py::arg("system"), py::arg("G"), py::arg("sigma"), py::arg("tol") = 1e-10);

  m.def(
      "solve_dual_isomorphism",
      [](const linear::LinearSystem& s, const std::vector<int>& sigma) {
        return linear::solve_dual_isomorphism(s, signature(sigma));
      },
      py::arg("system"), py::arg("sigma"));

  m.def("impulse_response", &linear::impulse_response, py::arg("system"), py::arg("t"));

  m.def(
      "lmi_residual",
      [](const linear::LinearSystem& s, const Matrix& Q, double tol) {
        const auto r = linear::lmi_residual(s, Q, tol);
        return py::dict(py::arg("Pi") = r.Pi, py::arg("min_eigenvalue") = r.min_eigenvalue,
                        py::arg("passive") = r.passive);
      },
      py::arg("system"), py::arg("Q"), py::arg("tol") = 1e-9);

  m.def(
      "compatible_storage",
      [](const linear::LinearSystem& s, const Matrix& G, const std::vector<int>& sigma, const Matrix& Q0) {
        const auto r = linear::compatible_storage_fixed_point(s, G, signature(sigma), Q0);
        return py::dict(py::arg("Q") = r.Q, py::arg("iterations") = r.iterations,
                        py::arg("compatibility_residual") = r.compatibility_residual,
                        py::arg("lmi_min_eigenvalue") = r.lmi_min_eigenvalue);
      },
      py::arg("system"), py::arg("G"), py::arg("sigma"), py::arg("Q0"));

  m.def("list_models", [] {
    py::list out;
    for (const auto& e : models::builtin_registry()) {
      out.append(py::dict(py::arg("name") = e.name, py::arg("kind") = models::kind_name(e.kind),
                          py::arg("description") = e.description, py::arg("reference") = e.reference));
    }
    return out;
  });

  m.def(
      "model_linear_system",
      [](const std::string& name) -> std::optional<linear::LinearSystem> { return model(name).linear; },
      py::arg("name"));

  m.def(
      "model_metric",
      [](const std::string& name, const std::optional<Vector>& x) -> Matrix {
        const auto& e = model(name);
        if (e.hessian) return e.hessian().metric()(x.value_or(e.x0));
        require(e.G.size() > 0, ErrorCode::kInvalidArgument, "model has no metric");
        return e.G;
      },
      py::arg("name"), py::arg("x") = py::none());

  m.def(
      "check_model_reciprocity",
      [](const std::string& name, int samples) {
        const auto& e = model(name);
        require(static_cast<bool>(e.hessian), ErrorCode::kInvalidArgument,
                "model has no Hessian pseudo-gradient form");
        const auto hs = e.hessian();
        const auto nl = hs.to_nonlinear();
        const auto r = nonlinear::check_reciprocity_hessian(nl, hs.K, hs.sigma,
                                                            nonlinear::default_samples(nl, samples));
        return py::dict(py::arg("reciprocal") = r.reciprocal, py::arg("residual_state") = r.residual_state,
                        py::arg("residual_output") = r.residual_output,
                        py::arg("residual_cross") = r.residual_cross);
      },
      py::arg("name"), py::arg("samples") = 200);

  m.def(
      "christoffel",
      [](const std::string& name, const Vector& x) {
        const auto& e = model(name);
        require(static_cast<bool>(e.hessian), ErrorCode::kInvalidArgument,
                "model has no Hessian pseudo-gradient form");
        return geometry::hessian_christoffel(e.hessian().K, x);
      },
      py::arg("name"), py::arg("x"));

  m.def(
      "legendre_conjugate",
      [](const std::string& name, const Vector& z) {
        const auto& e = model(name);
        require(static_cast<bool>(e.hessian), ErrorCode::kInvalidArgument,
                "model has no Hessian pseudo-gradient form");
        legendre::PairOptions po;
        po.verify = false;
        const legendre::LegendrePair pair(e.hessian().K, po);
        const auto r = pair.solve(z);
        return py::make_tuple(r.value, r.x);
      },
      py::arg("name"), py::arg("z"));

  m.def("simulate", &simulate, py::arg("name"), py::arg("horizon"), py::arg("step") = 1e-3,
        py::arg("u") = py::none(), py::arg("x0") = py::none());

  m.def(
      "format_number", [](double v) { return io::format_number(v); }, py::arg("value"));
}
