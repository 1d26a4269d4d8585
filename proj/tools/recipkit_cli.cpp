// recipkit: reciprocity, passivity and relaxation checks from the command line.
//
// Exit status: 0 success, 1 a check failed, 2 input error, 3 numerical failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recipkit/dynamics.hpp"
#include "recipkit/error.hpp"
#include "recipkit/geometry.hpp"
#include "recipkit/io.hpp"
#include "recipkit/legendre.hpp"
#include "recipkit/linear_analysis.hpp"
#include "recipkit/models.hpp"
#include "recipkit/nonlinear_reciprocity.hpp"

namespace fs = std::filesystem;
using namespace recipkit;
using io::Json;
using models::ModelEntry;
using models::ModelKind;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kInputError = 2, kNumericalFailure = 3 };

struct Options {
  std::string command;
  std::string model;
  std::string input;
  std::string out;
  std::string q0 = "identity";
  std::vector<std::string> tol_specs;
  std::uint64_t seed = 0;
  std::optional<double> horizon;
  std::optional<double> step;
  double amplitude = 0.2;
  int samples = 200;
};

/// Output of one command: the report plus any CSV files, and whether its check passed.
struct Outcome {
  Json report = Json::object();
  std::map<std::string, std::string> files;
  bool passed = true;
};

class Tolerances {
 public:
  Tolerances(const std::vector<std::string>& specs, std::map<std::string, double> defaults)
      : values_(std::move(defaults)) {
    for (const auto& s : specs) {
      const auto eq = s.find('=');
      require(eq != std::string::npos && eq > 0, ErrorCode::kInvalidArgument,
              "--tol expects KEY=VALUE, got '" + s + "'");
      const std::string key = s.substr(0, eq);
      require(values_.count(key) > 0, ErrorCode::kInvalidArgument,
              "unknown tolerance '" + key + "' for this command; known: " + known());
      double v = 0.0;
      try {
        size_t used = 0;
        v = std::stod(s.substr(eq + 1), &used);
        require(used == s.size() - eq - 1, ErrorCode::kInvalidArgument, "trailing characters");
      } catch (const std::logic_error&) {
        fail(ErrorCode::kInvalidArgument, "tolerance '" + key + "' is not a number");
      }
      require(std::isfinite(v) && v > 0.0, ErrorCode::kInvalidArgument,
              "tolerance '" + key + "' must be positive");
      values_[key] = v;
    }
  }

  double operator[](const std::string& key) const { return values_.at(key); }

  Json to_json() const {
    Json j = Json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

 private:
  std::string known() const {
    std::string s;
    for (const auto& [k, v] : values_) s += (s.empty() ? "" : ", ") + k;
    return s;
  }
  std::map<std::string, double> values_;
};

// Model resolution ------------------------------------------------------------------

std::vector<ModelEntry> registry() {
  const char* path = std::getenv("RECIPKIT_MODEL_PATH");
  if (path != nullptr && *path != '\0') return io::registry_with_user_models(path);
  return models::builtin_registry();
}

ModelEntry resolve_model(const Options& o) {
  if (!o.input.empty()) {
    const auto entries = io::load_model_file(o.input, models::builtin_registry());
    if (entries.size() == 1 && o.model.empty()) return entries.front();
    require(!o.model.empty(), ErrorCode::kInvalidArgument,
            o.input + " holds " + std::to_string(entries.size()) + " models; select one with --model");
    return models::find_model(entries, o.model);
  }
  require(!o.model.empty(), ErrorCode::kInvalidArgument, "give --model NAME or --input FILE");
  return models::find_model(registry(), o.model);
}

dynamics::PhConversion conversion(const ModelEntry& e, double tol = 1e-8) {
  require(e.port_hamiltonian && e.split, ErrorCode::kInvalidArgument,
          "model '" + e.name + "' has no port-Hamiltonian form with a split");
  return dynamics::ph_to_hessian_pseudo_gradient(e.port_hamiltonian(), e.split(), tol);
}

/// The Hessian pseudo-gradient form and the initial state in its coordinates.
std::pair<dynamics::HessianPseudoGradientSystem, Vector> hessian_form(const ModelEntry& e) {
  if (e.hessian) return {e.hessian(), e.x0};
  if (e.kind == ModelKind::kPortHamiltonian) {
    const auto conv = conversion(e);
    return {conv.system, conv.to_coenergy(e.x0)};
  }
  fail(ErrorCode::kInvalidArgument, "model '" + e.name + "' (" + models::kind_name(e.kind) +
                                        ") has no Hessian pseudo-gradient form");
}

const linear::LinearSystem& linear_of(const ModelEntry& e) {
  require(e.linear.has_value(), ErrorCode::kInvalidArgument,
          "model '" + e.name + "' is " + models::kind_name(e.kind) + "; this command needs a linear system");
  return *e.linear;
}

/// Feedthrough is left out: it is not part of the variational comparison.
AffineSystem affine_of_linear(const linear::LinearSystem& s) {
  AffineSystem a;
  a.nx = s.n();
  a.nu = s.m();
  a.f = [A = s.A](const Vector& x) -> Vector { return A * x; };
  a.g = [B = s.B](const Vector&) { return B; };
  a.h = [C = s.C](const Vector& x) -> Vector { return C * x; };
  a.df_dx = [A = s.A](const Vector&) { return A; };
  a.dh_dx = [C = s.C](const Vector&) { return C; };
  a.domain = BoxDomain::cube(s.n(), -1e6, 1e6);
  a.input_domain = BoxDomain::cube(s.m(), -1e6, 1e6);
  return a;
}

Matrix require_metric(const ModelEntry& e) {
  require(e.G.size() > 0, ErrorCode::kInvalidArgument, "model '" + e.name + "' has no metric G");
  return e.G;
}

/// u_j(t) = a sin((j + 1) t), with a capped at half the input box.
dynamics::InputSignal excitation(int m, double amplitude, const BoxDomain& input_box = {}) {
  double a = amplitude;
  if (input_box.dim() == m && m > 0) {
    a = std::min(a, 0.25 * input_box.width().minCoeff());
  }
  return [m, a](double t) {
    Vector u(m);
    for (int j = 0; j < m; ++j) u[j] = a * std::sin((j + 1) * t);
    return u;
  };
}

std::vector<Vector> state_samples(const BoxDomain& box, const Options& o) {
  return box.scaled_about(box.center(), 0.9).uniform(o.samples, o.seed);
}

dynamics::SimOptions sim_options(const Options& o, double default_step = 1e-3) {
  dynamics::SimOptions s;
  s.step = o.step.value_or(default_step);
  return s;
}

ScalarField quadratic_storage(const Matrix& Q) {
  const int n = static_cast<int>(Q.rows());
  return ScalarField(
      BoxDomain::cube(n, -1e6, 1e6), [Q](const Vector& x) { return 0.5 * x.dot(Q * x); },
      [Q](const Vector& x) -> Vector { return Q * x; }, [Q](const Vector&) { return Q; });
}

double min_eigenvalue(const Matrix& M) {
  const Matrix S = 0.5 * (M + M.transpose());
  return Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

Json dissipation_json(const dynamics::DissipationResult& d) {
  return {{"max_violation", d.max_violation},
          {"supply_scale", d.supply_scale},
          {"passive_along", d.passive_along}};
}

/// Simulates whichever representation the model carries natively.
dynamics::Trajectory simulate_model(const ModelEntry& e, const Options& o, double horizon) {
  const auto opts = sim_options(o);
  switch (e.kind) {
    case ModelKind::kLinear: {
      const auto& s = linear_of(e);
      return dynamics::simulate_linear(s, e.x0, excitation(s.m(), o.amplitude), 0, horizon, opts);
    }
    case ModelKind::kHessian: {
      const auto hs = e.hessian();
      const auto ub = nonlinear::input_box(hs.to_nonlinear());
      return dynamics::simulate_pseudo_gradient(hs, e.x0, excitation(hs.nu, o.amplitude, ub), 0, horizon,
                                                opts);
    }
    case ModelKind::kPortHamiltonian: {
      const auto ph = e.port_hamiltonian();
      return dynamics::simulate_port_hamiltonian(ph, e.x0, excitation(ph.m, o.amplitude), 0, horizon, opts);
    }
    case ModelKind::kAffine: {
      const auto a = e.affine();
      return dynamics::simulate_affine(a, e.x0, excitation(a.nu, o.amplitude), 0, horizon, opts);
    }
  }
  fail(ErrorCode::kInvalidArgument, "unsupported model kind");
}

// Commands ----------------------------------------------------------------------------

Outcome check_reciprocity(const ModelEntry& e, const Options& o) {
  const bool lin = e.kind == ModelKind::kLinear;
  const Tolerances tol(o.tol_specs, {{"reciprocity", lin ? 1e-10 : 1e-6}});
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  if (lin) {
    const auto& s = linear_of(e);
    Matrix G = e.G;
    std::string source = "model";
    if (G.size() == 0) {
      G = linear::solve_dual_isomorphism(s, e.sigma);
      source = "solved from the controllability data";
    }
    const auto res = linear::check_linear_reciprocity(s, G, e.sigma, tol["reciprocity"]);
    r["metric_source"] = source;
    r["G"] = io::to_json(G);
    r["residual"] = res.residual;
    r["reciprocal"] = res.reciprocal;
    out.passed = res.reciprocal;
    return out;
  }
  nonlinear::ReciprocityReport rep;
  if (e.kind == ModelKind::kAffine) {
    const auto a = e.affine();
    const auto G = MetricField::constant(require_metric(e), a.domain);
    rep = nonlinear::check_reciprocity_affine(a, G, e.sigma, state_samples(a.domain, o), tol["reciprocity"]);
  } else {
    const auto [hs, x0] = hessian_form(e);
    const auto nl = hs.to_nonlinear();
    const auto xs = state_samples(hs.domain(), o);
    const auto us = nonlinear::input_box(nl).uniform(o.samples, o.seed + 1);
    nonlinear::SampleSet samples;
    for (size_t i = 0; i < xs.size(); ++i) samples.push_back({xs[i], us[i]});
    rep = nonlinear::check_reciprocity_hessian(nl, hs.K, hs.sigma, samples, tol["reciprocity"]);
  }
  r["residual_state"] = rep.residual_state;
  r["residual_output"] = rep.residual_output;
  r["residual_cross"] = rep.residual_cross;
  r["residual_input_fields"] = rep.residual_input_fields;
  r["points_tested"] = rep.points_tested;
  r["note"] = rep.note;
  r["reciprocal"] = rep.reciprocal;
  out.passed = rep.reciprocal;
  return out;
}

Outcome check_passivity(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"lmi", 1e-9}, {"dissipation", 1e-6}});
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  if (e.kind == ModelKind::kLinear) {
    const auto& s = linear_of(e);
    Matrix Q = e.Q;
    std::string source = "model";
    if (Q.size() == 0) {
      require(e.G.size() > 0 && min_eigenvalue(e.G) > 0.0, ErrorCode::kInvalidArgument,
              "model '" + e.name + "' has neither a storage matrix Q nor a positive definite G");
      Q = e.G;
      source = "G";
    }
    const auto lmi = linear::lmi_residual(s, Q, tol["lmi"]);
    r["certificate_source"] = source;
    r["Q"] = io::to_json(Q);
    r["Pi"] = io::to_json(lmi.Pi);
    r["min_eigenvalue"] = lmi.min_eigenvalue;
    r["q_min_eigenvalue"] = lmi.q_min_eigenvalue;
    r["kernel_dimension"] = static_cast<int>(lmi.kernel_basis.size());
    r["passive"] = lmi.passive;
    out.passed = lmi.passive;
    return out;
  }
  require(static_cast<bool>(e.storage), ErrorCode::kInvalidArgument,
          "model '" + e.name + "' has no storage function");
  const double horizon = o.horizon.value_or(5.0);
  const auto traj = simulate_model(e, o, horizon);
  const auto d = dynamics::dissipation_monitor(traj, e.storage(), tol["dissipation"]);
  r["horizon"] = horizon;
  r["steps"] = static_cast<int>(traj.size()) - 1;
  r["dissipation"] = dissipation_json(d);
  r["note"] = "dissipation inequality checked along one excited trajectory";
  r["passive"] = d.passive_along;
  out.passed = d.passive_along;
  auto t = traj;
  dynamics::attach_storage(t, e.storage());
  out.files["trajectory.csv"] = io::trajectory_csv(t);
  return out;
}

Outcome compatible_q(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"compatibility", 1e-10}, {"lmi", 1e-8}});
  const auto& s = linear_of(e);
  const Matrix G = require_metric(e);
  Matrix Q0;
  if (o.q0 == "identity") {
    Q0 = Matrix::Identity(s.n(), s.n());
  } else if (o.q0 == "G") {
    Q0 = G;
  } else if (o.q0 == "Q") {
    require(e.Q.size() > 0, ErrorCode::kInvalidArgument, "model has no storage matrix Q");
    Q0 = e.Q;
  } else {
    fail(ErrorCode::kInvalidArgument, "--q0 must be identity, G or Q");
  }
  linear::CompatibilityOptions co;
  co.tol = tol["compatibility"];
  co.lmi_tol = tol["lmi"];
  const auto res = linear::compatible_storage_fixed_point(s, G, e.sigma, Q0, co);
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  r["q0"] = o.q0;
  r["Q"] = io::to_json(res.Q);
  r["iterations"] = res.iterations;
  r["compatibility_residual"] = res.compatibility_residual;
  r["lmi_min_eigenvalue"] = res.lmi_min_eigenvalue;
  out.passed = res.compatibility_residual <= tol["compatibility"] && res.lmi_min_eigenvalue >= -tol["lmi"];
  r["compatible"] = out.passed;
  return out;
}

Outcome recover_g(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"recovery", 1e-4}});
  const auto& s = linear_of(e);
  std::vector<linear::PastInput> inputs;
  for (int i = 0; i < s.n(); ++i) {
    inputs.push_back(linear::PastInput::exponential(s.m(), i % s.m(), 1.0 + 0.75 * (i / s.m())));
  }
  const double horizon = o.horizon.value_or(20.0);
  const auto rec = linear::recover_metric_hankel(s, e.sigma, horizon, inputs);
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  r["G"] = io::to_json(rec.G);
  r["horizon"] = rec.horizon;
  r["past_input_rates"] = Json::array();
  for (int i = 0; i < s.n(); ++i) r["past_input_rates"].push_back(1.0 + 0.75 * (i / s.m()));
  if (e.G.size() > 0) {
    const double rel = (rec.G - e.G).norm() / e.G.norm();
    r["relative_error"] = rel;
    out.passed = rel <= tol["recovery"];
    r["matches_model"] = out.passed;
  }
  return out;
}

Outcome legendre_cmd(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"roundtrip", 1e-8}, {"hessian", 1e-6}, {"biconjugate", 1e-8}});
  std::vector<std::pair<std::string, ScalarField>> fields;
  if (e.kind == ModelKind::kLinear || e.kind == ModelKind::kAffine) {
    const Matrix G = require_metric(e);
    const int n = static_cast<int>(G.rows());
    const ScalarField q = quadratic_storage(G);
    fields.emplace_back("K", ScalarField(BoxDomain::cube(n, -1, 1), [q](const Vector& x) { return q.value(x); },
                                         [q](const Vector& x) { return q.gradient(x); },
                                         [q](const Vector& x) { return q.hessian(x); }));
  } else if (e.kind == ModelKind::kPortHamiltonian) {
    const auto sp = e.split ? e.split() : dynamics::PhSplit{};
    require(sp.H1.valid() && sp.H2.valid(), ErrorCode::kInvalidArgument, "model has no Hamiltonian split");
    fields.emplace_back("H1", sp.H1);
    fields.emplace_back("H2", sp.H2);
  } else {
    fields.emplace_back("K", e.hessian().K);
  }
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  r["fields"] = Json::object();
  for (const auto& [label, K] : fields) {
    legendre::PairOptions po;
    po.verify = false;
    const legendre::LegendrePair pair(K, po);
    const auto xs = state_samples(K.domain(), o);
    const auto v = pair.verify(xs);
    const bool ok = v.injective && v.roundtrip_error <= tol["roundtrip"] && v.hessian_error <= tol["hessian"] &&
                    v.biconjugate_error <= tol["biconjugate"];
    Json f = {{"dimension", K.dim()},
              {"points", v.points},
              {"roundtrip_error", v.roundtrip_error},
              {"hessian_error", v.hessian_error},
              {"biconjugate_error", v.biconjugate_error},
              {"injective", v.injective},
              {"verified", ok}};
    if (K.domain().contains(Vector::Zero(K.dim()))) {
      const auto h = legendre::homogeneity_check(K);
      f["homogeneity"] = {{"conjugate_equals_K", h.equal},
                          {"degree_two", h.degree2},
                          {"agree", h.agree},
                          {"equal_residual", h.equal_residual},
                          {"degree_residual", h.degree_residual}};
    }
    r["fields"][label] = f;
    out.passed = out.passed && ok;

    std::string csv;
    const int n = K.dim();
    for (int i = 0; i < n; ++i) csv += (i ? "," : "") + std::string("x_") + std::to_string(i + 1);
    for (int i = 0; i < n; ++i) csv += ",z_" + std::to_string(i + 1);
    csv += ",K,Kstar,roundtrip\n";
    for (const auto& x : xs) {
      const Vector z = K.gradient(x);
      const auto sol = pair.solve(z);
      for (int i = 0; i < n; ++i) csv += (i ? "," : "") + io::format_shortest(x[i]);
      for (int i = 0; i < n; ++i) csv += "," + io::format_shortest(z[i]);
      csv += "," + io::format_shortest(K.value(x)) + "," + io::format_shortest(sol.value) + "," +
             io::format_shortest((sol.x - x).cwiseAbs().maxCoeff()) + "\n";
    }
    out.files["legendre_" + label + ".csv"] = csv;
  }
  r["verified"] = out.passed;
  return out;
}

Outcome christoffel_cmd(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"gap", 1e-4}, {"flatness", 1e-6}});
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  if (e.kind == ModelKind::kLinear || e.kind == ModelKind::kAffine) {
    const Matrix G = require_metric(e);
    const int n = static_cast<int>(G.rows());
    const auto gamma = geometry::levi_civita(MetricField::constant(G, BoxDomain::cube(n, -1, 1)), Vector::Zero(n));
    r["metric"] = "constant";
    r["gamma_at_x0"] = io::to_json(gamma);
    r["max_gamma"] = geometry::max_symbol(gamma);
    r["flat"] = true;
    return out;
  }
  const auto [hs, x0] = hessian_form(e);
  const auto xs = state_samples(hs.domain(), o);
  const auto G = hs.metric();
  double gap = 0.0;
  std::string csv = "sample,k,i,j,hessian,levi_civita\n";
  for (size_t s = 0; s < xs.size(); ++s) {
    const auto a = geometry::hessian_christoffel(hs.K, xs[s]);
    const auto b = geometry::levi_civita(G, xs[s]);
    gap = std::max(gap, geometry::max_gap(a, b));
    if (s < 10) {
      for (size_t k = 0; k < a.size(); ++k)
        for (Eigen::Index i = 0; i < a[k].rows(); ++i)
          for (Eigen::Index j = 0; j < a[k].cols(); ++j)
            csv += std::to_string(s) + "," + std::to_string(k) + "," + std::to_string(i) + "," + std::to_string(j) +
                   "," + io::format_shortest(a[k](i, j)) + "," + io::format_shortest(b[k](i, j)) + "\n";
    }
  }
  const auto flat = geometry::flatness_check(hs.K, xs, tol["flatness"]);
  r["metric"] = "hessian";
  r["x0"] = io::to_json(x0);
  r["gamma_at_x0"] = io::to_json(geometry::hessian_christoffel(hs.K, x0));
  r["points"] = static_cast<int>(xs.size());
  r["max_gap"] = gap;
  r["torsion"] = geometry::torsion(geometry::hessian_connection(hs.K), xs);
  r["flat"] = flat.flat;
  r["max_third"] = flat.max_third;
  r["max_gamma"] = flat.max_gamma;
  out.passed = gap <= tol["gap"];
  r["constructions_agree"] = out.passed;
  out.files["christoffel.csv"] = csv;
  return out;
}

Outcome variational_test(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"gap", 1e-5}});
  const double horizon = o.horizon.value_or(2.0);
  const auto opts = sim_options(o, 1e-2);
  AffineSystem sys;
  MetricField G;
  dynamics::Trajectory nominal;
  if (e.kind == ModelKind::kLinear) {
    const auto& s = linear_of(e);
    sys = affine_of_linear(s);
    G = MetricField::constant(require_metric(e), sys.domain);
    nominal = dynamics::simulate_affine(sys, e.x0, excitation(s.m(), o.amplitude), 0, horizon, opts);
  } else if (e.kind == ModelKind::kAffine) {
    sys = e.affine();
    G = MetricField::constant(require_metric(e), sys.domain);
    nominal = dynamics::simulate_affine(sys, e.x0, excitation(sys.nu, o.amplitude), 0, horizon, opts);
  } else {
    const auto [hs, x0] = hessian_form(e);
    sys = hs.to_affine();
    G = hs.metric();
    const auto ub = nonlinear::input_box(hs.to_nonlinear());
    nominal = dynamics::simulate_pseudo_gradient(hs, x0, excitation(hs.nu, o.amplitude, ub), 0, horizon, opts);
  }
  geometry::ExternalOptions xo;
  xo.tol = tol["gap"];
  const auto res = geometry::external_reciprocity_test(
      sys, G, nominal, geometry::default_probes(sys.nx, sys.nu, 0, horizon), xo);
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  r["horizon"] = horizon;
  r["step"] = opts.step;
  r["probes"] = Json::array();
  for (const auto& p : res.probes) {
    r["probes"].push_back({{"name", p.name}, {"max_gap", p.max_gap}, {"max_isomorphism_gap", p.max_isomorphism_gap}});
    out.files["probe_" + p.name + ".csv"] = io::probe_csv(p);
  }
  r["max_output_gap"] = res.max_output_gap;
  r["max_isomorphism_gap"] = res.max_isomorphism_gap;
  r["match"] = res.match;
  out.files["nominal.csv"] = io::trajectory_csv(nominal);
  out.passed = res.match;
  return out;
}

Outcome simulate_cmd(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"dissipation", 1e-6}});
  const double horizon = o.horizon.value_or(5.0);
  auto traj = simulate_model(e, o, horizon);
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  r["horizon"] = horizon;
  r["step"] = sim_options(o).step;
  r["amplitude"] = o.amplitude;
  r["steps"] = static_cast<int>(traj.size()) - 1;
  r["x0"] = io::to_json(traj.states.front());
  r["x_final"] = io::to_json(traj.states.back());
  r["y_final"] = io::to_json(traj.outputs.back());
  std::optional<ScalarField> S;
  if (e.storage) {
    S = e.storage();
  } else if (e.kind == ModelKind::kLinear && e.Q.size() > 0) {
    S = quadratic_storage(e.Q);
  }
  if (S) {
    dynamics::attach_storage(traj, *S);
    r["dissipation"] = dissipation_json(dynamics::dissipation_monitor(traj, *S, tol["dissipation"]));
  }
  out.files["trajectory.csv"] = io::trajectory_csv(traj);
  return out;
}

Json certificate_json(const dynamics::RelaxationCertificate& c) {
  return {{"condition", c.condition},
          {"min_condition", c.min_condition},
          {"min_xdP", c.min_xdP},
          {"max_euler_gap", c.max_euler_gap},
          {"storage_floor", c.storage_floor},
          {"relaxation", c.relaxation}};
}

Outcome certify_relaxation_cmd(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"relaxation", 1e-10}, {"lmi", 1e-9}});
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  if (e.kind == ModelKind::kLinear) {
    const auto& s = linear_of(e);
    const Matrix G = require_metric(e);
    const double gmin = min_eigenvalue(G);
    const auto rec = linear::check_linear_reciprocity(s, G, e.sigma);
    const auto lmi = linear::lmi_residual(s, G, tol["lmi"]);
    r["metric_min_eigenvalue"] = gmin;
    r["reciprocity_residual"] = rec.residual;
    r["lmi_min_eigenvalue_at_G"] = lmi.min_eigenvalue;
    out.passed = gmin > 0.0 && rec.reciprocal && lmi.passive;
    r["relaxation"] = out.passed;
    return out;
  }
  const auto [hs, x0] = hessian_form(e);
  const auto cert = dynamics::certify_relaxation(hs, tol["relaxation"], o.samples);
  r["certificate"] = certificate_json(cert);
  r["relaxation"] = cert.relaxation;
  out.passed = cert.relaxation;
  return out;
}

Outcome convert_ph(const ModelEntry& e, const Options& o) {
  const Tolerances tol(o.tol_specs, {{"assumptions", 1e-8}, {"trajectory", 1e-6}});
  const double horizon = o.horizon.value_or(5.0);
  const auto opts = sim_options(o);
  Outcome out;
  auto& r = out.report;
  r["tolerances"] = tol.to_json();
  r["horizon"] = horizon;
  double gap = 0.0;
  std::string csv;
  if (e.kind == ModelKind::kLinear) {
    const auto& s = linear_of(e);
    const Matrix G = require_metric(e);
    Matrix Q = e.Q;
    if (Q.size() == 0) Q = linear::compatible_storage_fixed_point(s, G, e.sigma, G).Q;
    const auto pg = linear::to_pseudo_gradient(s, G, e.sigma);
    const auto sp = linear::split_port_hamiltonian_form(pg, Q);
    r["k"] = sp.k;
    r["J"] = io::to_json(sp.J);
    r["R"] = io::to_json(sp.R);
    r["Q1"] = io::to_json(sp.Q1);
    r["Q2"] = io::to_json(sp.Q2);
    r["to_energy"] = io::to_json(sp.to_energy);
    r["skew_residual"] = max_abs(sp.J + sp.J.transpose());
    r["dissipation_min_eigenvalue"] = min_eigenvalue(sp.R);
    const auto u = excitation(s.m(), o.amplitude);
    const auto tx = dynamics::simulate_linear(s, e.x0, u, 0, horizon, opts);
    const auto tz = dynamics::simulate_linear(sp.energy_system(), sp.to_energy * e.x0, u, 0, horizon, opts);
    for (size_t k = 0; k < tx.size(); ++k) {
      gap = std::max(gap, (sp.from_energy * tz.states[k] - tx.states[k]).cwiseAbs().maxCoeff());
    }
    csv = io::trajectory_csv(tz);
  } else {
    const auto conv = conversion(e, tol["assumptions"]);
    const auto& a = conv.report;
    r["assumptions"] = {{"I", a.I},
                        {"II", a.II},
                        {"III", a.III},
                        {"IV", a.IV},
                        {"residual_I", a.residual_I},
                        {"residual_II", a.residual_II},
                        {"residual_III", a.residual_III},
                        {"min_H1", a.min_H1},
                        {"min_H2", a.min_H2},
                        {"caveat", a.caveat}};
    r["order"] = conv.order;
    const auto ph = e.port_hamiltonian();
    const Vector z0 = e.kind == ModelKind::kPortHamiltonian ? e.x0 : conv.to_energy(e.x0);
    const auto u = excitation(ph.m, o.amplitude);
    const auto tz = dynamics::simulate_port_hamiltonian(ph, z0, u, 0, horizon, opts);
    const auto tx = dynamics::simulate_pseudo_gradient(conv.system, conv.to_coenergy(z0), u, 0, horizon, opts);
    for (size_t k = 0; k < tz.size(); ++k) {
      gap = std::max(gap, (conv.to_coenergy(tz.states[k]) - tx.states[k]).cwiseAbs().maxCoeff());
    }
    csv = io::trajectory_csv(tx);
  }
  r["max_trajectory_gap"] = gap;
  out.passed = gap <= tol["trajectory"];
  r["equivalent"] = out.passed;
  out.files["converted_trajectory.csv"] = csv;
  return out;
}

int list_models(const Options& o) {
  const auto reg = registry();
  Json list = Json::array();
  for (const auto& e : reg) {
    std::cout << e.name << "  [" << models::kind_name(e.kind) << "]  " << e.description << "  (" << e.reference
              << ")\n";
    list.push_back({{"name", e.name},
                    {"kind", models::kind_name(e.kind)},
                    {"description", e.description},
                    {"reference", e.reference}});
  }
  if (!o.out.empty()) {
    Json r = {{"command", "list-models"}, {"models", list}};
    io::write_file_atomic(fs::path(o.out) / "report.json", io::dump_json(r));
  }
  return kOk;
}

int run(const Options& o) {
  if (o.command == "list-models") return list_models(o);
  const ModelEntry e = resolve_model(o);
  require(o.samples > 0, ErrorCode::kInvalidArgument, "--samples must be positive");
  require(!o.step || *o.step > 0.0, ErrorCode::kInvalidArgument, "--step must be positive");
  require(!o.horizon || *o.horizon > 0.0, ErrorCode::kInvalidArgument, "--horizon must be positive");

  using Handler = Outcome (*)(const ModelEntry&, const Options&);
  static const std::map<std::string, Handler> handlers = {
      {"check-reciprocity", check_reciprocity}, {"check-passivity", check_passivity},
      {"compatible-q", compatible_q},           {"recover-g", recover_g},
      {"legendre", legendre_cmd},               {"christoffel", christoffel_cmd},
      {"variational-test", variational_test},   {"simulate", simulate_cmd},
      {"certify-relaxation", certify_relaxation_cmd}, {"convert-ph", convert_ph}};
  Outcome res = handlers.at(o.command)(e, o);

  Json report = {{"command", o.command},
                 {"model", e.name},
                 {"kind", models::kind_name(e.kind)},
                 {"seed", o.seed},
                 {"samples", o.samples}};
  for (auto it = res.report.begin(); it != res.report.end(); ++it) report[it.key()] = it.value();
  report["status"] = res.passed ? "ok" : "check_failed";
  const std::string text = io::dump_json(report);
  std::cout << text;
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    for (const auto& [name, content] : res.files) io::write_file_atomic(dir / name, content);
    io::write_file_atomic(dir / "report.json", text);
  }
  return res.passed ? kOk : kCheckFailed;
}

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch:
      return kInputError;
    case ErrorCode::kCheckFailed:
    case ErrorCode::kPreconditionFailed:
      return kCheckFailed;
    case ErrorCode::kOutsideDomain:
    case ErrorCode::kSingularMatrix:
    case ErrorCode::kNotConverged:
      return kNumericalFailure;
  }
  return kNumericalFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recipkit: reciprocity, passivity and relaxation checks for input-output systems"};
  app.require_subcommand(1);
  Options o;

  const auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--model", o.model, "registered model name");
    sub->add_option("--input", o.input, "JSON system description")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "directory for report.json and CSV files");
    sub->add_option("--tol", o.tol_specs, "tolerance override KEY=VALUE (repeatable)");
    sub->add_option("--seed", o.seed, "seed for sampled checks");
    sub->add_option("--horizon", o.horizon, "simulation horizon T");
    sub->add_option("--step", o.step, "integrator step H");
    sub->add_option("--amplitude", o.amplitude, "excitation amplitude");
    sub->add_option("--samples", o.samples, "sample points for sampled checks");
  };

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"check-reciprocity", "test the reciprocity conditions"},
      {"check-passivity", "LMI residual (linear) or dissipation along a trajectory"},
      {"compatible-q", "compatible storage fixed point Q = G Q^-1 G"},
      {"recover-g", "recover the metric from the Hankel quadratic form"},
      {"legendre", "Legendre transform identities of the generating functions"},
      {"christoffel", "Christoffel symbols of the metric, two constructions"},
      {"variational-test", "variational versus dual variational input-output test"},
      {"simulate", "simulate the model under a sinusoidal excitation"},
      {"certify-relaxation", "relaxation certificate"},
      {"convert-ph", "port-Hamiltonian normal form and representation equivalence"},
      {"list-models", "list registered models"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&o, n = name] { o.command = n; });
    add_common(sub);
    if (name == "compatible-q") sub->add_option("--q0", o.q0, "starting certificate: identity, G or Q");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    return run(o);
  } catch (const Error& e) {
    std::cerr << "recipkit: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "recipkit: " << e.what() << "\n";
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "recipkit: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "recipkit: " << e.what() << "\n";
    return kNumericalFailure;
  }
}
