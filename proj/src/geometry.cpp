#include "recipkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "recipkit/nonlinear_reciprocity.hpp"
#include "recipkit/numerics.hpp"

namespace recipkit::geometry {

namespace {

Christoffel zeros(int n) { return Christoffel(static_cast<size_t>(n), Matrix::Zero(n, n)); }

// Raise the first index: Gamma^k_ij = sum_l Ginv(k, l) low[l](i, j), symmetrised in (i, j).
Christoffel raise(const Matrix& Ginv, const std::vector<Matrix>& low) {
  const int n = static_cast<int>(Ginv.rows());
  Christoffel out = zeros(n);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) out[static_cast<size_t>(k)] += Ginv(k, l) * low[static_cast<size_t>(l)];
    out[static_cast<size_t>(k)] = sym(out[static_cast<size_t>(k)]);
  }
  return out;
}

// Directional derivative of the Hessian along e_l; one-sided near the boundary.
Matrix hessian_derivative(const ScalarField& K, const Vector& x, int l, double h) {
  const BoxDomain& box = K.domain();
  Vector xp = x, xm = x;
  xp[l] += h;
  xm[l] -= h;
  if (box.contains(xp) && box.contains(xm)) return (K.hessian(xp) - K.hessian(xm)) / (2.0 * h);
  const double s = box.contains(xp) ? 1.0 : -1.0;
  Vector x1 = x, x2 = x;
  x1[l] += s * h;
  x2[l] += 2.0 * s * h;
  if (!box.contains(x1) || !box.contains(x2)) {
    fail(ErrorCode::kOutsideDomain, "third-derivative stencil leaves the domain at " + format_point(x));
  }
  return s * (-3.0 * K.hessian(x) + 4.0 * K.hessian(x1) - K.hessian(x2)) / (2.0 * h);
}

}  // namespace

Christoffel levi_civita(const MetricField& G, const Vector& x) {
  const int n = static_cast<int>(x.size());
  const Matrix Ginv = checked_inverse(G(x), 1e-12, "metric");
  const auto dG = nonlinear::metric_derivatives(G, x);
  std::vector<Matrix> low(static_cast<size_t>(n), Matrix::Zero(n, n));
  for (int l = 0; l < n; ++l) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        low[static_cast<size_t>(l)](i, j) =
            0.5 * (dG[static_cast<size_t>(j)](l, i) + dG[static_cast<size_t>(i)](l, j) -
                   dG[static_cast<size_t>(l)](i, j));
      }
    }
  }
  return raise(Ginv, low);
}

std::vector<Matrix> third_derivatives(const ScalarField& K, const Vector& x, double h) {
  const int n = static_cast<int>(x.size());
  std::vector<Matrix> raw;
  raw.reserve(static_cast<size_t>(n));
  for (int l = 0; l < n; ++l) raw.push_back(hessian_derivative(K, x, l, h));
  std::vector<Matrix> T(static_cast<size_t>(n), Matrix::Zero(n, n));
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        T[static_cast<size_t>(l)](i, j) = (raw[static_cast<size_t>(l)](i, j) +
                                           raw[static_cast<size_t>(i)](l, j) +
                                           raw[static_cast<size_t>(j)](i, l)) / 3.0;
  return T;
}

Christoffel hessian_christoffel(const ScalarField& K, const Vector& x) {
  const Matrix Hinv = checked_inverse(sym(K.hessian(x)), 1e-12, "Hessian of K");
  auto T = third_derivatives(K, x);
  for (auto& t : T) t *= 0.5;
  return raise(Hinv, T);
}

Connection levi_civita_connection(const MetricField& G) {
  return {G.dim(), [G](const Vector& x) { return levi_civita(G, x); }};
}

Connection hessian_connection(const ScalarField& K) {
  return {K.dim(), [K](const Vector& x) { return hessian_christoffel(K, x); }};
}

double torsion(const Connection& c, const std::vector<Vector>& samples) {
  double t = 0.0;
  for (const auto& x : samples) {
    for (const auto& g : c(x)) t = std::max(t, recipkit::max_abs(g - g.transpose()));
  }
  return t;
}

double max_symbol(const Christoffel& g) {
  double m = 0.0;
  for (const auto& k : g) m = std::max(m, recipkit::max_abs(k));
  return m;
}

double max_gap(const Christoffel& a, const Christoffel& b) {
  require(a.size() == b.size(), ErrorCode::kDimensionMismatch, "Christoffel arrays differ in size");
  double m = 0.0;
  for (size_t k = 0; k < a.size(); ++k) m = std::max(m, recipkit::max_abs(a[k] - b[k]));
  return m;
}

FlatnessResult flatness_check(const ScalarField& K, const std::vector<Vector>& samples, double tol) {
  FlatnessResult r;
  for (const auto& x : samples) {
    for (const auto& t : third_derivatives(K, x)) r.max_third = std::max(r.max_third, recipkit::max_abs(t));
    try {
      r.max_gamma = std::max(r.max_gamma, max_symbol(hessian_christoffel(K, x)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularMatrix) throw;
    }
  }
  r.flat = r.max_third <= tol;
  r.consistent = r.flat == (r.max_gamma <= tol);
  return r;
}

// Nominal path ----------------------------------------------------------------------

NominalPath::NominalPath(const AffineSystem& sys, const dynamics::Trajectory& traj) : traj_(traj) {
  traj_.validate();
  require(traj_.size() >= 2, ErrorCode::kInvalidArgument, "nominal needs at least two samples");
  times_ = traj_.times;
  slopes_.reserve(traj_.size());
  for (size_t k = 0; k < traj_.size(); ++k) {
    const Vector& x = traj_.states[k];
    if (!sys.domain.contains(x)) {
      fail(ErrorCode::kOutsideDomain, "nominal leaves the domain at t = " +
                                          std::to_string(times_[k]) + ", x = " + format_point(x));
    }
    Vector s = sys.f(x);
    if (sys.nu > 0) s += sys.g(x) * traj_.inputs[k];
    slopes_.push_back(s);
  }
}

size_t NominalPath::segment(double t) const {
  if (t < times_.front() - 1e-12 || t > times_.back() + 1e-12) {
    fail(ErrorCode::kOutsideDomain, "time " + std::to_string(t) + " outside the nominal");
  }
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const size_t k = it == times_.begin() ? 0 : static_cast<size_t>(it - times_.begin()) - 1;
  return std::min(k, times_.size() - 2);
}

Vector NominalPath::x(double t) const {
  const size_t k = segment(t);
  const double h = times_[k + 1] - times_[k];
  const double s = (t - times_[k]) / h, s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * traj_.states[k] + (s3 - 2 * s2 + s) * h * slopes_[k] +
         (-2 * s3 + 3 * s2) * traj_.states[k + 1] + (s3 - s2) * h * slopes_[k + 1];
}

Vector NominalPath::xdot(double t) const {
  const size_t k = segment(t);
  const double h = times_[k + 1] - times_[k];
  const double s = (t - times_[k]) / h, s2 = s * s;
  return ((6 * s2 - 6 * s) * traj_.states[k] + (-6 * s2 + 6 * s) * traj_.states[k + 1]) / h +
         (3 * s2 - 4 * s + 1) * slopes_[k] + (3 * s2 - 2 * s) * slopes_[k + 1];
}

Vector NominalPath::u(double t) const { return traj_.input_at(t); }

// Variational systems ---------------------------------------------------------------

namespace {

void require_plain_output(const AffineSystem& sys, const Vector& x) {
  if (sys.k && recipkit::max_abs(sys.k_at(x)) > 0.0) {
    fail(ErrorCode::kPreconditionFailed, "variational systems need k = 0");
  }
}

Matrix total_jacobian(const AffineSystem& sys, const Vector& x, const Vector& u) {
  Matrix J = sys.jac_f(x);
  for (int j = 0; j < sys.nu; ++j) J += u[j] * sys.jac_g_column(x, j);
  return J;
}

}  // namespace

LtvSystem variational_system(const AffineSystem& sys, const dynamics::Trajectory& nominal) {
  auto path = std::make_shared<NominalPath>(sys, nominal);
  require_plain_output(sys, nominal.states.front());
  LtvSystem v;
  v.n = sys.nx;
  v.m = sys.nu;
  v.p = sys.nu;
  v.A = [sys, path](double t) { return total_jacobian(sys, path->x(t), path->u(t)); };
  v.B = [sys, path](double t) { return sys.g(path->x(t)); };
  v.C = [sys, path](double t) { return sys.jac_h(path->x(t)); };
  return v;
}

LtvSystem dual_variational_system(const AffineSystem& sys, const Connection& connection,
                                  const dynamics::Trajectory& nominal, DualForm form) {
  require(connection.dim == sys.nx, ErrorCode::kDimensionMismatch,
          "connection dimension must equal the state dimension");
  auto path = std::make_shared<NominalPath>(sys, nominal);
  require_plain_output(sys, nominal.states.front());
  const int n = sys.nx;
  LtvSystem d;
  d.n = n;
  d.m = sys.nu;
  d.p = sys.nu;
  d.A = [sys, connection, path, form, n](double t) {
    const Vector x = path->x(t);
    const Vector u = path->u(t);
    Vector F;
    if (form == DualForm::kVelocity) {
      F = path->xdot(t);
    } else {
      F = sys.f(x);
      if (sys.nu > 0) F += sys.g(x) * u;
    }
    const Christoffel gam = connection(x);
    Matrix Ad = total_jacobian(sys, x, u).transpose();
    for (int a = 0; a < n; ++a) Ad.col(a) += 2.0 * gam[static_cast<size_t>(a)] * F;
    return Ad;
  };
  d.B = [sys, path](double t) -> Matrix { return sys.jac_h(path->x(t)).transpose(); };
  d.C = [sys, path](double t) -> Matrix { return sys.g(path->x(t)).transpose(); };
  return d;
}

LtvTrajectory simulate_ltv(const LtvSystem& sys, const Vector& x0, const dynamics::InputSignal& u,
                           double t0, double t1, double step) {
  require(t1 > t0 && step > 0.0, ErrorCode::kInvalidArgument, "need t1 > t0 and step > 0");
  require(x0.size() == sys.n, ErrorCode::kDimensionMismatch, "initial state has the wrong size");
  const int steps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step - 1e-9)));
  const double h = (t1 - t0) / steps;
  const auto f = [&](double t, const Vector& x) -> Vector {
    Vector dx = sys.A(t) * x;
    if (sys.m > 0) dx += sys.B(t) * u(t);
    return dx;
  };
  LtvTrajectory tr;
  Vector x = x0;
  for (int k = 0; k <= steps; ++k) {
    const double t = k == steps ? t1 : t0 + k * h;
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.outputs.push_back(sys.C(t) * x);
    if (k == steps) break;
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = f(t + h, x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return tr;
}

std::vector<Probe> default_probes(int n, int m, double t0, double t1) {
  std::vector<Probe> out;
  const double T = t1 - t0;
  for (int j = 0; j < m; ++j) {
    out.push_back({"pulse_u" + std::to_string(j + 1), Vector::Zero(n), [=](double t) {
                     Vector v = Vector::Zero(m);
                     const double s = (t - t0) / (0.2 * T);
                     if (s >= 0.0 && s <= 1.0) v[j] = std::pow(std::sin(M_PI * s), 2);
                     return v;
                   }});
    out.push_back({"sine_u" + std::to_string(j + 1), Vector::Zero(n), [=](double t) {
                     Vector v = Vector::Zero(m);
                     v[j] = std::sin(4.0 * M_PI * (t - t0) / T);
                     return v;
                   }});
  }
  for (int i = 0; i < n; ++i) {
    Vector xi = Vector::Zero(n);
    xi[i] = 1.0;
    out.push_back({"free_x" + std::to_string(i + 1), xi, [m](double) { return Vector(Vector::Zero(m)); }});
  }
  return out;
}

ExternalReciprocityResult external_reciprocity_test(const AffineSystem& sys, const MetricField& G,
                                                    const dynamics::Trajectory& nominal,
                                                    const std::vector<Probe>& probes,
                                                    const ExternalOptions& opts) {
  const LtvSystem var = variational_system(sys, nominal);
  const LtvSystem dual = dual_variational_system(sys, levi_civita_connection(G), nominal);
  const NominalPath path(sys, nominal);
  const double t0 = nominal.times.front(), t1 = nominal.times.back();
  const double step = opts.step > 0.0 ? opts.step : (t1 - t0) / static_cast<double>(nominal.size() - 1);

  ExternalReciprocityResult r;
  for (const auto& pr : probes) {
    require(pr.xi.size() == sys.nx, ErrorCode::kDimensionMismatch, "probe xi has the wrong size");
    const auto a = simulate_ltv(var, pr.xi, pr.du, t0, t1, step);
    const auto b = simulate_ltv(dual, G(path.x(t0)) * pr.xi, pr.du, t0, t1, step);
    ProbeRecord rec;
    rec.name = pr.name;
    rec.times = a.times;
    rec.dy = a.outputs;
    rec.yd = b.outputs;
    for (size_t k = 0; k < a.times.size(); ++k) {
      const double gap = (a.outputs[k] - b.outputs[k]).norm();
      rec.gap.push_back(gap);
      rec.max_gap = std::max(rec.max_gap, gap);
      const Matrix Gx = G(path.x(a.times[k]));
      rec.max_isomorphism_gap =
          std::max(rec.max_isomorphism_gap, (b.states[k] - Gx * a.states[k]).norm());
    }
    r.max_output_gap = std::max(r.max_output_gap, rec.max_gap);
    r.max_isomorphism_gap = std::max(r.max_isomorphism_gap, rec.max_isomorphism_gap);
    r.probes.push_back(std::move(rec));
  }
  r.match = r.max_output_gap <= opts.tol;
  return r;
}

}  // namespace recipkit::geometry
