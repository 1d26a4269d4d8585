#include "recipkit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recipkit/numerics.hpp"

namespace recipkit::dynamics {

namespace {

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

Vector take(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  return out;
}

Matrix take(const Matrix& M, const std::vector<int>& rows, const std::vector<int>& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = M(rows[i], cols[j]);
  return out;
}

Matrix take_rows(const Matrix& M, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(rows[i]);
  return out;
}

BoxDomain default_input_box(const BoxDomain& given, int nu) {
  if (given.dim() == nu) return given;
  return BoxDomain::cube(nu, -1.0, 1.0);
}

bool finite(const Vector& v) { return v.allFinite(); }

// Newton with a finite-difference Jacobian for small implicit steps.
Vector newton_solve(const VectorFn& R, Vector y, const SimOptions& opts, double t) {
  for (int it = 0; it < opts.max_newton; ++it) {
    const Vector r = R(y);
    if (!finite(r)) break;
    const Matrix Jac = finite_difference_jacobian(R, y);
    Eigen::FullPivLU<Matrix> lu(Jac);
    if (!lu.isInvertible()) {
      fail(ErrorCode::kSingularMatrix,
           "implicit step Jacobian is singular at t = " + std::to_string(t));
    }
    const Vector dy = -lu.solve(r);
    y += dy;
    if (!finite(y)) break;
    if (dy.norm() <= opts.newton_tol * std::max(1.0, y.norm())) return y;
  }
  fail(ErrorCode::kNotConverged, "implicit step Newton failed at t = " + std::to_string(t));
}

using StepFn = std::function<Vector(const Vector&, double, double)>;

// One step of size h from (x, t), subdivided while the step-doubling estimate exceeds tol.
Vector advance(const StepFn& step, const Vector& x, double t, double h, const SimOptions& opts,
               int depth) {
  if (opts.local_tol <= 0.0) return step(x, t, h);
  const Vector full = step(x, t, h);
  const Vector mid = step(x, t, 0.5 * h);
  const Vector half = step(mid, t + 0.5 * h, 0.5 * h);
  if ((full - half).norm() / 3.0 <= opts.local_tol || depth >= opts.max_halvings) return half;
  const Vector a = advance(step, x, t, 0.5 * h, opts, depth + 1);
  return advance(step, a, t + 0.5 * h, 0.5 * h, opts, depth + 1);
}

template <class OutFn>
Trajectory run(const StepFn& step, const OutFn& output, const BoxDomain& domain, const Vector& x0,
               const InputSignal& u, double t0, double t1, const SimOptions& opts) {
  require(t1 > t0, ErrorCode::kInvalidArgument, "simulation needs t1 > t0");
  require(opts.step > 0.0, ErrorCode::kInvalidArgument, "step must be positive");
  if (!domain.contains(x0)) {
    fail(ErrorCode::kOutsideDomain, "initial state outside the domain: " + format_point(x0));
  }
  const int steps = std::max(1, static_cast<int>(std::llround((t1 - t0) / opts.step)));
  const double h = (t1 - t0) / steps;
  Trajectory tr;
  tr.input = u;
  tr.times.reserve(steps + 1);
  Vector x = x0;
  auto record = [&](double t) {
    const Vector ut = u(t);
    const Vector y = output(x, ut);
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.inputs.push_back(ut);
    tr.outputs.push_back(y);
    tr.monitors["supply"].push_back(ut.dot(y));
  };
  record(t0);
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    x = advance(step, x, t, h, opts, 0);
    if (!domain.contains(x)) {
      fail(ErrorCode::kOutsideDomain, "trajectory leaves the domain at t = " +
                                          std::to_string(t + h) + ", x = " + format_point(x));
    }
    record(k + 1 == steps ? t1 : t0 + (k + 1) * h);
  }
  return tr;
}

ScalarField linear_field(const BoxDomain& box, const Vector& a) {
  const int n = static_cast<int>(a.size());
  return ScalarField(
      box, [a](const Vector& x) { return a.dot(x); }, [a](const Vector&) { return a; },
      [n](const Vector&) { return Matrix::Zero(n, n); });
}

}  // namespace

InputSignal zero_input(int m) {
  return [m](double) { return Vector::Zero(m); };
}

InputSignal constant_input(const Vector& u) {
  return [u](double) { return u; };
}

void Trajectory::validate() const {
  const size_t n = times.size();
  if (states.size() != n || inputs.size() != n || outputs.size() != n) {
    fail(ErrorCode::kInvalidArgument, "trajectory channels have unequal lengths");
  }
  for (const auto& [name, values] : monitors) {
    if (values.size() != n) fail(ErrorCode::kInvalidArgument, "monitor '" + name + "' length");
  }
  for (size_t k = 1; k < n; ++k) {
    if (!(times[k] > times[k - 1])) {
      fail(ErrorCode::kInvalidArgument, "trajectory times must be strictly increasing");
    }
  }
}

Vector Trajectory::input_at(double t) const {
  if (input) return input(t);
  require(!times.empty(), ErrorCode::kInvalidArgument, "empty trajectory");
  if (t <= times.front()) return inputs.front();
  if (t >= times.back()) return inputs.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const size_t k = static_cast<size_t>(it - times.begin());
  const double s = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return (1 - s) * inputs[k - 1] + s * inputs[k];
}

void attach_storage(Trajectory& traj, const ScalarField& S) {
  auto& channel = traj.monitors["storage"];
  channel.clear();
  for (const auto& x : traj.states) channel.push_back(S.value(x));
}

// Pseudo-gradient systems --------------------------------------------------------

Vector PseudoGradientSystem::dV_dx(const Vector& x, const Vector& u) const {
  return V.gradient(concat(x, u)).head(nx);
}

Vector PseudoGradientSystem::dV_du(const Vector& x, const Vector& u) const {
  return V.gradient(concat(x, u)).tail(nu);
}

Vector PseudoGradientSystem::rhs(const Vector& x, const Vector& u) const {
  Eigen::FullPivLU<Matrix> lu(G(x));
  if (!lu.isInvertible()) fail(ErrorCode::kSingularMatrix, "G singular at " + format_point(x));
  return -lu.solve(dV_dx(x, u));
}

Vector PseudoGradientSystem::output(const Vector& x, const Vector& u) const {
  return -sigma.apply(dV_du(x, u));
}

PseudoGradientSystem HessianPseudoGradientSystem::pseudo_gradient() const {
  return PseudoGradientSystem{nx, nu, metric(), V, sigma};
}

NonlinearSystem HessianPseudoGradientSystem::to_nonlinear() const {
  const PseudoGradientSystem pg = pseudo_gradient();
  NonlinearSystem sys;
  sys.nx = nx;
  sys.nu = nu;
  sys.F = [pg](const Vector& x, const Vector& u) { return pg.rhs(x, u); };
  sys.H = [pg](const Vector& x, const Vector& u) { return pg.output(x, u); };
  sys.domain = K.domain();
  sys.input_domain = default_input_box(input_domain, nu);
  return sys;
}

AffineSystem HessianPseudoGradientSystem::to_affine() const {
  require(affine_potential(), ErrorCode::kPreconditionFailed,
          "to_affine needs V = P(x) - sum_j C_j(x) u_j");
  AffineSystem a;
  a.nx = nx;
  a.nu = nu;
  const ScalarField Kc = K, Pc = P;
  const auto Cc = C;
  const SignatureMatrix s = sigma;
  auto coupling = [Cc, n = nx](const Vector& x) {
    Matrix B(n, static_cast<Eigen::Index>(Cc.size()));
    for (size_t j = 0; j < Cc.size(); ++j) B.col(static_cast<Eigen::Index>(j)) = Cc[j].gradient(x);
    return B;
  };
  a.f = [Kc, Pc](const Vector& x) -> Vector {
    return -checked_inverse(Kc.hessian(x), 0.0, "Hessian of K") * Pc.gradient(x);
  };
  a.g = [Kc, coupling](const Vector& x) -> Matrix {
    return checked_inverse(Kc.hessian(x), 0.0, "Hessian of K") * coupling(x);
  };
  a.h = [Cc, s](const Vector& x) {
    Vector c(static_cast<Eigen::Index>(Cc.size()));
    for (size_t j = 0; j < Cc.size(); ++j) c[static_cast<Eigen::Index>(j)] = Cc[j].value(x);
    return s.apply(c);
  };
  a.dh_dx = [coupling, s](const Vector& x) -> Matrix {
    return s.matrix() * coupling(x).transpose();
  };
  a.domain = K.domain();
  a.input_domain = default_input_box(input_domain, nu);
  return a;
}

Matrix HessianPseudoGradientSystem::V_hessian(const Vector& x, const Vector& u) const {
  if (!affine_potential()) return V.hessian(concat(x, u));
  Matrix Hv = Matrix::Zero(nx + nu, nx + nu);
  Matrix Vxx = P.hessian(x);
  for (int j = 0; j < nu; ++j) {
    Vxx -= u[j] * C[static_cast<size_t>(j)].hessian(x);
    const Vector gc = C[static_cast<size_t>(j)].gradient(x);
    Hv.block(0, nx + j, nx, 1) = -gc;
    Hv.block(nx + j, 0, 1, nx) = -gc.transpose();
  }
  Hv.topLeftCorner(nx, nx) = Vxx;
  return Hv;
}

HessianPseudoGradientSystem make_hessian_system(const ScalarField& K, const ScalarField& V,
                                                const SignatureMatrix& sigma,
                                                const BoxDomain& input_domain) {
  const int nu = sigma.size();
  require(V.dim() == K.dim() + nu, ErrorCode::kDimensionMismatch,
          "V must live on (x,u) with dim x = dim K and dim u = size of sigma");
  HessianPseudoGradientSystem s;
  s.nx = K.dim();
  s.nu = nu;
  s.K = K;
  s.V = V;
  s.sigma = sigma;
  s.input_domain = default_input_box(input_domain, nu);
  return s;
}

HessianPseudoGradientSystem make_affine_hessian_system(const ScalarField& K, const ScalarField& P,
                                                       const std::vector<ScalarField>& C,
                                                       const SignatureMatrix& sigma,
                                                       const BoxDomain& input_domain) {
  const int n = K.dim();
  const int m = static_cast<int>(C.size());
  require(P.dim() == n, ErrorCode::kDimensionMismatch, "P must have the dimension of K");
  require(sigma.size() == m, ErrorCode::kDimensionMismatch, "one C_j per input channel");
  for (const auto& c : C) {
    require(c.dim() == n, ErrorCode::kDimensionMismatch, "C_j must have the dimension of K");
  }
  HessianPseudoGradientSystem s;
  s.nx = n;
  s.nu = m;
  s.K = K;
  s.P = P;
  s.C = C;
  s.sigma = sigma;
  s.input_domain = default_input_box(input_domain, m);
  const BoxDomain box = K.domain().product(s.input_domain);
  s.V = ScalarField(
      box,
      [P, C, n](const Vector& xu) {
        const Vector x = xu.head(n);
        double v = P.value(x);
        for (size_t j = 0; j < C.size(); ++j) v -= C[j].value(x) * xu[n + static_cast<Eigen::Index>(j)];
        return v;
      },
      [P, C, n, m](const Vector& xu) {
        const Vector x = xu.head(n);
        Vector g(n + m);
        g.head(n) = P.gradient(x);
        for (int j = 0; j < m; ++j) {
          g.head(n) -= xu[n + j] * C[static_cast<size_t>(j)].gradient(x);
          g[n + j] = -C[static_cast<size_t>(j)].value(x);
        }
        return g;
      });
  const HessianPseudoGradientSystem copy = s;
  s.V = ScalarField(
      box, [V = s.V](const Vector& xu) { return V.value(xu); },
      [V = s.V](const Vector& xu) { return V.gradient(xu); },
      [copy, n](const Vector& xu) {
        return copy.V_hessian(xu.head(n), xu.tail(xu.size() - n));
      });
  return s;
}

HessianPseudoGradientSystem make_affine_hessian_system(const ScalarField& K, const ScalarField& P,
                                                       const Matrix& g,
                                                       const SignatureMatrix& sigma,
                                                       const BoxDomain& input_domain) {
  require(g.rows() == K.dim(), ErrorCode::kDimensionMismatch, "g must be n x m");
  std::vector<ScalarField> C;
  for (Eigen::Index j = 0; j < g.cols(); ++j) C.push_back(linear_field(K.domain(), g.col(j)));
  auto s = make_affine_hessian_system(K, P, C, sigma, input_domain);
  s.g = g;
  return s;
}

// Port-Hamiltonian systems --------------------------------------------------------

Vector PortHamiltonianSystem::rhs(const Vector& z, const Vector& u) const {
  const Vector e = H.gradient(z);
  Vector out = J(z) * e;
  if (R) out -= R(e);
  if (m > 0) out += g(z) * u;
  return out;
}

Vector PortHamiltonianSystem::output(const Vector& z) const {
  if (m == 0) return Vector::Zero(0);
  return g(z).transpose() * H.gradient(z);
}

PortHamiltonianSystem::Check PortHamiltonianSystem::check(const std::vector<Vector>& samples) const {
  Check c;
  c.min_dissipation = std::numeric_limits<double>::infinity();
  for (const auto& z : samples) {
    const Matrix Jz = J(z);
    c.max_skew = std::max(c.max_skew, max_abs(Jz + Jz.transpose()));
    const Vector e = H.gradient(z);
    c.min_dissipation = std::min(c.min_dissipation, R ? e.dot(R(e)) : 0.0);
  }
  if (samples.empty()) c.min_dissipation = 0.0;
  c.ok = c.max_skew <= 1e-10 && c.min_dissipation >= -1e-12;
  return c;
}

// Simulation -------------------------------------------------------------------

Trajectory simulate_pseudo_gradient(const PseudoGradientSystem& sys, const Vector& x0,
                                    const InputSignal& u, double t0, double t1,
                                    const SimOptions& opts) {
  require(x0.size() == sys.nx, ErrorCode::kDimensionMismatch, "x0 has the wrong size");
  const StepFn step = [&sys, &u, &opts](const Vector& x, double t, double h) {
    const Vector um = u(t + 0.5 * h);
    const VectorFn R = [&](const Vector& y) -> Vector {
      const Vector mid = 0.5 * (x + y);
      return sys.G(mid) * (y - x) + h * sys.dV_dx(mid, um);
    };
    const Vector guess = x + h * sys.rhs(x, u(t));
    return newton_solve(R, guess, opts, t);
  };
  return run(
      step, [&sys](const Vector& x, const Vector& ut) { return sys.output(x, ut); },
      sys.domain(), x0, u, t0, t1, opts);
}

Trajectory simulate_pseudo_gradient(const HessianPseudoGradientSystem& sys, const Vector& x0,
                                    const InputSignal& u, double t0, double t1,
                                    const SimOptions& opts) {
  return simulate_pseudo_gradient(sys.pseudo_gradient(), x0, u, t0, t1, opts);
}

Trajectory simulate_linear(const linear::LinearSystem& sys, const Vector& x0, const InputSignal& u,
                           double t0, double t1, const SimOptions& opts) {
  sys.validate();
  require(x0.size() == sys.n(), ErrorCode::kDimensionMismatch, "x0 has the wrong size");
  const Matrix I = Matrix::Identity(sys.n(), sys.n());
  const StepFn step = [&](const Vector& x, double t, double h) -> Vector {
    const Eigen::PartialPivLU<Matrix> lu(I - 0.5 * h * sys.A);
    return lu.solve((I + 0.5 * h * sys.A) * x + h * sys.B * u(t + 0.5 * h));
  };
  const double big = std::numeric_limits<double>::max();
  const BoxDomain everywhere(Vector::Constant(sys.n(), -big), Vector::Constant(sys.n(), big));
  return run(
      step, [&sys](const Vector& x, const Vector& ut) -> Vector { return sys.C * x + sys.D * ut; },
      everywhere, x0, u, t0, t1, opts);
}

Trajectory simulate_affine(const AffineSystem& sys, const Vector& x0, const InputSignal& u,
                           double t0, double t1, const SimOptions& opts) {
  require(x0.size() == sys.nx, ErrorCode::kDimensionMismatch, "x0 has the wrong size");
  const auto rhs = [&sys](const Vector& x, const Vector& ut) -> Vector {
    Vector d = sys.f(x);
    if (sys.nu > 0) d += sys.g(x) * ut;
    return d;
  };
  const StepFn step = [&](const Vector& x, double t, double h) -> Vector {
    const Vector um = u(t + 0.5 * h);
    const Vector k1 = rhs(x, u(t));
    const Vector k2 = rhs(x + 0.5 * h * k1, um);
    const Vector k3 = rhs(x + 0.5 * h * k2, um);
    const Vector k4 = rhs(x + h * k3, u(t + h));
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  };
  return run(
      step,
      [&sys](const Vector& x, const Vector& ut) -> Vector {
        Vector y = sys.h(x);
        if (sys.nu > 0) y += sys.k_at(x) * ut;
        return y;
      },
      sys.domain, x0, u, t0, t1, opts);
}

Trajectory simulate_port_hamiltonian(const PortHamiltonianSystem& sys, const Vector& z0,
                                     const InputSignal& u, double t0, double t1,
                                     const SimOptions& opts) {
  require(z0.size() == sys.n, ErrorCode::kDimensionMismatch, "z0 has the wrong size");
  const GaussRule& rule = gauss_legendre_unit(4);
  const StepFn step = [&](const Vector& z, double t, double h) {
    const Vector um = u(t + 0.5 * h);
    const VectorFn R = [&](const Vector& y) -> Vector {
      Vector gbar = Vector::Zero(z.size());
      for (size_t q = 0; q < rule.nodes.size(); ++q) {
        gbar += rule.weights[q] * sys.H.gradient(z + rule.nodes[q] * (y - z));
      }
      const Vector mid = 0.5 * (z + y);
      Vector f = sys.J(mid) * gbar;
      if (sys.R) f -= sys.R(gbar);
      if (sys.m > 0) f += sys.g(mid) * um;
      return y - z - h * f;
    };
    return newton_solve(R, z + h * sys.rhs(z, u(t)), opts, t);
  };
  Trajectory tr = run(
      step, [&sys](const Vector& z, const Vector&) { return sys.output(z); }, sys.domain(), z0,
      u, t0, t1, opts);
  attach_storage(tr, sys.H);
  return tr;
}

DissipationResult dissipation_monitor(const Trajectory& traj, const ScalarField& S, double tol) {
  traj.validate();
  DissipationResult r;
  r.max_violation = traj.size() < 2 ? 0.0 : -std::numeric_limits<double>::infinity();
  r.passive_along = true;
  double scale = 0.0;
  double s_prev = S.value(traj.states.front());
  double w_prev = traj.inputs.front().dot(traj.outputs.front());
  for (size_t k = 1; k < traj.size(); ++k) {
    const double dt = traj.times[k] - traj.times[k - 1];
    const double s = S.value(traj.states[k]);
    const double w = traj.inputs[k].dot(traj.outputs[k]);
    const double supply = 0.5 * (w + w_prev) * dt;
    const double v = s - s_prev - supply;
    r.max_violation = std::max(r.max_violation, v);
    if (v > tol * dt) r.passive_along = false;
    scale += std::abs(supply);
    s_prev = s;
    w_prev = w;
  }
  r.supply_scale = std::max(1.0, scale);
  return r;
}

// Port-Hamiltonian to Hessian pseudo-gradient -----------------------------------

AssumptionReport check_ph_assumptions(const PortHamiltonianSystem& sys, const PhSplit& split,
                                      double tol, int samples) {
  const int n = sys.n;
  std::vector<int> order = split.idx1;
  order.insert(order.end(), split.idx2.begin(), split.idx2.end());
  {
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    bool ok = static_cast<int>(sorted.size()) == n;
    for (int i = 0; ok && i < n; ++i) ok = sorted[static_cast<size_t>(i)] == i;
    require(ok, ErrorCode::kInvalidArgument, "idx1 and idx2 must partition the state indices");
  }
  const int n1 = static_cast<int>(split.idx1.size());
  const int n2 = n - n1;
  require(split.H1.valid() && split.H1.dim() == n1 && split.H2.valid() && split.H2.dim() == n2,
          ErrorCode::kDimensionMismatch, "H1 and H2 must be fields on z1 and z2");

  AssumptionReport rep;
  const auto zs = sys.domain().halton(samples);

  // (I)
  const Matrix J0 = sys.J(zs.front());
  const Matrix Jp = take(J0, order, order);
  const Matrix Pc = split.Pc.size() ? split.Pc : Matrix(-Jp.topRightCorner(n1, n2));
  double rI = 0.0;
  if (Pc.rows() != n1 || Pc.cols() != n2) {
    rI = std::numeric_limits<double>::infinity();
  } else {
    Matrix expected = Matrix::Zero(n, n);
    expected.topRightCorner(n1, n2) = -Pc;
    expected.bottomLeftCorner(n2, n1) = Pc.transpose();
    rI = max_abs(Jp - expected);
  }
  Matrix g0 = sys.m > 0 ? sys.g(zs.front()) : Matrix::Zero(n, 0);
  const Matrix gp = take_rows(g0, order);
  if (n2 > 0 && sys.m > 0) rI = std::max(rI, max_abs(gp.bottomRows(n2)));
  if (split.g1.size()) {
    rI = (split.g1.rows() == n1 && split.g1.cols() == sys.m)
             ? std::max(rI, max_abs(gp.topRows(n1) - split.g1))
             : std::numeric_limits<double>::infinity();
  }
  for (const auto& z : zs) {
    rI = std::max(rI, max_abs(sys.J(z) - J0));
    if (sys.m > 0) rI = std::max(rI, max_abs(sys.g(z) - g0));
  }
  rep.residual_I = rI;
  rep.I = rI <= tol;

  // (II), up to a constant
  double offset = 0.0;
  bool first = true;
  double rII = 0.0;
  for (const auto& z : zs) {
    const double d = sys.H.value(z) - split.H1.value(take(z, split.idx1)) -
                     split.H2.value(take(z, split.idx2));
    if (first) {
      offset = d;
      first = false;
    }
    rII = std::max(rII, std::abs(d - offset));
  }
  rep.residual_II = rII;
  rep.II = rII <= tol * 1e2;

  // (III)
  double rIII = 0.0;
  for (const auto& z : zs) {
    const Vector e = sys.H.gradient(z);
    const Vector Re = sys.R ? sys.R(e) : Vector::Zero(n);
    const Vector Rp = take(Re, order);
    const Vector e1 = take(e, split.idx1), e2 = take(e, split.idx2);
    const Vector r1 = split.P1.valid() ? split.P1.gradient(e1) : Vector::Zero(n1);
    const Vector r2 = split.P2.valid() ? Vector(-split.P2.gradient(e2)) : Vector::Zero(n2);
    rIII = std::max(rIII, (Rp.head(n1) - r1).cwiseAbs().maxCoeff());
    if (n2 > 0) rIII = std::max(rIII, (Rp.tail(n2) - r2).cwiseAbs().maxCoeff());
  }
  rep.residual_III = rIII;
  rep.III = rIII <= std::max(tol, 1e-7);

  // (IV): the sampled minimum must sit away from the outer layer of the grid.
  auto bounded_below = [](const ScalarField& f, double& fmin) {
    const int d = f.dim();
    int per_axis = std::clamp(static_cast<int>(std::pow(2000.0, 1.0 / d)), 3, 41);
    if (per_axis % 2 == 0) --per_axis;
    const auto grid = f.domain().grid(per_axis);
    fmin = std::numeric_limits<double>::infinity();
    size_t arg = 0;
    for (size_t i = 0; i < grid.size(); ++i) {
      const double v = f.value(grid[i]);
      if (v < fmin) {
        fmin = v;
        arg = i;
      }
    }
    if (!std::isfinite(fmin)) return false;
    size_t rem = arg;
    for (int a = 0; a < d; ++a) {
      const size_t c = rem % static_cast<size_t>(per_axis);
      rem /= static_cast<size_t>(per_axis);
      if (c == 0 || c + 1 == static_cast<size_t>(per_axis)) return false;
    }
    return true;
  };
  const bool b1 = bounded_below(split.H1, rep.min_H1);
  const bool b2 = n2 == 0 || bounded_below(split.H2, rep.min_H2);
  rep.IV = b1 && b2;
  return rep;
}

Vector PhConversion::to_coenergy(const Vector& z) const {
  // grad H1(z1), grad H2(z2) in x order.
  const int n1 = pair1.K().dim();
  const int n2 = static_cast<int>(order.size()) - n1;
  std::vector<int> i1(order.begin(), order.begin() + n1);
  std::vector<int> i2(order.begin() + n1, order.end());
  Vector x(n1 + n2);
  x.head(n1) = pair1.forward(take(z, i1));
  if (n2 > 0) x.tail(n2) = pair2.forward(take(z, i2));
  return x;
}

Vector PhConversion::to_energy(const Vector& x) const {
  const int n1 = pair1.K().dim();
  const int n2 = static_cast<int>(order.size()) - n1;
  Vector zp(n1 + n2);
  zp.head(n1) = pair1.inverse(x.head(n1));
  if (n2 > 0) zp.tail(n2) = pair2.inverse(x.tail(n2));
  Vector z(n1 + n2);
  for (size_t i = 0; i < order.size(); ++i) z[order[i]] = zp[static_cast<Eigen::Index>(i)];
  return z;
}

PhConversion ph_to_hessian_pseudo_gradient(const PortHamiltonianSystem& sys, const PhSplit& split,
                                           double tol) {
  PhConversion out;
  out.report = check_ph_assumptions(sys, split, tol);
  const auto& r = out.report;
  if (!r.I) {
    fail(ErrorCode::kPreconditionFailed,
         "assumption (I) fails: J and g must be constant with J = [[0,-Pc],[Pc^T,0]], g = [g1;0] "
         "(residual " + std::to_string(r.residual_I) + ")");
  }
  if (!r.II) {
    fail(ErrorCode::kPreconditionFailed, "assumption (II) fails: H does not split as H1 + H2 "
                                         "(residual " + std::to_string(r.residual_II) + ")");
  }
  if (!r.III) {
    fail(ErrorCode::kPreconditionFailed,
         "assumption (III) fails: R is not (grad P1, -grad P2) (residual " +
             std::to_string(r.residual_III) + ")");
  }
  if (!r.IV) {
    fail(ErrorCode::kPreconditionFailed,
         "assumption (IV) fails: H1 or H2 not bounded below on the sampled box");
  }
  const int n = sys.n;
  const int n1 = static_cast<int>(split.idx1.size());
  const int n2 = n - n1;
  out.order = split.idx1;
  out.order.insert(out.order.end(), split.idx2.begin(), split.idx2.end());

  legendre::PairOptions popts;
  popts.samples = 50;
  out.pair1 = legendre::make_legendre_pair(split.H1, popts);
  if (n2 > 0) out.pair2 = legendre::make_legendre_pair(split.H2, popts);
  const auto p1 = out.pair1, p2 = out.pair2;

  BoxDomain xbox = p1.Kstar().domain();
  if (n2 > 0) xbox = xbox.product(p2.Kstar().domain());

  const ScalarField K(
      xbox,
      [p1, p2, n1, n2](const Vector& x) {
        double v = p1.conjugate(x.head(n1));
        if (n2 > 0) v -= p2.conjugate(x.tail(n2));
        return v;
      },
      [p1, p2, n1, n2](const Vector& x) {
        Vector g(n1 + n2);
        g.head(n1) = p1.inverse(x.head(n1));
        if (n2 > 0) g.tail(n2) = -p2.inverse(x.tail(n2));
        return g;
      },
      [p1, p2, n1, n2](const Vector& x) {
        Matrix Hm = Matrix::Zero(n1 + n2, n1 + n2);
        Hm.topLeftCorner(n1, n1) = p1.conjugate_hessian(x.head(n1));
        if (n2 > 0) Hm.bottomRightCorner(n2, n2) = -p2.conjugate_hessian(x.tail(n2));
        return Hm;
      });

  const Matrix Jp = take(sys.J(sys.domain().center()), out.order, out.order);
  const Matrix Pc = split.Pc.size() ? split.Pc : Matrix(-Jp.topRightCorner(n1, n2));
  const ScalarField P1 = split.P1, P2 = split.P2;
  const ScalarField P(
      xbox,
      [P1, P2, Pc, n1, n2](const Vector& x) {
        double v = x.head(n1).dot(Pc * x.tail(n2));
        if (P1.valid()) v += P1.value(x.head(n1));
        if (P2.valid() && n2 > 0) v += P2.value(x.tail(n2));
        return v;
      },
      [P1, P2, Pc, n1, n2](const Vector& x) {
        Vector g(n1 + n2);
        g.head(n1) = Pc * x.tail(n2);
        if (n2 > 0) g.tail(n2) = Pc.transpose() * x.head(n1);
        if (P1.valid()) g.head(n1) += P1.gradient(x.head(n1));
        if (P2.valid() && n2 > 0) g.tail(n2) += P2.gradient(x.tail(n2));
        return g;
      },
      [P1, P2, Pc, n1, n2](const Vector& x) {
        Matrix Hm = Matrix::Zero(n1 + n2, n1 + n2);
        Hm.topRightCorner(n1, n2) = Pc;
        Hm.bottomLeftCorner(n2, n1) = Pc.transpose();
        if (P1.valid()) Hm.topLeftCorner(n1, n1) += P1.hessian(x.head(n1));
        if (P2.valid() && n2 > 0) Hm.bottomRightCorner(n2, n2) += P2.hessian(x.tail(n2));
        return Hm;
      });

  Matrix g = Matrix::Zero(n, sys.m);
  if (sys.m > 0) g.topRows(n1) = take_rows(sys.g(sys.domain().center()), out.order).topRows(n1);
  out.system = make_affine_hessian_system(K, P, g, SignatureMatrix::identity(sys.m));

  const ScalarField H1 = split.H1, H2 = split.H2;
  out.storage = ScalarField(
      xbox,
      [p1, p2, H1, H2, n1, n2](const Vector& x) {
        double v = H1.value(p1.inverse(x.head(n1)));
        if (n2 > 0) v += H2.value(p2.inverse(x.tail(n2)));
        return v;
      },
      [p1, p2, n1, n2](const Vector& x) {
        Vector g(n1 + n2);
        g.head(n1) = p1.conjugate_hessian(x.head(n1)) * x.head(n1);
        if (n2 > 0) g.tail(n2) = p2.conjugate_hessian(x.tail(n2)) * x.tail(n2);
        return g;
      });
  return out;
}

// Structure checks ---------------------------------------------------------------

PassiveStructureResult check_passive_hessian_structure(const HessianPseudoGradientSystem& sys,
                                                       const ScalarField& S1,
                                                       const ScalarField& S2, double tol,
                                                       int samples) {
  require(sys.affine_potential(), ErrorCode::kPreconditionFailed,
          "structure check needs V = P(x) - sum_j C_j(x) u_j");
  const int n1 = S1.dim(), n2 = S2.dim();
  require(n1 + n2 == sys.nx, ErrorCode::kDimensionMismatch, "S1, S2 must split the state");
  PassiveStructureResult r;
  const auto xs = sys.domain().halton(samples);
  double offset = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const Vector& x = xs[i];
    const double d = sys.K.value(x) - S1.value(x.head(n1)) + S2.value(x.tail(n2));
    if (i == 0) offset = d;
    r.split_residual = std::max(r.split_residual, std::abs(d - offset) / (1 + std::abs(sys.K.value(x))));
  }
  if (r.split_residual > std::max(tol, 1e-8)) {
    fail(ErrorCode::kPreconditionFailed,
         "K is not S1(x1) - S2(x2) (residual " + std::to_string(r.split_residual) + ")");
  }
  for (const auto& x : xs) {
    for (int j = 0; j < sys.nu; ++j) {
      const Vector gc = sys.C[static_cast<size_t>(j)].gradient(x);
      if (n2 > 0) r.max_g2 = std::max(r.max_g2, gc.tail(n2).cwiseAbs().maxCoeff());
    }
  }
  r.g2_zero = r.max_g2 <= 1e-12;
  r.min_sign1 = std::numeric_limits<double>::infinity();
  r.max_sign2 = -std::numeric_limits<double>::infinity();
  for (const auto& x : xs) {
    Vector a = Vector::Zero(sys.nx);
    a.head(n1) = x.head(n1);
    r.min_sign1 = std::min(r.min_sign1, x.head(n1).dot(sys.P.gradient(a).head(n1)));
    if (n2 > 0) {
      Vector b = Vector::Zero(sys.nx);
      b.tail(n2) = x.tail(n2);
      r.max_sign2 = std::max(r.max_sign2, x.tail(n2).dot(sys.P.gradient(b).tail(n2)));
    }
  }
  if (n2 == 0) r.max_sign2 = 0.0;
  r.sign_conditions = r.min_sign1 >= -tol && r.max_sign2 <= tol;
  return r;
}

RelaxationCertificate certify_relaxation(const HessianPseudoGradientSystem& sys,
                                         const nonlinear::SampleSet& samples, double tol) {
  const bool plus = sys.sigma.is_negative_identity() && sys.nu > 0;
  if (!sys.sigma.is_identity() && !plus) {
    fail(ErrorCode::kPreconditionFailed, "relaxation needs sigma = I (or the sigma = -I variant)");
  }
  RelaxationCertificate c;
  c.condition = plus ? "x^T dV/dx + u^T dV/du >= 0" : "x^T dV/dx - u^T dV/du >= 0";
  const bool specialised = sys.affine_potential() && !plus;
  if (specialised) c.condition = "x^T grad P >= 0 and C_j(x) = x^T grad C_j(x)";
  const PseudoGradientSystem pg = sys.pseudo_gradient();
  c.min_condition = std::numeric_limits<double>::infinity();
  c.min_xdP = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    const Matrix Hk = sym(sys.K.hessian(s.x));
    if (min_eigenvalue_sym(Hk) <= 0.0) {
      fail(ErrorCode::kPreconditionFailed,
           "Hessian of K is not positive definite at " + format_point(s.x));
    }
    const double a = s.x.dot(pg.dV_dx(s.x, s.u));
    const double b = s.u.dot(pg.dV_du(s.x, s.u));
    const double cond = plus ? a + b : a - b;
    c.min_condition = std::min(c.min_condition, cond / (1.0 + std::abs(a) + std::abs(b)));
    if (specialised) {
      const Vector gp = sys.P.gradient(s.x);
      c.min_xdP = std::min(c.min_xdP, s.x.dot(gp) / (1.0 + gp.norm() * s.x.norm()));
      for (const auto& Cj : sys.C) {
        const double v = Cj.value(s.x);
        c.max_euler_gap = std::max(c.max_euler_gap,
                                   std::abs(v - s.x.dot(Cj.gradient(s.x))) / (1.0 + std::abs(v)));
      }
    }
  }
  if (!specialised) c.min_xdP = 0.0;

  const ScalarField K = sys.K;
  c.storage = ScalarField(
      K.domain(), [K](const Vector& x) { return x.dot(K.gradient(x)) - K.value(x); },
      [K](const Vector& x) -> Vector { return K.hessian(x) * x; });
  const Vector origin = Vector::Zero(sys.nx);
  const double s0 = c.storage.value(origin);
  c.storage_floor = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    c.storage_floor = std::min(c.storage_floor, c.storage.value(s.x) - s0);
  }
  const bool inequality =
      specialised ? (c.min_xdP >= -tol && c.max_euler_gap <= std::max(tol, 1e-9))
                  : c.min_condition >= -tol;
  c.relaxation = inequality && c.storage_floor >= -1e-10;
  return c;
}

RelaxationCertificate certify_relaxation(const HessianPseudoGradientSystem& sys, double tol,
                                         int samples) {
  return certify_relaxation(sys, nonlinear::default_samples(sys.to_nonlinear(), samples), tol);
}

MonotoneClassification classify_monotone_ph(const HessianPseudoGradientSystem& sys,
                                            const nonlinear::SampleSet& samples, double tol) {
  MonotoneClassification c;
  c.min_joint = c.min_xx = std::numeric_limits<double>::infinity();
  c.max_uu = -std::numeric_limits<double>::infinity();
  const int n = sys.nx, m = sys.nu;
  for (const auto& s : samples) {
    const Matrix Hv = sym(sys.V_hessian(s.x, s.u));
    const double scale = 1.0 + max_abs(Hv);
    c.min_joint = std::min(c.min_joint, min_eigenvalue_sym(Hv) / scale);
    c.min_xx = std::min(c.min_xx, min_eigenvalue_sym(Hv.topLeftCorner(n, n)) / scale);
    if (m > 0) c.max_uu = std::max(c.max_uu, max_eigenvalue_sym(Hv.bottomRightCorner(m, m)) / scale);
  }
  if (m == 0) c.max_uu = 0.0;
  c.cyclically_monotone = c.min_joint >= -tol;
  c.monotone = c.min_xx >= -tol && c.max_uu <= tol;
  return c;
}

IncrementalPassivityResult incremental_passivity_check(
    const HessianPseudoGradientSystem& sys,
    const std::vector<std::pair<Trajectory, Trajectory>>& pairs, double tol) {
  const auto cls =
      classify_monotone_ph(sys, nonlinear::default_samples(sys.to_nonlinear(), 100), 1e-8);
  const bool ok = sys.sigma.is_identity() ? cls.monotone
                  : sys.sigma.is_negative_identity() ? cls.cyclically_monotone
                                                     : false;
  if (!ok) {
    fail(ErrorCode::kPreconditionFailed,
         "incremental passivity is only guaranteed for monotone classifications");
  }
  const PseudoGradientSystem pg = sys.pseudo_gradient();
  IncrementalPassivityResult r;
  r.max_violation = -std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : pairs) {
    a.validate();
    b.validate();
    require(a.size() == b.size(), ErrorCode::kDimensionMismatch,
            "paired trajectories need the same time grid");
    for (size_t k = 0; k < a.size(); ++k) {
      const Vector dx = a.states[k] - b.states[k];
      const Vector dz = -pg.dV_dx(a.states[k], a.inputs[k]) + pg.dV_dx(b.states[k], b.inputs[k]);
      const double lhs = dx.dot(dz);
      const double rhs = (a.outputs[k] - b.outputs[k]).dot(a.inputs[k] - b.inputs[k]);
      r.max_violation = std::max(r.max_violation, lhs - rhs);
    }
  }
  if (pairs.empty()) r.max_violation = 0.0;
  r.holds = r.max_violation <= tol;
  return r;
}

}  // namespace recipkit::dynamics
