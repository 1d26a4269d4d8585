#include "recipkit/linear_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recipkit/numerics.hpp"

namespace recipkit::linear {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

void check_metric(const Matrix& G, int n, const char* what) {
  require(G.rows() == n && G.cols() == n, ErrorCode::kDimensionMismatch,
          std::string(what) + " must be n x n");
  require(G.allFinite(), ErrorCode::kInvalidArgument,
          std::string(what) + " has non-finite entries");
  require(symmetry_residual(G) <= 1e-10 * std::max(1.0, max_abs(G)),
          ErrorCode::kInvalidArgument, std::string(what) + " is not symmetric");
}

void check_sigma(const SignatureMatrix& sigma, int m) {
  require(sigma.size() == m, ErrorCode::kDimensionMismatch,
          "signature matrix size must equal the input dimension");
}

double inf_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  return M.cwiseAbs().rowwise().sum().maxCoeff();
}

// Orthonormal basis of the column span of M, columns taken in order.
Matrix gram_schmidt_columns(const Matrix& M, double tol) {
  std::vector<Vector> basis;
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    Vector v = M.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) v -= b.dot(v) * b;
    }
    const double nv = v.norm();
    if (nv > tol) basis.push_back(v / nv);
  }
  Matrix out(M.rows(), static_cast<Eigen::Index>(basis.size()));
  for (size_t j = 0; j < basis.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = basis[j];
  return out;
}

}  // namespace

LinearSystem::LinearSystem(Matrix A_, Matrix B_, Matrix C_, Matrix D_)
    : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), D(std::move(D_)) {
  validate();
}

void LinearSystem::validate() const {
  const auto n = A.rows();
  const auto m = B.cols();
  require(A.cols() == n, ErrorCode::kDimensionMismatch, "A must be square");
  require(B.rows() == n, ErrorCode::kDimensionMismatch, "B must have n rows");
  require(C.rows() == m && C.cols() == n, ErrorCode::kDimensionMismatch,
          "C must be m x n");
  require(D.rows() == m && D.cols() == m, ErrorCode::kDimensionMismatch,
          "D must be m x m");
  require(all_finite(A) && all_finite(B) && all_finite(C) && all_finite(D),
          ErrorCode::kInvalidArgument, "system matrices must be finite");
}

LinearSystem LinearPseudoGradientForm::to_state_space() const {
  const Matrix Gi = checked_inverse(G, 1e-300, "G");
  LinearSystem sys;
  sys.A = -Gi * P;
  sys.B = Gi * C.transpose() * sigma.matrix();
  sys.C = C;
  sys.D = D;
  sys.validate();
  return sys;
}

ReciprocityResult check_linear_reciprocity(const LinearSystem& sys, const Matrix& G,
                                           const SignatureMatrix& sigma, double tol) {
  sys.validate();
  const int n = sys.n();
  const int m = sys.m();
  check_metric(G, n, "G");
  check_sigma(sigma, m);
  if (n > 0) checked_inverse(G, 1e-300, "G");
  const Matrix S = sigma.matrix();
  Matrix M(n + m, n + m);
  M << G * sys.A, G * sys.B, S * sys.C, S * sys.D;
  ReciprocityResult r;
  r.residual = symmetry_residual(M);
  r.reciprocal = r.residual <= tol;
  return r;
}

LinearPseudoGradientForm to_pseudo_gradient(const LinearSystem& sys, const Matrix& G,
                                            const SignatureMatrix& sigma, double tol) {
  const auto rec = check_linear_reciprocity(sys, G, sigma, tol);
  if (!rec.reciprocal) {
    fail(ErrorCode::kPreconditionFailed,
         "system is not reciprocal (residual " + std::to_string(rec.residual) + ")");
  }
  LinearPseudoGradientForm pg;
  pg.G = G;
  pg.P = -G * sys.A;
  pg.C = sys.C;
  pg.D = sys.D;
  pg.sigma = sigma;
  return pg;
}

Matrix solve_dual_isomorphism(const LinearSystem& sys, const SignatureMatrix& sigma) {
  sys.validate();
  const int n = sys.n();
  const int m = sys.m();
  check_sigma(sigma, m);
  Matrix ctrl(n, n * m), dual(n, n * m);
  Matrix blk = sys.B;
  Matrix dblk = sys.C.transpose() * sigma.matrix();
  for (int k = 0; k < n; ++k) {
    ctrl.middleCols(k * m, m) = blk;
    dual.middleCols(k * m, m) = dblk;
    blk = sys.A * blk;
    dblk = sys.A.transpose() * dblk;
  }
  Eigen::JacobiSVD<Matrix> svd(ctrl);
  const Vector& s = svd.singularValues();
  require(n == 0 || s[n - 1] > 1e-10 * std::max(1.0, s[0]),
          ErrorCode::kPreconditionFailed, "(A, B) is not controllable");
  const Matrix gram = ctrl * ctrl.transpose();
  Matrix G = gram.ldlt().solve(ctrl * dual.transpose()).transpose();
  const double scale = std::max(1.0, max_abs(G));
  if (symmetry_residual(G) > 1e-8 * scale) {
    fail(ErrorCode::kCheckFailed, "no symmetric G exists: system is not reciprocal");
  }
  if ((G * ctrl - dual).cwiseAbs().maxCoeff() > 1e-8 * std::max(scale, max_abs(dual))) {
    fail(ErrorCode::kCheckFailed, "dual isomorphism equations are inconsistent");
  }
  G = sym(G);
  checked_inverse(G, 1e-300, "G");
  return G;
}

LinearSystem dual_system(const LinearSystem& sys, const SignatureMatrix& sigma) {
  sys.validate();
  check_sigma(sigma, sys.m());
  const Matrix S = sigma.matrix();
  LinearSystem d;
  d.A = sys.A.transpose();
  d.B = sys.C.transpose() * S;
  d.C = sys.B.transpose();
  d.D = sys.D.transpose() * S;
  return d;
}

Matrix impulse_response(const LinearSystem& sys, double t) {
  return sys.C * expm(sys.A * t) * sys.B;
}

ImpulseSymmetryResult impulse_response_symmetry(const LinearSystem& sys,
                                                const SignatureMatrix& sigma,
                                                const std::vector<double>& times,
                                                double tol) {
  sys.validate();
  check_sigma(sigma, sys.m());
  const Matrix S = sigma.matrix();
  ImpulseSymmetryResult r;
  r.max_residual = max_abs(S * sys.D - sys.D.transpose() * S);
  for (double t : times) {
    require(std::isfinite(t) && t >= 0.0, ErrorCode::kInvalidArgument,
            "impulse response times must be finite and nonnegative");
    const Matrix W = impulse_response(sys, t);
    r.max_residual = std::max(r.max_residual, max_abs(S * W * S - W.transpose()));
  }
  r.symmetric = r.max_residual <= tol;
  return r;
}

PastInput PastInput::exponential(int m, int channel, double rate) {
  require(channel >= 0 && channel < m, ErrorCode::kInvalidArgument,
          "input channel out of range");
  require(rate > 0.0, ErrorCode::kInvalidArgument, "exponential rate must be positive");
  PastInput p;
  p.signal = [m, channel, rate](double s) {
    Vector u = Vector::Zero(m);
    u[channel] = std::exp(rate * s);
    return u;
  };
  return p;
}

namespace {

// int_0^horizon f(t) dt over dyadic pieces [0,1], [1,2], [2,4], ...
Vector integrate_dyadic(const std::function<Vector(double)>& f, double horizon,
                        int dim, double tol) {
  QuadratureOptions q;
  q.tol = tol;
  Vector total = Vector::Zero(dim);
  double a = 0.0;
  double b = std::min(1.0, horizon);
  while (a < horizon) {
    total += integrate(f, a, b, dim, q);
    a = b;
    b = std::min(2.0 * b, horizon);
  }
  return total;
}

double effective_horizon(const PastInput& input, double horizon) {
  return std::min(horizon, input.duration);
}

}  // namespace

Vector state_from_past_input(const LinearSystem& sys, const PastInput& input,
                             double horizon, double tol) {
  require(static_cast<bool>(input.signal), ErrorCode::kInvalidArgument,
          "past input has no signal");
  require(horizon > 0.0 && std::isfinite(horizon), ErrorCode::kInvalidArgument,
          "horizon must be positive and finite");
  const double T = effective_horizon(input, horizon);
  const int m = sys.m();
  return integrate_dyadic(
      [&](double t) -> Vector {
        const Vector u = input.signal(-t);
        require(u.size() == m, ErrorCode::kDimensionMismatch,
                "past input has the wrong dimension");
        return expm(sys.A * t) * (sys.B * u);
      },
      T, sys.n(), tol);
}

double hankel_quadratic_form(const LinearSystem& sys, const SignatureMatrix& sigma,
                             const Vector& x0, const PastInput& input, double horizon,
                             double tol) {
  require(x0.size() == sys.n(), ErrorCode::kDimensionMismatch,
          "initial state has the wrong dimension");
  if (x0.isZero(0.0)) return 0.0;
  const double T = effective_horizon(input, horizon);
  const Matrix SC = sigma.matrix() * sys.C;
  return integrate_dyadic(
      [&](double t) -> Vector {
        const Vector y = SC * (expm(sys.A * t) * x0);
        return Vector::Constant(1, y.dot(input.signal(-t)));
      },
      T, 1, tol)[0];
}

HankelRecovery recover_metric_hankel(const LinearSystem& sys,
                                     const SignatureMatrix& sigma, double horizon,
                                     const std::vector<PastInput>& past_inputs,
                                     const HankelOptions& opts) {
  sys.validate();
  const int n = sys.n();
  const int m = sys.m();
  check_sigma(sigma, m);
  require(static_cast<int>(past_inputs.size()) == n, ErrorCode::kInvalidArgument,
          "need exactly n past inputs");
  require(horizon > 0.0, ErrorCode::kInvalidArgument, "horizon must be positive");

  const double abscissa = spectral_abscissa(sys.A);
  require(abscissa < -opts.hurwitz_margin, ErrorCode::kPreconditionFailed,
          "A is not Hurwitz with the required margin");
  const double alpha = -abscissa;
  const double normCB = sys.C.norm() * sys.B.norm();

  std::vector<Vector> states;
  states.reserve(static_cast<size_t>(n));
  const double qtol = 1e-12;
  for (const auto& u : past_inputs) {
    states.push_back(state_from_past_input(sys, u, horizon, qtol));
  }
  double max_state = 0.0;
  for (const auto& x : states) max_state = std::max(max_state, x.norm());

  double H = horizon;
  auto tail = [&](double h) { return normCB * max_state * std::exp(-alpha * h) / alpha; };
  while (tail(H) >= opts.tol && H < opts.max_horizon) H = std::min(2.0 * H, opts.max_horizon);
  require(tail(H) < opts.tol, ErrorCode::kNotConverged,
          "truncation tail bound exceeds tolerance at the maximum horizon");
  if (H != horizon) {
    for (int i = 0; i < n; ++i) {
      states[static_cast<size_t>(i)] =
          state_from_past_input(sys, past_inputs[static_cast<size_t>(i)], H, qtol);
    }
  }

  Matrix X(n, n);
  for (int i = 0; i < n; ++i) X.col(i) = states[static_cast<size_t>(i)];
  Eigen::JacobiSVD<Matrix> svd(X);
  const Vector& sv = svd.singularValues();
  require(n == 0 || sv[n - 1] > 1e-10 * std::max(sv[0], 1e-300),
          ErrorCode::kPreconditionFailed, "past inputs reach rank-deficient states");

  auto q = [&](const PastInput& u, const Vector& x) {
    return hankel_quadratic_form(sys, sigma, x, u, H, qtol);
  };
  Matrix Mq(n, n);
  for (int i = 0; i < n; ++i) Mq(i, i) = q(past_inputs[static_cast<size_t>(i)], X.col(i));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& ui = past_inputs[static_cast<size_t>(i)];
      const auto& uj = past_inputs[static_cast<size_t>(j)];
      PastInput sum;
      sum.signal = [&ui, &uj](double s) -> Vector { return ui.signal(s) + uj.signal(s); };
      sum.duration = std::max(ui.duration, uj.duration);
      // Linear in the input, so the summed input reaches x_i + x_j.
      const Vector xs = X.col(i) + X.col(j);
      const double v = 0.5 * (q(sum, xs) - Mq(i, i) - Mq(j, j));
      Mq(i, j) = v;
      Mq(j, i) = v;
    }
  }
  const Matrix Xi = X.inverse();
  HankelRecovery out;
  out.G = sym(Xi.transpose() * Mq * Xi);
  out.horizon = H;
  out.initial_states = std::move(states);
  return out;
}

LmiReport lmi_residual(const LinearSystem& sys, const Matrix& Q, double tol) {
  sys.validate();
  const int n = sys.n();
  const int m = sys.m();
  require(Q.rows() == n && Q.cols() == n, ErrorCode::kDimensionMismatch,
          "Q must be n x n");
  require(symmetry_residual(Q) <= 1e-10 * std::max(1.0, max_abs(Q)),
          ErrorCode::kInvalidArgument, "Q is not symmetric");
  const Matrix Qs = sym(Q);
  LmiReport r;
  r.Pi.resize(n + m, n + m);
  r.Pi << -Qs * sys.A - sys.A.transpose() * Qs, -Qs * sys.B + sys.C.transpose(),
      -sys.B.transpose() * Qs + sys.C, sys.D + sys.D.transpose();
  r.min_eigenvalue = min_eigenvalue_sym(r.Pi);
  r.q_min_eigenvalue = min_eigenvalue_sym(Qs);
  r.passive = r.min_eigenvalue >= -tol && r.q_min_eigenvalue >= -tol;
  const Matrix K = null_space(Qs, 1e-10);
  for (Eigen::Index j = 0; j < K.cols(); ++j) r.kernel_basis.emplace_back(K.col(j));
  return r;
}

KernelInvariance kernel_invariance_check(const LinearSystem& sys, const Matrix& Q,
                                         double lmi_tol) {
  const LmiReport lmi = lmi_residual(sys, Q, lmi_tol);
  require(lmi.passive, ErrorCode::kPreconditionFailed,
          "Q does not solve the passivity LMI");
  KernelInvariance r;
  r.kernel_dimension = static_cast<int>(lmi.kernel_basis.size());
  if (r.kernel_dimension == 0) {
    r.A_invariant = true;
    r.in_ker_C = true;
    return r;
  }
  const int n = sys.n();
  Matrix K(n, r.kernel_dimension);
  for (int j = 0; j < r.kernel_dimension; ++j) K.col(j) = lmi.kernel_basis[static_cast<size_t>(j)];
  const Matrix AK = sys.A * K;
  const Matrix off = AK - K * (K.transpose() * AK);
  r.A_invariant = max_abs(off) <= 1e-8;
  r.in_ker_C = sys.m() == 0 || max_abs(sys.C * K) <= 1e-8;
  return r;
}

MonotoneImage build_monotone_image(const LinearSystem& sys, const Matrix& Q, double tol) {
  sys.validate();
  const int n = sys.n();
  const int m = sys.m();
  require(Q.rows() == n && Q.cols() == n, ErrorCode::kDimensionMismatch,
          "Q must be n x n");
  require(symmetry_residual(Q) <= 1e-10 * std::max(1.0, max_abs(Q)),
          ErrorCode::kInvalidArgument, "Q is not symmetric");
  MonotoneImage r;
  r.M1.resize(n + m, n + m);
  r.M1 << -sys.A, -sys.B, sys.C, sys.D;
  r.M2 = Matrix::Identity(n + m, n + m);
  r.M2.topLeftCorner(n, n) = sym(Q);
  const Matrix M = r.M2.transpose() * r.M1;
  r.min_eigenvalue = min_eigenvalue_sym(M + M.transpose());
  r.monotone = r.min_eigenvalue >= -tol;
  return r;
}

CompatibilityResult compatibility_iteration(const Matrix& G, const Matrix& Q0,
                                            int max_iter, double tol) {
  const int n = static_cast<int>(G.rows());
  check_metric(G, n, "G");
  check_metric(Q0, n, "Q0");
  require(min_eigenvalue_sym(Q0) > 0.0, ErrorCode::kPreconditionFailed,
          "Q0 must be positive definite");
  checked_inverse(G, 1e-300, "G");

  CompatibilityResult r;
  Matrix Q = sym(Q0);
  auto partner = [&](const Matrix& Qk) {
    return sym(G * Qk.ldlt().solve(G));
  };
  Matrix Qp = partner(Q);
  r.compatibility_residual = inf_norm(Q - Qp);
  while (r.compatibility_residual > tol) {
    if (r.iterations >= max_iter) {
      fail(ErrorCode::kNotConverged, "compatibility iteration exceeded max_iter");
    }
    Q = matrix_geometric_mean(Q, Qp);
    ++r.iterations;
    require(min_eigenvalue_sym(Q) > 0.0, ErrorCode::kNotConverged,
            "compatibility iterate lost positive definiteness");
    Qp = partner(Q);
    r.compatibility_residual = inf_norm(Q - Qp);
  }
  r.Q = Q;
  return r;
}

CompatibilityResult compatible_storage_fixed_point(const LinearSystem& sys,
                                                   const Matrix& G,
                                                   const SignatureMatrix& sigma,
                                                   const Matrix& Q0,
                                                   const CompatibilityOptions& opts) {
  const auto rec = check_linear_reciprocity(sys, G, sigma, opts.reciprocity_tol);
  require(rec.reciprocal, ErrorCode::kPreconditionFailed,
          "system is not reciprocal with respect to (G, sigma)");
  const LmiReport lmi0 = lmi_residual(sys, Q0, opts.lmi_tol);
  require(lmi0.passive && lmi0.q_min_eigenvalue > 0.0, ErrorCode::kPreconditionFailed,
          "Q0 must be positive definite and solve the passivity LMI");
  CompatibilityResult r = compatibility_iteration(G, Q0, opts.max_iter, opts.tol);
  const LmiReport lmi = lmi_residual(sys, r.Q, opts.lmi_tol);
  r.lmi_min_eigenvalue = lmi.min_eigenvalue;
  require(lmi.passive, ErrorCode::kNotConverged,
          "compatible Q no longer satisfies the passivity LMI");
  return r;
}

Matrix SplitPortHamiltonian::energy_A() const {
  const int n = static_cast<int>(J.rows());
  Matrix Qinv = Matrix::Zero(n, n);
  if (k > 0) Qinv.topLeftCorner(k, k) = Q1.inverse();
  if (n - k > 0) Qinv.bottomRightCorner(n - k, n - k) = Q2.inverse();
  return (J - R) * Qinv;
}

Matrix SplitPortHamiltonian::energy_B() const {
  const int n = static_cast<int>(J.rows());
  Matrix B = Matrix::Zero(n, D.rows());
  B.topRows(k) = C1.transpose();
  return B;
}

Matrix SplitPortHamiltonian::energy_C() const {
  const int n = static_cast<int>(J.rows());
  Matrix C = Matrix::Zero(D.rows(), n);
  if (k > 0) C.leftCols(k) = C1 * Q1.inverse();
  return C;
}

LinearSystem SplitPortHamiltonian::energy_system() const {
  return LinearSystem(energy_A(), energy_B(), energy_C(), D);
}

SplitPortHamiltonian split_port_hamiltonian_form(const LinearPseudoGradientForm& pg,
                                                 const Matrix& Q, double tol) {
  const int n = static_cast<int>(pg.G.rows());
  const int m = static_cast<int>(pg.C.rows());
  check_metric(pg.G, n, "G");
  check_metric(pg.P, n, "P");
  check_metric(Q, n, "Q");
  require(pg.C.cols() == n && pg.D.rows() == m && pg.D.cols() == m,
          ErrorCode::kDimensionMismatch, "C and D have inconsistent sizes");
  check_sigma(pg.sigma, m);
  require(pg.sigma.is_identity(), ErrorCode::kPreconditionFailed,
          "port-Hamiltonian split requires sigma = I");
  require(min_eigenvalue_sym(Q) > 0.0, ErrorCode::kPreconditionFailed,
          "Q must be positive definite");

  // Q^{1/2} G^{-1} Q^{1/2} is similar to G^{-1} Q and symmetric.
  const Matrix Gi = checked_inverse(pg.G, 1e-300, "G");
  const Matrix Qh = spd_sqrt(Q);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(Qh * Gi * Qh), Eigen::EigenvaluesOnly);
  int k = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()[i];
    if (std::abs(lam - 1.0) <= 1e-6) {
      ++k;
    } else if (std::abs(lam + 1.0) > 1e-6) {
      fail(ErrorCode::kPreconditionFailed,
           "G^{-1}Q has an eigenvalue away from +-1: Q is not compatible with G");
    }
  }

  const Matrix T = Gi * Q;
  const Matrix I = Matrix::Identity(n, n);
  const Matrix Vp = gram_schmidt_columns(0.5 * (I + T), 1e-6);
  const Matrix Vm = gram_schmidt_columns(0.5 * (I - T), 1e-6);
  require(Vp.cols() == k && Vm.cols() == n - k, ErrorCode::kPreconditionFailed,
          "eigenspaces of G^{-1}Q do not match the eigenvalue count");

  SplitPortHamiltonian out;
  out.k = k;
  out.basis.resize(n, n);
  out.basis << Vp, Vm;
  const Matrix& V = out.basis;
  const Matrix Qs = sym(V.transpose() * Q * V);
  const Matrix Gs = sym(V.transpose() * pg.G * V);
  const Matrix Ps = sym(V.transpose() * pg.P * V);
  const Matrix Cs = pg.C * V;

  out.Q1 = Qs.topLeftCorner(k, k);
  out.Q2 = Qs.bottomRightCorner(n - k, n - k);
  const double qscale = std::max(1.0, max_abs(Qs));
  require(max_abs(Qs.topRightCorner(k, n - k)) <= 1e-8 * qscale &&
              max_abs(Gs.topLeftCorner(k, k) - out.Q1) <= 1e-8 * qscale &&
              max_abs(Gs.bottomRightCorner(n - k, n - k) + out.Q2) <= 1e-8 * qscale &&
              max_abs(Gs.topRightCorner(k, n - k)) <= 1e-8 * qscale,
          ErrorCode::kPreconditionFailed, "Q and G do not split in the eigenbasis");

  out.P1 = Ps.topLeftCorner(k, k);
  out.Pc = Ps.topRightCorner(k, n - k);
  out.P2 = Ps.bottomRightCorner(n - k, n - k);
  const double pscale = std::max(1.0, max_abs(Ps));
  if (k > 0 && min_eigenvalue_sym(out.P1) < -tol * pscale) {
    fail(ErrorCode::kCheckFailed, "P1 is not positive semidefinite: system not passive");
  }
  if (n - k > 0 && max_eigenvalue_sym(out.P2) > tol * pscale) {
    fail(ErrorCode::kCheckFailed, "P2 is not negative semidefinite: system not passive");
  }

  require(m == 0 || max_abs(Cs.rightCols(n - k)) <= 1e-8 * std::max(1.0, max_abs(Cs)),
          ErrorCode::kPreconditionFailed, "C does not vanish on the second block");
  out.C1 = Cs.leftCols(k);
  out.D = pg.D;

  out.J = Matrix::Zero(n, n);
  out.J.topRightCorner(k, n - k) = -out.Pc;
  out.J.bottomLeftCorner(n - k, k) = out.Pc.transpose();
  out.R = Matrix::Zero(n, n);
  out.R.topLeftCorner(k, k) = out.P1;
  out.R.bottomRightCorner(n - k, n - k) = -out.P2;

  Matrix Qblk = Matrix::Zero(n, n);
  Qblk.topLeftCorner(k, k) = out.Q1;
  Qblk.bottomRightCorner(n - k, n - k) = out.Q2;
  const Matrix Vinv = V.inverse();
  out.to_energy = Qblk * Vinv;
  out.from_energy = V * Qblk.inverse();
  return out;
}

}  // namespace recipkit::linear
