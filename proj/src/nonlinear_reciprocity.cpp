#include "recipkit/nonlinear_reciprocity.hpp"

#include <algorithm>
#include <cmath>

#include "recipkit/numerics.hpp"

namespace recipkit::nonlinear {

namespace {

Matrix checked_metric(const MetricField& G, const Vector& x, double det_floor) {
  const Matrix g = G(x);
  require(g.rows() == x.size() && g.cols() == x.size(), ErrorCode::kDimensionMismatch,
          "metric has the wrong size");
  if (std::abs(g.determinant()) < det_floor) {
    fail(ErrorCode::kSingularMatrix, "metric is singular at " + format_point(x));
  }
  return g;
}

// d(G v)/dx where v(x) has Jacobian dv.
Matrix product_jacobian(const Matrix& g, const std::vector<Matrix>& dG, const Vector& v,
                        const Matrix& dv) {
  Matrix J = g * dv;
  for (size_t i = 0; i < dG.size(); ++i) J.col(static_cast<Eigen::Index>(i)) += dG[i] * v;
  return J;
}

Vector concat(const Vector& a, const Vector& b) {
  Vector z(a.size() + b.size());
  z << a, b;
  return z;
}

void check_sample(const NonlinearSystem& sys, const StateInputSample& s) {
  require(s.x.size() == sys.nx && s.u.size() == sys.nu, ErrorCode::kDimensionMismatch,
          "sample point has the wrong dimension");
  if (sys.domain.dim() == sys.nx) {
    require(sys.domain.contains(s.x), ErrorCode::kOutsideDomain,
            "sample state outside the domain: " + format_point(s.x));
  }
}

}  // namespace

BoxDomain input_box(const NonlinearSystem& sys) {
  if (sys.input_domain.dim() == sys.nu) return sys.input_domain;
  return BoxDomain::cube(sys.nu, -1.0, 1.0);
}

SampleSet default_samples(const NonlinearSystem& sys, int count) {
  require(sys.domain.dim() == sys.nx, ErrorCode::kInvalidArgument,
          "system has no state domain to sample");
  const BoxDomain box = sys.domain.product(input_box(sys));
  SampleSet out;
  out.reserve(static_cast<size_t>(count));
  for (const Vector& z : box.halton(count)) {
    out.push_back({z.head(sys.nx), z.tail(sys.nu)});
  }
  return out;
}

std::vector<Matrix> metric_derivatives(const MetricField& G, const Vector& x) {
  std::vector<Matrix> out;
  out.reserve(static_cast<size_t>(x.size()));
  Vector xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = default_fd_step(x[i]);
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    out.push_back((G(xp) - G(xm)) / (2.0 * h));
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return out;
}

ReciprocityReport check_reciprocity(const NonlinearSystem& sys, const MetricField& G,
                                    const SignatureMatrix& sigma, const SampleSet& samples,
                                    double tol, double det_floor) {
  require(sigma.size() == sys.nu, ErrorCode::kDimensionMismatch,
          "signature size must equal the input dimension");
  const Matrix S = sigma.matrix();
  ReciprocityReport r;
  for (const auto& s : samples) {
    check_sample(sys, s);
    const Matrix g = checked_metric(G, s.x, det_floor);
    const auto dG = metric_derivatives(G, s.x);
    const Vector F = sys.F(s.x, s.u);
    const Matrix dGF = product_jacobian(g, dG, F, sys.jac_F_x(s.x, s.u));
    r.residual_state = std::max(r.residual_state, symmetry_residual(dGF));
    const Matrix Hu = sys.jac_H_u(s.x, s.u);
    r.residual_output = std::max(r.residual_output, max_abs(S * Hu - Hu.transpose() * S));
    const Matrix cross = g * sys.jac_F_u(s.x, s.u) - sys.jac_H_x(s.x, s.u).transpose() * S;
    r.residual_cross = std::max(r.residual_cross, max_abs(cross));
    ++r.points_tested;
  }
  r.reciprocal = r.residual_state <= tol && r.residual_output <= tol && r.residual_cross <= tol;
  return r;
}

ReciprocityReport check_reciprocity_affine(const AffineSystem& sys, const MetricField& G,
                                           const SignatureMatrix& sigma,
                                           const std::vector<Vector>& states, double tol,
                                           double det_floor) {
  require(sigma.size() == sys.nu, ErrorCode::kDimensionMismatch,
          "signature size must equal the input dimension");
  require(static_cast<bool>(sys.f) && static_cast<bool>(sys.g) && static_cast<bool>(sys.h),
          ErrorCode::kInvalidArgument, "affine system needs f, g and h");
  const Matrix S = sigma.matrix();
  ReciprocityReport r;
  for (const Vector& x : states) {
    require(x.size() == sys.nx, ErrorCode::kDimensionMismatch,
            "sample state has the wrong dimension");
    const Matrix gm = checked_metric(G, x, det_floor);
    const auto dG = metric_derivatives(G, x);
    r.residual_state =
        std::max(r.residual_state, symmetry_residual(product_jacobian(gm, dG, sys.f(x), sys.jac_f(x))));
    const Matrix gx = sys.g(x);
    for (int j = 0; j < sys.nu; ++j) {
      const Matrix dj = product_jacobian(gm, dG, gx.col(j), sys.jac_g_column(x, j));
      r.residual_input_fields = std::max(r.residual_input_fields, symmetry_residual(dj));
    }
    const Matrix k = sys.k_at(x);
    r.residual_output = std::max(r.residual_output, max_abs(S * k - k.transpose() * S));
    r.residual_cross = std::max(r.residual_cross, max_abs(gm * gx - sys.jac_h(x).transpose() * S));
    ++r.points_tested;
  }
  r.reciprocal = r.residual_state <= tol && r.residual_input_fields <= tol &&
                 r.residual_output <= tol && r.residual_cross <= tol;
  return r;
}

HessianMetricResult is_hessian_metric(const MetricField& G, const std::vector<Vector>& samples,
                                      double tol) {
  HessianMetricResult r;
  for (const Vector& x : samples) {
    const auto dG = metric_derivatives(G, x);
    const auto n = static_cast<int>(x.size());
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          r.residual = std::max(r.residual, std::abs(dG[static_cast<size_t>(i)](j, k) -
                                                     dG[static_cast<size_t>(j)](i, k)));
        }
      }
    }
  }
  r.hessian = r.residual <= tol;
  return r;
}

ScalarField reconstruct_K(const MetricField& G, const Vector& base_point,
                          const ReconstructOptions& opts) {
  const BoxDomain& dom = G.domain();
  require(base_point.size() == dom.dim(), ErrorCode::kDimensionMismatch,
          "base point has the wrong dimension");
  require(dom.contains(base_point), ErrorCode::kOutsideDomain,
          "base point outside the domain: " + format_point(base_point));
  const auto hm = is_hessian_metric(G, dom.halton(50), opts.hessian_tol);
  require(hm.hessian, ErrorCode::kPreconditionFailed,
          "metric is not Hessian (residual " + std::to_string(hm.residual) + ")");

  const int n = dom.dim();
  QuadratureOptions q;
  q.order = opts.quadrature_order;
  q.tol = opts.quadrature_tol;
  const Vector x0 = base_point;

  auto chi = [G, x0, n, q](const Vector& y) -> Vector {
    const Vector d = y - x0;
    return integrate([&](double s) -> Vector { return G(x0 + s * d) * d; }, 0.0, 1.0, n, q);
  };
  auto value = [chi, x0, q](const Vector& x) {
    const Vector d = x - x0;
    return integrate_scalar([&](double t) { return chi(x0 + t * d).dot(d); }, 0.0, 1.0, q);
  };
  ScalarField K(dom, value, chi);

  double worst = 0.0;
  for (const Vector& x : dom.halton(opts.check_points, 7)) {
    const Matrix H = finite_difference_jacobian(chi, x, 1e-5);
    const Matrix g = G(x);
    worst = std::max(worst, max_abs(H - g) / std::max(1.0, max_abs(g)));
  }
  require(worst <= opts.verify_tol, ErrorCode::kCheckFailed,
          "reconstructed K does not reproduce G (error " + std::to_string(worst) + ")");
  return K;
}

ReciprocityReport check_reciprocity_hessian(const NonlinearSystem& sys, const ScalarField& K,
                                            const SignatureMatrix& sigma,
                                            const SampleSet& samples, double tol,
                                            double det_floor) {
  require(sigma.size() == sys.nu, ErrorCode::kDimensionMismatch,
          "signature size must equal the input dimension");
  require(K.dim() == sys.nx, ErrorCode::kDimensionMismatch,
          "K must be defined on the state space");
  const Matrix S = sigma.matrix();
  ReciprocityReport r;
  for (const auto& s : samples) {
    check_sample(sys, s);
    const Matrix g = K.hessian(s.x);
    if (std::abs(g.determinant()) < det_floor) {
      fail(ErrorCode::kSingularMatrix, "Hessian of K is singular at " + format_point(s.x));
    }
    r.residual_state = std::max(r.residual_state, symmetry_residual(g * sys.jac_F_x(s.x, s.u)));
    const Matrix Hu = sys.jac_H_u(s.x, s.u);
    r.residual_output = std::max(r.residual_output, max_abs(S * Hu - Hu.transpose() * S));
    const Matrix cross = g * sys.jac_F_u(s.x, s.u) - sys.jac_H_x(s.x, s.u).transpose() * S;
    r.residual_cross = std::max(r.residual_cross, max_abs(cross));
    ++r.points_tested;
  }
  r.reciprocal = r.residual_state <= tol && r.residual_output <= tol && r.residual_cross <= tol;
  return r;
}

double PotentialFunction::operator()(const Vector& x, const Vector& u) const {
  return V.value(concat(x, u));
}

double potential_line_integral(const NonlinearSystem& sys, const MetricField& G,
                               const SignatureMatrix& sigma, const Vector& x0,
                               const Vector& u0, const Vector& x, const Vector& u,
                               PathKind path, double tol) {
  const int n = sys.nx;
  const Matrix S = sigma.matrix();
  // w(x,u) = -(G F, sigma H): the gradient V must have.
  auto w = [&](const Vector& z) -> Vector {
    const Vector xs = z.head(n);
    const Vector us = z.tail(sys.nu);
    return -concat(G(xs) * sys.F(xs, us), S * sys.H(xs, us));
  };
  QuadratureOptions q;
  q.tol = tol;
  const Vector z0 = concat(x0, u0);
  const Vector z1 = concat(x, u);
  if (path == PathKind::kStraight) {
    const Vector d = z1 - z0;
    return integrate_scalar([&](double t) { return w(z0 + t * d).dot(d); }, 0.0, 1.0, q);
  }
  double total = 0.0;
  Vector p = z0;
  for (Eigen::Index k = 0; k < z0.size(); ++k) {
    const double a = z0[k];
    const double b = z1[k];
    if (a != b) {
      total += integrate_scalar(
          [&](double t) {
            Vector pt = p;
            pt[k] = t;
            return w(pt)[k];
          },
          a, b, q);
    }
    p[k] = b;
  }
  return total;
}

PotentialFunction reconstruct_potential(const NonlinearSystem& sys, const MetricField& G,
                                        const SignatureMatrix& sigma, const Vector& x0,
                                        const Vector& u0, const PotentialOptions& opts) {
  require(x0.size() == sys.nx && u0.size() == sys.nu, ErrorCode::kDimensionMismatch,
          "base point has the wrong dimension");
  const auto rec = check_reciprocity(sys, G, sigma, default_samples(sys), opts.reciprocity_tol);
  if (!rec.reciprocal) {
    fail(ErrorCode::kPreconditionFailed,
         "system is not reciprocal; the potential would be path dependent");
  }
  const BoxDomain box = sys.domain.product(input_box(sys));
  require(box.contains(concat(x0, u0)), ErrorCode::kOutsideDomain,
          "base point outside the (x,u) box");

  const int n = sys.nx;
  const int m = sys.nu;
  const Matrix S = sigma.matrix();
  const PathKind path = opts.path;
  const double qtol = opts.quadrature_tol;
  ScalarFn value = [sys, G, sigma, x0, u0, n, m, path, qtol](const Vector& z) {
    return potential_line_integral(sys, G, sigma, x0, u0, z.head(n), z.tail(m), path, qtol);
  };
  VectorFn gradient = [sys, G, S, n, m](const Vector& z) -> Vector {
    const Vector xs = z.head(n);
    const Vector us = z.tail(m);
    return -concat(G(xs) * sys.F(xs, us), S * sys.H(xs, us));
  };

  PotentialFunction out;
  out.base_point = concat(x0, u0);
  out.nu_ = m;
  double worst = 0.0;
  for (const Vector& z : box.halton(opts.check_points, 11)) {
    const Vector fd = finite_difference_gradient(value, z, 1e-5);
    const Vector g = gradient(z);
    worst = std::max(worst, (fd - g).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff()));
  }
  out.max_gradient_error = worst;
  require(worst <= opts.verify_tol, ErrorCode::kCheckFailed,
          "potential gradient does not match (G F, sigma H) (error " + std::to_string(worst) + ")");
  out.V = ScalarField(box, value, gradient);
  return out;
}

}  // namespace recipkit::nonlinear
