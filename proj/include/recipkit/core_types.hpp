#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "recipkit/error.hpp"

namespace recipkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using ScalarFn = std::function<double(const Vector&)>;
using VectorFn = std::function<Vector(const Vector&)>;
using MatrixFn = std::function<Matrix(const Vector&)>;

/// Map of a state and an input, e.g. F(x,u) or H(x,u).
using StateInputFn = std::function<Vector(const Vector&, const Vector&)>;
using StateInputJacobian = std::function<Matrix(const Vector&, const Vector&)>;

/// Axis-aligned box [lower, upper] in R^n; the single chart every field lives on.
class BoxDomain {
 public:
  BoxDomain() = default;
  BoxDomain(Vector lower, Vector upper);

  static BoxDomain cube(int dim, double lo, double hi);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }
  Vector width() const { return upper_ - lower_; }

  /// Closed-box membership, optionally widened by `slack` on each side.
  bool contains(const Vector& x, double slack = 0.0) const;
  bool contains_strictly(const Vector& x) const;

  /// Cell-centre tensor grid with `per_axis` points along each axis.
  std::vector<Vector> grid(int per_axis) const;
  /// Halton low-discrepancy points, strictly inside the box.
  std::vector<Vector> halton(int count, int skip = 20) const;
  /// Uniform pseudo-random points, strictly inside the box.
  std::vector<Vector> uniform(int count, std::uint64_t seed) const;

  /// Box scaled by `factor` about `anchor` (anchor need not be the centre).
  BoxDomain scaled_about(const Vector& anchor, double factor) const;
  /// Cartesian product: this box followed by `other`.
  BoxDomain product(const BoxDomain& other) const;
  /// Sub-box on the given coordinate indices.
  BoxDomain select(const std::vector<int>& indices) const;

 private:
  Vector lower_;
  Vector upper_;
};

/// Central-difference step used whenever analytic derivatives are missing.
double default_fd_step(double xi);

/// Twice-differentiable function on a box. Gradient and Hessian are optional;
/// missing ones are filled in by central differences.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(BoxDomain domain, ScalarFn value, VectorFn gradient = {},
              MatrixFn hessian = {});

  int dim() const { return domain_.dim(); }
  const BoxDomain& domain() const { return domain_; }

  double value(const Vector& x) const { return value_(x); }
  double operator()(const Vector& x) const { return value_(x); }
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;

  bool has_gradient() const { return static_cast<bool>(gradient_); }
  bool has_hessian() const { return static_cast<bool>(hessian_); }
  bool valid() const { return static_cast<bool>(value_); }

  ScalarField with_domain(BoxDomain domain) const;

 private:
  BoxDomain domain_;
  ScalarFn value_;
  VectorFn gradient_;
  MatrixFn hessian_;
};

/// Worst disagreement of a field's analytic derivatives with finite differences.
struct DerivativeCheck {
  double gradient_rel_error = 0.0;
  double hessian_asymmetry = 0.0;
  double hessian_error = 0.0;
};
DerivativeCheck check_derivatives(const ScalarField& f,
                                  const std::vector<Vector>& points);

/// Smooth symmetric invertible matrix field G(x).
class MetricField {
 public:
  MetricField() = default;
  MetricField(BoxDomain domain, MatrixFn eval);

  static MetricField constant(const Matrix& G, BoxDomain domain);
  /// G(x) = Hessian of K.
  static MetricField hessian_of(const ScalarField& K);

  int dim() const { return domain_.dim(); }
  const BoxDomain& domain() const { return domain_; }
  Matrix operator()(const Vector& x) const { return eval_(x); }
  bool valid() const { return static_cast<bool>(eval_); }

  struct Check {
    double max_asymmetry = 0.0;
    double min_abs_det = 0.0;
    bool ok = false;
  };
  Check check(const std::vector<Vector>& points, double det_floor = 1e-12) const;

 private:
  BoxDomain domain_;
  MatrixFn eval_;
};

/// Diagonal matrix with entries in {+1, -1}.
class SignatureMatrix {
 public:
  SignatureMatrix() = default;
  explicit SignatureMatrix(std::vector<int> diag);

  static SignatureMatrix identity(int m);
  static SignatureMatrix negative_identity(int m);

  int size() const { return static_cast<int>(diag_.size()); }
  const std::vector<int>& diag() const { return diag_; }
  Matrix matrix() const;
  bool is_identity() const;
  bool is_negative_identity() const;
  Vector apply(const Vector& y) const;

 private:
  std::vector<int> diag_;
};

/// x' = F(x,u), y = H(x,u) with dim y = dim u. Jacobians are optional.
struct NonlinearSystem {
  int nx = 0;
  int nu = 0;
  StateInputFn F;
  StateInputFn H;
  StateInputJacobian dF_dx, dF_du, dH_dx, dH_du;
  BoxDomain domain;
  BoxDomain input_domain;

  Matrix jac_F_x(const Vector& x, const Vector& u) const;
  Matrix jac_F_u(const Vector& x, const Vector& u) const;
  Matrix jac_H_x(const Vector& x, const Vector& u) const;
  Matrix jac_H_u(const Vector& x, const Vector& u) const;
};

struct JacobianCheck {
  double max_error = 0.0;
};
JacobianCheck check_jacobians(const NonlinearSystem& sys,
                              const std::vector<Vector>& xs,
                              const std::vector<Vector>& us);

/// x' = f(x) + g(x)u, y = h(x) + k(x)u.
struct AffineSystem {
  int nx = 0;
  int nu = 0;
  VectorFn f;
  MatrixFn g;  // nx x nu
  VectorFn h;
  MatrixFn k;  // nu x nu; empty means zero
  MatrixFn df_dx;  // optional
  MatrixFn dh_dx;  // optional
  BoxDomain domain;
  BoxDomain input_domain;

  Matrix jac_f(const Vector& x) const;
  Matrix jac_h(const Vector& x) const;
  /// d g_j / dx for column j.
  Matrix jac_g_column(const Vector& x, int j) const;
  Matrix k_at(const Vector& x) const;

  NonlinearSystem to_nonlinear() const;
};

// Finite differences -------------------------------------------------------

/// Central-difference gradient of a field. Throws kOutsideDomain when a
/// stencil point leaves the field's (closed) domain.
Vector finite_difference_gradient(const ScalarField& f, const Vector& x,
                                  double h);
Vector finite_difference_gradient(const ScalarFn& f, const Vector& x, double h);

/// Central-difference Jacobian, one column per coordinate of x.
Matrix finite_difference_jacobian(const VectorFn& F, const Vector& x, double h);
Matrix finite_difference_jacobian(const VectorFn& F, const Vector& x,
                                  double h, const BoxDomain& domain);
/// Step chosen per coordinate by default_fd_step.
Matrix finite_difference_jacobian(const VectorFn& F, const Vector& x);

/// Central-difference Hessian from values only.
Matrix finite_difference_hessian(const ScalarFn& f, const Vector& x, double h);

/// max |M - M^T|.
double symmetry_residual(const Matrix& M);

double max_abs(const Matrix& M);

/// "(x1, x2, ...)" for error messages.
std::string format_point(const Vector& x);

}  // namespace recipkit
