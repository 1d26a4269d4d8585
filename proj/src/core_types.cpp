#include "recipkit/core_types.hpp"
#include "recipkit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace recipkit {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kOutsideDomain: return "outside-domain";
    case ErrorCode::kSingularMatrix: return "singular-matrix";
    case ErrorCode::kNotConverged: return "not-converged";
    case ErrorCode::kPreconditionFailed: return "precondition-failed";
    case ErrorCode::kCheckFailed: return "check-failed";
  }
  return "unknown";
}

std::string format_point(const Vector& x) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

namespace {

constexpr int kPrimes[] = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,
    47,  53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107,
    109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181,
    191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263,
    269, 271, 277, 281, 283, 293, 307, 311, 313, 317, 331, 337, 347, 349,
    353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419, 421, 431, 433,
    439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521,
    523, 541};

double radical_inverse(int base, long index) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace

// BoxDomain ----------------------------------------------------------------

BoxDomain::BoxDomain(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  require(lower_.size() == upper_.size(), ErrorCode::kDimensionMismatch,
          "box bounds have different lengths");
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    require(std::isfinite(lower_[i]) && std::isfinite(upper_[i]) &&
                lower_[i] < upper_[i],
            ErrorCode::kInvalidArgument,
            "box requires finite lower[i] < upper[i] on every axis");
  }
}

BoxDomain BoxDomain::cube(int dim, double lo, double hi) {
  return BoxDomain(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool BoxDomain::contains(const Vector& x, double slack) const {
  if (x.size() != lower_.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower_[i] - slack && x[i] <= upper_[i] + slack)) return false;
  }
  return true;
}

bool BoxDomain::contains_strictly(const Vector& x) const {
  if (x.size() != lower_.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] > lower_[i] && x[i] < upper_[i])) return false;
  }
  return true;
}

std::vector<Vector> BoxDomain::grid(int per_axis) const {
  require(per_axis > 0, ErrorCode::kInvalidArgument, "grid resolution must be positive");
  const int n = dim();
  long total = 1;
  for (int i = 0; i < n; ++i) total *= per_axis;
  std::vector<Vector> pts;
  pts.reserve(static_cast<size_t>(total));
  std::vector<int> idx(static_cast<size_t>(n), 0);
  for (long c = 0; c < total; ++c) {
    Vector p(n);
    for (int i = 0; i < n; ++i) {
      p[i] = lower_[i] + (idx[static_cast<size_t>(i)] + 0.5) / per_axis * (upper_[i] - lower_[i]);
    }
    pts.push_back(std::move(p));
    for (int i = 0; i < n; ++i) {
      if (++idx[static_cast<size_t>(i)] < per_axis) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return pts;
}

std::vector<Vector> BoxDomain::halton(int count, int skip) const {
  const int n = dim();
  require(n <= static_cast<int>(std::size(kPrimes)), ErrorCode::kInvalidArgument,
          "halton sampling supports at most 100 dimensions");
  std::vector<Vector> pts;
  pts.reserve(static_cast<size_t>(count));
  for (int c = 0; c < count; ++c) {
    Vector p(n);
    for (int i = 0; i < n; ++i) {
      const double h = radical_inverse(kPrimes[i], c + 1 + skip);
      p[i] = lower_[i] + h * (upper_[i] - lower_[i]);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

std::vector<Vector> BoxDomain::uniform(int count, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = dim();
  std::vector<Vector> pts;
  pts.reserve(static_cast<size_t>(count));
  for (int c = 0; c < count; ++c) {
    Vector p(n);
    for (int i = 0; i < n; ++i) {
      const double s = std::clamp(unit(rng), 1e-9, 1.0 - 1e-9);
      p[i] = lower_[i] + s * (upper_[i] - lower_[i]);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

BoxDomain BoxDomain::scaled_about(const Vector& anchor, double factor) const {
  require(factor > 0, ErrorCode::kInvalidArgument, "scale factor must be positive");
  return BoxDomain(anchor + factor * (lower_ - anchor),
                   anchor + factor * (upper_ - anchor));
}

BoxDomain BoxDomain::product(const BoxDomain& other) const {
  Vector lo(dim() + other.dim()), hi(dim() + other.dim());
  lo << lower_, other.lower_;
  hi << upper_, other.upper_;
  return BoxDomain(lo, hi);
}

BoxDomain BoxDomain::select(const std::vector<int>& indices) const {
  Vector lo(static_cast<Eigen::Index>(indices.size()));
  Vector hi(lo.size());
  for (size_t i = 0; i < indices.size(); ++i) {
    lo[static_cast<Eigen::Index>(i)] = lower_[indices[i]];
    hi[static_cast<Eigen::Index>(i)] = upper_[indices[i]];
  }
  return BoxDomain(lo, hi);
}

// Finite differences -------------------------------------------------------

double default_fd_step(double xi) { return std::max(1e-6, 1e-6 * std::abs(xi)); }

Vector finite_difference_gradient(const ScalarFn& f, const Vector& x, double h) {
  require(h > 0, ErrorCode::kInvalidArgument, "step must be positive");
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

Vector finite_difference_gradient(const ScalarField& f, const Vector& x, double h) {
  require(x.size() == f.dim(), ErrorCode::kDimensionMismatch,
          "point dimension does not match field");
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    if (!f.domain().contains(xp) || !f.domain().contains(xm)) {
      fail(ErrorCode::kOutsideDomain,
           "finite-difference stencil leaves the domain at " + format_point(x));
    }
  }
  return finite_difference_gradient([&f](const Vector& p) { return f.value(p); }, x, h);
}

Matrix finite_difference_jacobian(const VectorFn& F, const Vector& x, double h) {
  require(h > 0, ErrorCode::kInvalidArgument, "step must be positive");
  Matrix J;
  Vector xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    const Vector col = (F(xp) - F(xm)) / (2.0 * h);
    if (i == 0) J.resize(col.size(), x.size());
    J.col(i) = col;
    xp[i] = x[i];
    xm[i] = x[i];
  }
  if (x.size() == 0) J.resize(F(x).size(), 0);
  return J;
}

Matrix finite_difference_jacobian(const VectorFn& F, const Vector& x, double h,
                                  const BoxDomain& domain) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    if (!domain.contains(xp) || !domain.contains(xm)) {
      fail(ErrorCode::kOutsideDomain,
           "finite-difference stencil leaves the domain at " + format_point(x));
    }
  }
  return finite_difference_jacobian(F, x, h);
}

Matrix finite_difference_jacobian(const VectorFn& F, const Vector& x) {
  Matrix J;
  Vector xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = default_fd_step(x[i]);
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    const Vector col = (F(xp) - F(xm)) / (2.0 * h);
    if (i == 0) J.resize(col.size(), x.size());
    J.col(i) = col;
    xp[i] = x[i];
    xm[i] = x[i];
  }
  if (x.size() == 0) J.resize(F(x).size(), 0);
  return J;
}

Matrix finite_difference_hessian(const ScalarFn& f, const Vector& x, double h) {
  const Eigen::Index n = x.size();
  Matrix Hm(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector p = x, m = x;
    p[i] += h;
    m[i] -= h;
    Hm(i, i) = (f(p) - 2.0 * f0 + f(m)) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Vector pp = x, pm = x, mp = x, mm = x;
      pp[i] += h; pp[j] += h;
      pm[i] += h; pm[j] -= h;
      mp[i] -= h; mp[j] += h;
      mm[i] -= h; mm[j] -= h;
      Hm(i, j) = Hm(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return Hm;
}

double symmetry_residual(const Matrix& M) {
  require(M.rows() == M.cols(), ErrorCode::kDimensionMismatch,
          "symmetry residual needs a square matrix");
  if (M.size() == 0) return 0.0;
  return (M - M.transpose()).cwiseAbs().maxCoeff();
}

double max_abs(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

// ScalarField ----------------------------------------------------------------

ScalarField::ScalarField(BoxDomain domain, ScalarFn value, VectorFn gradient,
                         MatrixFn hessian)
    : domain_(std::move(domain)),
      value_(std::move(value)),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)) {
  require(static_cast<bool>(value_), ErrorCode::kInvalidArgument,
          "scalar field needs a value map");
}

Vector ScalarField::gradient(const Vector& x) const {
  if (gradient_) return gradient_(x);
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = default_fd_step(x[i]);
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (value_(xp) - value_(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

Matrix ScalarField::hessian(const Vector& x) const {
  if (hessian_) return hessian_(x);
  if (gradient_) {
    return sym(finite_difference_jacobian(gradient_, x));
  }
  // Values only: second differences need a larger step than gradients.
  const double h = std::max(1e-4, 1e-4 * x.cwiseAbs().maxCoeff());
  return finite_difference_hessian(value_, x, h);
}

ScalarField ScalarField::with_domain(BoxDomain domain) const {
  require(domain.dim() == dim(), ErrorCode::kDimensionMismatch,
          "replacement domain has a different dimension");
  ScalarField out = *this;
  out.domain_ = std::move(domain);
  return out;
}

DerivativeCheck check_derivatives(const ScalarField& f,
                                  const std::vector<Vector>& points) {
  DerivativeCheck out;
  const ScalarFn value = [&f](const Vector& p) { return f.value(p); };
  for (const auto& x : points) {
    if (f.has_gradient()) {
      const Vector g = f.gradient(x);
      Vector fd(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        fd[i] = (value(xp) - value(xm)) / (2 * h);
      }
      const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
      out.gradient_rel_error =
          std::max(out.gradient_rel_error, (g - fd).cwiseAbs().maxCoeff() / scale);
    }
    if (f.has_hessian()) {
      const Matrix Hm = f.hessian(x);
      out.hessian_asymmetry = std::max(out.hessian_asymmetry, symmetry_residual(Hm));
      const Matrix fd = finite_difference_jacobian(
          [&f](const Vector& p) { return f.gradient(p); }, x);
      const double scale = std::max(1.0, max_abs(Hm));
      out.hessian_error = std::max(out.hessian_error, max_abs(Hm - fd) / scale);
    }
  }
  return out;
}

// MetricField ------------------------------------------------------------------

MetricField::MetricField(BoxDomain domain, MatrixFn eval)
    : domain_(std::move(domain)), eval_(std::move(eval)) {
  require(static_cast<bool>(eval_), ErrorCode::kInvalidArgument,
          "metric field needs an evaluation map");
}

MetricField MetricField::constant(const Matrix& G, BoxDomain domain) {
  require(G.rows() == G.cols() && G.rows() == domain.dim(),
          ErrorCode::kDimensionMismatch, "constant metric does not match domain");
  return MetricField(std::move(domain), [G](const Vector&) { return G; });
}

MetricField MetricField::hessian_of(const ScalarField& K) {
  return MetricField(K.domain(), [K](const Vector& x) { return K.hessian(x); });
}

MetricField::Check MetricField::check(const std::vector<Vector>& points,
                                      double det_floor) const {
  Check c;
  c.min_abs_det = std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    const Matrix G = eval_(x);
    c.max_asymmetry = std::max(c.max_asymmetry, symmetry_residual(G));
    c.min_abs_det = std::min(c.min_abs_det, std::abs(G.determinant()));
  }
  c.ok = c.max_asymmetry <= 1e-10 && c.min_abs_det > det_floor;
  return c;
}

// SignatureMatrix ----------------------------------------------------------------

SignatureMatrix::SignatureMatrix(std::vector<int> diag) : diag_(std::move(diag)) {
  for (int d : diag_) {
    require(d == 1 || d == -1, ErrorCode::kInvalidArgument,
            "signature entries must be +1 or -1");
  }
}

SignatureMatrix SignatureMatrix::identity(int m) {
  return SignatureMatrix(std::vector<int>(static_cast<size_t>(m), 1));
}

SignatureMatrix SignatureMatrix::negative_identity(int m) {
  return SignatureMatrix(std::vector<int>(static_cast<size_t>(m), -1));
}

Matrix SignatureMatrix::matrix() const {
  Matrix S = Matrix::Zero(size(), size());
  for (int i = 0; i < size(); ++i) S(i, i) = diag_[static_cast<size_t>(i)];
  return S;
}

bool SignatureMatrix::is_identity() const {
  return std::all_of(diag_.begin(), diag_.end(), [](int d) { return d == 1; });
}

bool SignatureMatrix::is_negative_identity() const {
  return std::all_of(diag_.begin(), diag_.end(), [](int d) { return d == -1; });
}

Vector SignatureMatrix::apply(const Vector& y) const {
  require(y.size() == size(), ErrorCode::kDimensionMismatch,
          "signature size does not match vector");
  Vector out = y;
  for (int i = 0; i < size(); ++i) out[i] *= diag_[static_cast<size_t>(i)];
  return out;
}

// NonlinearSystem ----------------------------------------------------------------

Matrix NonlinearSystem::jac_F_x(const Vector& x, const Vector& u) const {
  if (dF_dx) return dF_dx(x, u);
  return finite_difference_jacobian([&](const Vector& p) { return F(p, u); }, x);
}

Matrix NonlinearSystem::jac_F_u(const Vector& x, const Vector& u) const {
  if (dF_du) return dF_du(x, u);
  return finite_difference_jacobian([&](const Vector& p) { return F(x, p); }, u);
}

Matrix NonlinearSystem::jac_H_x(const Vector& x, const Vector& u) const {
  if (dH_dx) return dH_dx(x, u);
  return finite_difference_jacobian([&](const Vector& p) { return H(p, u); }, x);
}

Matrix NonlinearSystem::jac_H_u(const Vector& x, const Vector& u) const {
  if (dH_du) return dH_du(x, u);
  return finite_difference_jacobian([&](const Vector& p) { return H(x, p); }, u);
}

JacobianCheck check_jacobians(const NonlinearSystem& sys,
                              const std::vector<Vector>& xs,
                              const std::vector<Vector>& us) {
  require(xs.size() == us.size(), ErrorCode::kDimensionMismatch,
          "state and input sample lists differ in length");
  JacobianCheck c;
  for (size_t i = 0; i < xs.size(); ++i) {
    const Vector& x = xs[i];
    const Vector& u = us[i];
    auto fd_x = [&](const StateInputFn& fn) {
      return finite_difference_jacobian([&](const Vector& p) { return fn(p, u); }, x);
    };
    auto fd_u = [&](const StateInputFn& fn) {
      return finite_difference_jacobian([&](const Vector& p) { return fn(x, p); }, u);
    };
    if (sys.dF_dx) c.max_error = std::max(c.max_error, max_abs(sys.dF_dx(x, u) - fd_x(sys.F)));
    if (sys.dF_du) c.max_error = std::max(c.max_error, max_abs(sys.dF_du(x, u) - fd_u(sys.F)));
    if (sys.dH_dx) c.max_error = std::max(c.max_error, max_abs(sys.dH_dx(x, u) - fd_x(sys.H)));
    if (sys.dH_du) c.max_error = std::max(c.max_error, max_abs(sys.dH_du(x, u) - fd_u(sys.H)));
  }
  return c;
}

// AffineSystem ----------------------------------------------------------------

Matrix AffineSystem::jac_f(const Vector& x) const {
  if (df_dx) return df_dx(x);
  return finite_difference_jacobian(f, x);
}

Matrix AffineSystem::jac_h(const Vector& x) const {
  if (dh_dx) return dh_dx(x);
  return finite_difference_jacobian(h, x);
}

Matrix AffineSystem::jac_g_column(const Vector& x, int j) const {
  return finite_difference_jacobian([&](const Vector& p) -> Vector { return g(p).col(j); }, x);
}

Matrix AffineSystem::k_at(const Vector& x) const {
  if (k) return k(x);
  return Matrix::Zero(nu, nu);
}

NonlinearSystem AffineSystem::to_nonlinear() const {
  NonlinearSystem sys;
  sys.nx = nx;
  sys.nu = nu;
  sys.domain = domain;
  sys.input_domain = input_domain;
  // Copies keep the result independent of this object's lifetime.
  const AffineSystem self = *this;
  sys.F = [self](const Vector& x, const Vector& u) -> Vector {
    return self.f(x) + self.g(x) * u;
  };
  sys.H = [self](const Vector& x, const Vector& u) -> Vector {
    return self.h(x) + self.k_at(x) * u;
  };
  sys.dF_du = [self](const Vector& x, const Vector&) -> Matrix { return self.g(x); };
  sys.dH_du = [self](const Vector& x, const Vector&) -> Matrix { return self.k_at(x); };
  return sys;
}

}  // namespace recipkit
