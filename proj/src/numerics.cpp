#include "recipkit/numerics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace recipkit {

const GaussRule& gauss_legendre_unit(int order) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  require(order >= 1, ErrorCode::kInvalidArgument, "quadrature order must be positive");
  // Golub-Welsch: eigenvalues of the Jacobi matrix of the Legendre recurrence.
  Matrix T = Matrix::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    T(k - 1, k) = b;
    T(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(T);
  GaussRule rule;
  rule.nodes.resize(static_cast<size_t>(order));
  rule.weights.resize(static_cast<size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    rule.nodes[static_cast<size_t>(k)] = 0.5 * (es.eigenvalues()[k] + 1.0);
    rule.weights[static_cast<size_t>(k)] = v0 * v0;  // 2 v0^2 on [-1,1], halved
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

namespace {

Vector composite(const std::function<Vector(double)>& fn, double a, double b,
                 int out_dim, int panels, const GaussRule& rule) {
  Vector sum = Vector::Zero(out_dim);
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double left = a + p * w;
    for (size_t k = 0; k < rule.nodes.size(); ++k) {
      sum += (rule.weights[k] * w) * fn(left + rule.nodes[k] * w);
    }
  }
  return sum;
}

}  // namespace

Vector integrate(const std::function<Vector(double)>& fn, double a, double b,
                 int out_dim, const QuadratureOptions& opts) {
  if (a == b) return Vector::Zero(out_dim);
  const GaussRule& rule = gauss_legendre_unit(opts.order);
  int panels = 1;
  Vector prev = composite(fn, a, b, out_dim, panels, rule);
  while (panels < opts.max_panels) {
    panels *= 2;
    Vector next = composite(fn, a, b, out_dim, panels, rule);
    const double diff = out_dim ? (next - prev).cwiseAbs().maxCoeff() : 0.0;
    const double scale = out_dim ? std::max(1.0, next.cwiseAbs().maxCoeff()) : 1.0;
    if (diff <= opts.tol * scale) return next;
    prev = std::move(next);
  }
  fail(ErrorCode::kNotConverged, "adaptive quadrature did not converge");
}

double integrate_scalar(const std::function<double(double)>& fn, double a,
                        double b, const QuadratureOptions& opts) {
  return integrate([&fn](double t) { return Vector::Constant(1, fn(t)); }, a, b, 1,
                   opts)[0];
}

Matrix expm(const Matrix& A) {
  require(A.rows() == A.cols(), ErrorCode::kDimensionMismatch,
          "matrix exponential needs a square matrix");
  const Eigen::Index n = A.rows();
  if (n == 0) return A;
  constexpr double kTheta7 = 0.9504178996162932;
  constexpr double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                          25200.0,    1512.0,    56.0,      1.0};
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > kTheta7) s = static_cast<int>(std::ceil(std::log2(norm1 / kTheta7)));
  const Matrix As = A / std::ldexp(1.0, s);
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = As * As;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  const Matrix U = As * (b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  const Matrix V = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
  Matrix R = (V - U).partialPivLu().solve(V + U);
  for (int k = 0; k < s; ++k) R = R * R;
  return R;
}

Matrix sym(const Matrix& M) { return 0.5 * (M + M.transpose()); }

double min_eigenvalue_sym(const Matrix& S) {
  if (S.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue_sym(const Matrix& S) {
  if (S.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

Matrix spd_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S));
  require(es.eigenvalues().minCoeff() > 0, ErrorCode::kPreconditionFailed,
          "matrix square root requires a positive definite argument");
  return es.operatorSqrt();
}

Matrix spd_inv_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(S));
  require(es.eigenvalues().minCoeff() > 0, ErrorCode::kPreconditionFailed,
          "inverse square root requires a positive definite argument");
  return es.operatorInverseSqrt();
}

Matrix matrix_geometric_mean(const Matrix& A, const Matrix& B) {
  require(A.rows() == B.rows() && A.cols() == B.cols() && A.rows() == A.cols(),
          ErrorCode::kDimensionMismatch, "geometric mean needs equal square matrices");
  const Matrix Ah = spd_sqrt(A);
  const Matrix Aih = spd_inv_sqrt(A);
  return sym(Ah * spd_sqrt(sym(Aih * B * Aih)) * Ah);
}

Matrix null_space(const Matrix& M, double tol) {
  const Eigen::Index n = M.cols();
  if (M.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > tol) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

double spectral_abscissa(const Matrix& A) {
  if (A.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

Matrix checked_inverse(const Matrix& M, double det_floor, const char* what) {
  require(M.rows() == M.cols(), ErrorCode::kDimensionMismatch,
          std::string(what) + " must be square");
  Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible() || std::abs(lu.determinant()) < det_floor) {
    fail(ErrorCode::kSingularMatrix, std::string(what) + " is singular");
  }
  return lu.inverse();
}

}  // namespace recipkit
