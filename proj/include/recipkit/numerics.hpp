#pragma once

#include <functional>
#include <vector>

#include "recipkit/core_types.hpp"

namespace recipkit {

/// Gauss-Legendre nodes and weights on [0, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre_unit(int order);

struct QuadratureOptions {
  int order = 32;
  double tol = 1e-8;
  int max_panels = 1 << 12;
};

/// Composite Gauss-Legendre of a vector-valued integrand over [a, b]; panel
/// count doubles until successive estimates differ by less than tol.
Vector integrate(const std::function<Vector(double)>& fn, double a, double b,
                 int out_dim, const QuadratureOptions& opts = {});
double integrate_scalar(const std::function<double(double)>& fn, double a,
                        double b, const QuadratureOptions& opts = {});

/// exp(A) by scaling and squaring with a degree-7 Pade approximant.
Matrix expm(const Matrix& A);

/// Symmetric part (M + M^T)/2.
Matrix sym(const Matrix& M);
double min_eigenvalue_sym(const Matrix& S);
double max_eigenvalue_sym(const Matrix& S);

/// Square root and inverse square root of a symmetric positive definite matrix.
Matrix spd_sqrt(const Matrix& S);
Matrix spd_inv_sqrt(const Matrix& S);

/// A # B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}.
Matrix matrix_geometric_mean(const Matrix& A, const Matrix& B);

/// Orthonormal basis of the null space (singular values below `tol`).
Matrix null_space(const Matrix& M, double tol);

/// Spectral abscissa: max real part of the eigenvalues.
double spectral_abscissa(const Matrix& A);

/// Inverse of a square matrix; kSingularMatrix when |det| < det_floor or the
/// LU factor is rank deficient.
Matrix checked_inverse(const Matrix& M, double det_floor = 1e-12,
                       const char* what = "matrix");

}  // namespace recipkit
