#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "recipkit/core_types.hpp"

// Reciprocity, passivity and compatible storage for linear systems
//   x' = A x + B u,   y = C x + D u.

namespace recipkit::linear {

struct LinearSystem {
  Matrix A, B, C, D;

  LinearSystem() = default;
  LinearSystem(Matrix A_, Matrix B_, Matrix C_, Matrix D_);

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  /// Throws kDimensionMismatch / kInvalidArgument on inconsistent or non-finite data.
  void validate() const;
};

/// G x' = -P x + C^T sigma u,  y = C x + D u.
struct LinearPseudoGradientForm {
  Matrix G, P, C, D;
  SignatureMatrix sigma;

  /// Back to state-space form: A = -G^{-1} P, B = G^{-1} C^T sigma.
  LinearSystem to_state_space() const;
};

struct ReciprocityResult {
  bool reciprocal = false;
  double residual = 0.0;
};

ReciprocityResult check_linear_reciprocity(const LinearSystem& sys, const Matrix& G,
                                           const SignatureMatrix& sigma,
                                           double tol = 1e-10);

LinearPseudoGradientForm to_pseudo_gradient(const LinearSystem& sys, const Matrix& G,
                                            const SignatureMatrix& sigma,
                                            double tol = 1e-10);

/// Solves G [B AB ... A^{n-1}B] = [C^T sigma, A^T C^T sigma, ...] for G.
/// Requires a controllable pair (A, B); throws kCheckFailed when the solution is
/// not symmetric invertible, i.e. the system is not reciprocal for sigma.
Matrix solve_dual_isomorphism(const LinearSystem& sys, const SignatureMatrix& sigma);

/// (A^T, C^T sigma, B^T, D^T sigma).
LinearSystem dual_system(const LinearSystem& sys, const SignatureMatrix& sigma);

/// W(t) = C exp(At) B.
Matrix impulse_response(const LinearSystem& sys, double t);

struct ImpulseSymmetryResult {
  bool symmetric = false;
  double max_residual = 0.0;
};

ImpulseSymmetryResult impulse_response_symmetry(const LinearSystem& sys,
                                                const SignatureMatrix& sigma,
                                                const std::vector<double>& times,
                                                double tol = 1e-8);

/// An input applied on the past, u(s) for s in (-duration, 0].
struct PastInput {
  std::function<Vector(double)> signal;
  double duration = std::numeric_limits<double>::infinity();

  /// u(s) = exp(rate * s) e_channel, on (-inf, 0].
  static PastInput exponential(int m, int channel, double rate);
};

struct HankelOptions {
  double hurwitz_margin = 1e-3;
  double tol = 1e-10;
  double max_horizon = 1e6;
};

struct HankelRecovery {
  Matrix G;
  double horizon = 0.0;
  std::vector<Vector> initial_states;  // x(0) produced by each past input
};

/// x(0) = int_0^horizon exp(At) B u(-t) dt.
Vector state_from_past_input(const LinearSystem& sys, const PastInput& input,
                             double horizon, double tol = 1e-12);

/// int_0^horizon (sigma y(t))^T u(-t) dt with u = 0 on t > 0 and y = C exp(At) x0.
double hankel_quadratic_form(const LinearSystem& sys, const SignatureMatrix& sigma,
                             const Vector& x0, const PastInput& input,
                             double horizon, double tol = 1e-12);

/// Rebuilds G from the Hankel quadratic form by polarization over the states
/// reached by `past_inputs` (n of them, linearly independent).
HankelRecovery recover_metric_hankel(const LinearSystem& sys,
                                     const SignatureMatrix& sigma, double horizon,
                                     const std::vector<PastInput>& past_inputs,
                                     const HankelOptions& opts = {});

struct LmiReport {
  Matrix Pi;
  double min_eigenvalue = 0.0;
  double q_min_eigenvalue = 0.0;
  bool passive = false;
  std::vector<Vector> kernel_basis;  // basis of ker Q
};

/// Pi = [[-QA - A^T Q, -QB + C^T], [-B^T Q + C, D + D^T]].
LmiReport lmi_residual(const LinearSystem& sys, const Matrix& Q, double tol = 1e-9);

struct KernelInvariance {
  bool A_invariant = false;
  bool in_ker_C = false;
  int kernel_dimension = 0;
};

KernelInvariance kernel_invariance_check(const LinearSystem& sys, const Matrix& Q,
                                         double lmi_tol = 1e-9);

struct MonotoneImage {
  Matrix M1, M2;
  bool monotone = false;
  double min_eigenvalue = 0.0;
};

MonotoneImage build_monotone_image(const LinearSystem& sys, const Matrix& Q,
                                   double tol = 1e-9);

struct CompatibilityOptions {
  int max_iter = 100;
  double tol = 1e-10;
  double lmi_tol = 1e-8;
  double reciprocity_tol = 1e-9;
};

struct CompatibilityResult {
  Matrix Q;
  int iterations = 0;
  double compatibility_residual = 0.0;  // max |Q - G Q^{-1} G|
  double lmi_min_eigenvalue = 0.0;
};

/// Q_{k+1} = Q_k # (G Q_k^{-1} G) until Q = G Q^{-1} G, without LMI checks.
CompatibilityResult compatibility_iteration(const Matrix& G, const Matrix& Q0,
                                            int max_iter = 100, double tol = 1e-10);

/// Compatible storage starting from a passivity certificate Q0 > 0.
CompatibilityResult compatible_storage_fixed_point(const LinearSystem& sys,
                                                   const Matrix& G,
                                                   const SignatureMatrix& sigma,
                                                   const Matrix& Q0,
                                                   const CompatibilityOptions& opts = {});

/// Port-Hamiltonian normal form in the coordinates that split Q and G as
/// Q = diag(Q1, Q2), G = diag(Q1, -Q2).
struct SplitPortHamiltonian {
  int k = 0;                 // size of the first block
  Matrix basis;              // x = basis * xs (split coordinates xs)
  Matrix to_energy;          // z = to_energy * x
  Matrix from_energy;        // x = from_energy * z
  Matrix Q1, Q2;
  Matrix P1, P2, Pc;
  Matrix J;                  // [[0, -Pc], [Pc^T, 0]]
  Matrix R;                  // diag(P1, -P2)
  Matrix C1, D;

  /// z' = (J - R) diag(Q1^{-1}, Q2^{-1}) z + [C1^T; 0] u.
  Matrix energy_A() const;
  Matrix energy_B() const;
  Matrix energy_C() const;
  LinearSystem energy_system() const;
};

SplitPortHamiltonian split_port_hamiltonian_form(const LinearPseudoGradientForm& pg,
                                                 const Matrix& Q, double tol = 1e-8);

}  // namespace recipkit::linear
