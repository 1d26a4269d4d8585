#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "recipkit/core_types.hpp"
#include "recipkit/legendre.hpp"
#include "recipkit/linear_analysis.hpp"
#include "recipkit/nonlinear_reciprocity.hpp"

// Simulation of pseudo-gradient and port-Hamiltonian systems, dissipation monitors and
// the structural checks tying the two representations together.

namespace recipkit::dynamics {

using InputSignal = std::function<Vector(double)>;

InputSignal zero_input(int m);
InputSignal constant_input(const Vector& u);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  std::vector<Vector> outputs;
  std::map<std::string, std::vector<double>> monitors;  // "supply", "storage", ...
  InputSignal input;  // the signal the trajectory was driven by, when known

  size_t size() const { return times.size(); }
  /// Throws kInvalidArgument on unequal lengths or non-increasing times.
  void validate() const;
  /// Input at t: the stored signal, else linear interpolation of `inputs`.
  Vector input_at(double t) const;
};

/// Adds (or replaces) the "storage" monitor with S evaluated at every state.
void attach_storage(Trajectory& traj, const ScalarField& S);

struct SimOptions {
  double step = 1e-3;
  double local_tol = 0.0;   // step-doubling error bound per step; 0 disables halving
  int max_halvings = 10;
  double newton_tol = 1e-13;
  int max_newton = 50;
};

/// G(x) x' = -dV/dx(x,u), sigma y = -dV/du(x,u). V lives on the (x,u) box.
struct PseudoGradientSystem {
  int nx = 0;
  int nu = 0;
  MetricField G;
  ScalarField V;
  SignatureMatrix sigma;

  Vector dV_dx(const Vector& x, const Vector& u) const;
  Vector dV_du(const Vector& x, const Vector& u) const;
  Vector rhs(const Vector& x, const Vector& u) const;
  Vector output(const Vector& x, const Vector& u) const;
  const BoxDomain& domain() const { return G.domain(); }
};

/// Pseudo-gradient system with G = Hessian of K. When built from an affine potential
/// V = P(x) - sum_j C_j(x) u_j, P and C are kept for the specialised checks; `g` is set
/// when C_j(x) = g_j^T x.
struct HessianPseudoGradientSystem {
  int nx = 0;
  int nu = 0;
  ScalarField K;
  ScalarField V;
  SignatureMatrix sigma;
  ScalarField P;
  std::vector<ScalarField> C;
  Matrix g;
  BoxDomain input_domain;

  bool affine_potential() const { return P.valid(); }
  const BoxDomain& domain() const { return K.domain(); }
  MetricField metric() const { return MetricField::hessian_of(K); }
  PseudoGradientSystem pseudo_gradient() const;
  NonlinearSystem to_nonlinear() const;
  /// x' = f(x) + g(x)u with f = -G^{-1} dP/dx, g = G^{-1}[grad C_j], y = sigma C(x).
  AffineSystem to_affine() const;
  /// Hessian of V in (x,u).
  Matrix V_hessian(const Vector& x, const Vector& u) const;
};

HessianPseudoGradientSystem make_hessian_system(const ScalarField& K, const ScalarField& V,
                                                const SignatureMatrix& sigma,
                                                const BoxDomain& input_domain);
/// V = P(x) - x^T g u, y = sigma g^T x.
HessianPseudoGradientSystem make_affine_hessian_system(const ScalarField& K, const ScalarField& P,
                                                       const Matrix& g,
                                                       const SignatureMatrix& sigma,
                                                       const BoxDomain& input_domain = {});
/// V = P(x) - sum_j C_j(x) u_j.
HessianPseudoGradientSystem make_affine_hessian_system(const ScalarField& K, const ScalarField& P,
                                                       const std::vector<ScalarField>& C,
                                                       const SignatureMatrix& sigma,
                                                       const BoxDomain& input_domain = {});

/// z' = J(z) grad H(z) - R(grad H(z)) + g(z) u, y = g(z)^T grad H(z).
struct PortHamiltonianSystem {
  int n = 0;
  int m = 0;
  MatrixFn J;
  VectorFn R;  // on co-energy e = grad H(z); empty means lossless
  ScalarField H;
  MatrixFn g;

  const BoxDomain& domain() const { return H.domain(); }
  Vector rhs(const Vector& z, const Vector& u) const;
  Vector output(const Vector& z) const;

  struct Check {
    double max_skew = 0.0;         // max |J + J^T|
    double min_dissipation = 0.0;  // min e^T R(e)
    bool ok = false;
  };
  Check check(const std::vector<Vector>& samples) const;
};

/// Implicit midpoint on the mass-matrix form, Newton inner solve. Throws kOutsideDomain,
/// kNotConverged or kSingularMatrix.
Trajectory simulate_pseudo_gradient(const PseudoGradientSystem& sys, const Vector& x0,
                                    const InputSignal& u, double t0, double t1,
                                    const SimOptions& opts = {});
Trajectory simulate_pseudo_gradient(const HessianPseudoGradientSystem& sys, const Vector& x0,
                                    const InputSignal& u, double t0, double t1,
                                    const SimOptions& opts = {});

/// x' = A x + B u, y = C x + D u by the implicit midpoint (trapezoid) rule.
Trajectory simulate_linear(const linear::LinearSystem& sys, const Vector& x0, const InputSignal& u,
                           double t0, double t1, const SimOptions& opts = {});

/// x' = f(x) + g(x)u by classical RK4 with the fixed step `opts.step` (halving as for the
/// other integrators when local_tol > 0).
Trajectory simulate_affine(const AffineSystem& sys, const Vector& x0, const InputSignal& u,
                           double t0, double t1, const SimOptions& opts = {});

/// Average-vector-field (discrete gradient) step: symmetric, second order, equal to
/// implicit midpoint for quadratic H, and H(z_{k+1}) - H(z_k) = h gradbar^T (J gradbar - R + g u)
/// so lossless systems conserve H up to the Newton tolerance. Adds a "storage" monitor = H.
Trajectory simulate_port_hamiltonian(const PortHamiltonianSystem& sys, const Vector& z0,
                                     const InputSignal& u, double t0, double t1,
                                     const SimOptions& opts = {});

struct DissipationResult {
  double max_violation = 0.0;  // max_k S(x_{k+1}) - S(x_k) - trapezoid of u^T y
  double supply_scale = 1.0;   // max(1, sum_k |supply integral over step k|)
  bool passive_along = false;  // violation <= tol * dt on every step
};

DissipationResult dissipation_monitor(const Trajectory& traj, const ScalarField& S,
                                      double tol = 1e-6);

// Port-Hamiltonian to Hessian pseudo-gradient -----------------------------------

struct PhSplit {
  std::vector<int> idx1;  // z1 coordinates
  std::vector<int> idx2;  // z2 coordinates
  ScalarField H1;         // on z1
  ScalarField H2;         // on z2
  ScalarField P1;         // Rayleigh potential on x1; R1 = grad P1
  ScalarField P2;         // on x2; R2 = -grad P2
  Matrix Pc;              // empty: read from J
  Matrix g1;              // empty: read from g
};

struct AssumptionReport {
  bool I = false;    // J, g constant; J = [[0,-Pc],[Pc^T,0]], g = [g1;0]
  bool II = false;   // H = H1(z1) + H2(z2)
  bool III = false;  // R = (grad P1, -grad P2)
  bool IV = false;   // H1, H2 bounded below (sampled)
  double residual_I = 0.0;
  double residual_II = 0.0;
  double residual_III = 0.0;
  double min_H1 = 0.0;
  double min_H2 = 0.0;
  std::string caveat = "bounded below is checked on sampled points of the box only";
  bool all() const { return I && II && III && IV; }
};

AssumptionReport check_ph_assumptions(const PortHamiltonianSystem& sys, const PhSplit& split,
                                      double tol = 1e-8, int samples = 100);

struct PhConversion {
  HessianPseudoGradientSystem system;  // in x = (x1, x2)
  ScalarField storage;                 // H1(grad H1*(x1)) + H2(grad H2*(x2))
  std::vector<int> order;              // x coordinate i is z coordinate order[i]
  legendre::LegendrePair pair1, pair2;
  AssumptionReport report;

  Vector to_coenergy(const Vector& z) const;  // x = grad H(z), reordered
  Vector to_energy(const Vector& x) const;    // z = grad H*(x), original order
};

/// Throws kPreconditionFailed naming the first failed assumption.
PhConversion ph_to_hessian_pseudo_gradient(const PortHamiltonianSystem& sys, const PhSplit& split,
                                           double tol = 1e-8);

// Structure checks ---------------------------------------------------------------

struct PassiveStructureResult {
  bool g2_zero = false;
  bool sign_conditions = false;
  double max_g2 = 0.0;
  double min_sign1 = 0.0;  // min x1^T dP/dx1(x1,0)
  double max_sign2 = 0.0;  // max x2^T dP/dx2(0,x2)
  double split_residual = 0.0;
};

/// K = S1(x1) - S2(x2) with x1 = first idx1.size() coordinates. Requires the affine form.
PassiveStructureResult check_passive_hessian_structure(const HessianPseudoGradientSystem& sys,
                                                       const ScalarField& S1,
                                                       const ScalarField& S2, double tol = 1e-8,
                                                       int samples = 200);

struct RelaxationCertificate {
  bool relaxation = false;
  ScalarField storage;           // K*(grad K(x)) = x^T grad K(x) - K(x)
  double min_condition = 0.0;    // min of the sampled relaxation inequality
  double min_xdP = 0.0;          // affine form: min x^T grad P
  double max_euler_gap = 0.0;    // affine form: max |C_j - x^T grad C_j|
  double storage_floor = 0.0;    // min S(x) - S(0)
  std::string condition;         // which inequality was sampled
};

/// sigma = I: x^T dV/dx - u^T dV/du >= 0; sigma = -I: x^T dV/dx + u^T dV/du >= 0.
/// Throws kPreconditionFailed when Hessian K is not positive definite at a sample.
RelaxationCertificate certify_relaxation(const HessianPseudoGradientSystem& sys,
                                         const nonlinear::SampleSet& samples,
                                         double tol = 1e-10);
RelaxationCertificate certify_relaxation(const HessianPseudoGradientSystem& sys,
                                         double tol = 1e-10, int samples = 200);

struct MonotoneClassification {
  bool cyclically_monotone = false;  // V jointly convex
  bool monotone = false;             // convex in x, concave in u
  double min_joint = 0.0;
  double min_xx = 0.0;
  double max_uu = 0.0;
  std::string z_form = "z' = -dV/dx(grad K*(z), u), sigma y = -dV/du(grad K*(z), u), Hamiltonian K*";
};

MonotoneClassification classify_monotone_ph(const HessianPseudoGradientSystem& sys,
                                            const nonlinear::SampleSet& samples,
                                            double tol = 1e-10);

struct IncrementalPassivityResult {
  double max_violation = 0.0;
  bool holds = false;
};

/// Trajectories of the x-form; grad K*(z) = x and z' = -dV/dx(x,u).
/// Throws kPreconditionFailed when the system is not classified monotone.
IncrementalPassivityResult incremental_passivity_check(
    const HessianPseudoGradientSystem& sys,
    const std::vector<std::pair<Trajectory, Trajectory>>& pairs, double tol = 1e-8);

}  // namespace recipkit::dynamics
