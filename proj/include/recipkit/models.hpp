#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "recipkit/dynamics.hpp"
#include "recipkit/linear_analysis.hpp"

// Built-in models: RLC circuits in mixed-potential form, the swing equations of a power
// network, nonlinear RC circuits, and small linear fixtures with known answers.

namespace recipkit::models {

/// [[L,0],[0,-Cap]] x' = -dP/dx + g u with x = (I, V), P = P1(I) + P2(V) + I^T Lambda V.
struct BraytonMoserModel {
  Vector L;        // inductances
  Vector Cap;      // capacitances
  ScalarField P1;  // content, on currents
  ScalarField P2;  // on voltages
  Matrix Lambda;   // nI x nV
  BoxDomain domain;

  int n_currents() const { return static_cast<int>(L.size()); }
  int n_voltages() const { return static_cast<int>(Cap.size()); }
  void validate() const;
  ScalarField K() const;  // 1/2 I^T L I - 1/2 V^T Cap V
  ScalarField P() const;
  ScalarField hamiltonian() const;  // on z = (L I, Cap V)
};

/// P1 = sum R_i I_i^2 / 2, P2 = sum Gc_j V_j^2 / 2 on [-bound, bound]^n.
BraytonMoserModel bm_linear(const Vector& L, const Vector& Cap, const Matrix& Lambda,
                            const Vector& R, const Vector& Gc, double bound = 2.0);
/// One inductor and one capacitor with a cubic resistor (R I + r3 I^3) and cubic
/// conductor (G V + g3 V^3): P1 = R I^2/2 + r3 I^4/4, P2 = -(G V^2/2 + g3 V^4/4), Lambda = 1.
BraytonMoserModel bm_default();

/// Optional input term V = P - x^T g u; g defaults to none (nu = 0).
dynamics::HessianPseudoGradientSystem bm_as_pseudo_gradient(const BraytonMoserModel& model,
                                                            const Matrix& g_input = Matrix());
/// z = (L I, Cap V): J = [[0,-Lambda],[Lambda^T,0]], R(e) = (grad P1, -grad P2).
dynamics::PortHamiltonianSystem bm_as_port_hamiltonian(const BraytonMoserModel& model,
                                                       const Matrix& g_input = Matrix());

/// Nodes with masses M, edges with incidence D (nodes x edges) and line constants gamma.
struct SwingModel {
  Vector M;      // diagonal
  Matrix A;      // damping, PSD
  Matrix D;      // n x k incidence
  Vector gamma;  // per edge
  double flow_fraction = 0.9;  // |pi_j| <= flow_fraction * gamma_j
  double omega_bound = 5.0;    // |omega_i| <= omega_bound

  int nodes() const { return static_cast<int>(M.size()); }
  int edges() const { return static_cast<int>(gamma.size()); }
  void validate() const;
  /// Co-energy box (omega, pi) and the matching energy box (p, q).
  BoxDomain coenergy_domain() const;
  BoxDomain energy_domain() const;
  /// (omega, pi) = (M^{-1} p, Gamma sin q) and its inverse.
  Vector to_coenergy(const Vector& z) const;
  Vector to_energy(const Vector& x) const;
  /// 1/2 omega^T M omega - sum gamma_j cos(arcsin(pi_j / gamma_j)).
  ScalarField storage() const;
  /// H2*(pi) = sum pi_j arcsin(pi_j/gamma_j) + gamma_j cos(arcsin(pi_j/gamma_j)).
  ScalarField H2_conjugate() const;
};

/// Two nodes, one edge.
SwingModel swing_default();

dynamics::PortHamiltonianSystem swing_as_port_hamiltonian(const SwingModel& model);
dynamics::HessianPseudoGradientSystem swing_as_hessian_pseudo_gradient(const SwingModel& model);
/// Split for ph_to_hessian_pseudo_gradient: z1 = p, z2 = q.
dynamics::PhSplit swing_split(const SwingModel& model);

/// Conductor I = G(V) with convex potential W_hat, W_hat' = G.
struct EdgeCharacteristic {
  std::string name;
  std::function<double(double)> W;
  std::function<double(double)> G;
  std::function<double(double)> dG;

  static EdgeCharacteristic linear(double conductance);
  static EdgeCharacteristic tanh_conductor();  // G = tanh, W = log cosh
};

/// Capacitor nodes c and terminal nodes t; incidence D = [Dc; Dt].
struct RcCircuitModel {
  Matrix Dc;
  Matrix Dt;
  std::vector<EdgeCharacteristic> edges;
  ScalarField Hcap;          // capacitor energy on charges Q
  double terminal_bound = 1.0;

  int capacitors() const { return static_cast<int>(Dc.rows()); }
  int terminals() const { return static_cast<int>(Dt.rows()); }
  void validate() const;
  /// W(psi) = sum_j W_hat_j((D^T psi)_j) on (psi_c, psi_t).
  ScalarField W(const BoxDomain& psi_c_box) const;
};

/// Two capacitors (H = Q^2/2 + Q^4/12 each) on a path to one terminal, tanh conductors.
RcCircuitModel rc_default();
/// One capacitor H = Q^2/2, one linear conductor G(V) = V, one terminal.
RcCircuitModel rc_scalar_linear();

struct RcRelaxation {
  dynamics::HessianPseudoGradientSystem system;  // state psi_c, input psi_t, sigma = -I
  legendre::LegendrePair pair;                   // (Hcap, Hcap*)
  ScalarField storage;                           // H(grad H*(psi_c))
};

/// Throws kPreconditionFailed when W is not convex or Hessian H is not positive definite.
RcRelaxation rc_as_relaxation(const RcCircuitModel& model);

// Registry ------------------------------------------------------------------------

enum class ModelKind { kLinear, kHessian, kPortHamiltonian, kAffine };

struct ModelEntry {
  std::string name;
  std::string description;
  std::string reference;
  ModelKind kind = ModelKind::kLinear;

  std::optional<linear::LinearSystem> linear;
  Matrix G;  // known metric
  Matrix Q;  // known (compatible) storage, when passive
  SignatureMatrix sigma;
  bool reciprocal = false;
  bool passive = false;
  bool relaxation = false;

  std::function<dynamics::HessianPseudoGradientSystem()> hessian;
  std::function<AffineSystem()> affine;  // kAffine; G then holds a constant metric
  std::function<dynamics::PortHamiltonianSystem()> port_hamiltonian;
  std::function<dynamics::PhSplit()> split;
  std::function<ScalarField()> storage;
  Vector x0;  // default initial state for simulations
};

/// Linear fixtures: scalar-relaxation, gyrator, indefinite-G, relaxation-2x2.
std::vector<ModelEntry> fixture_library();
/// Fixtures plus brayton-moser, swing, swing-ph, rc-relaxation, rc-scalar.
std::vector<ModelEntry> builtin_registry();
/// Throws kInvalidArgument for unknown names.
const ModelEntry& find_model(const std::vector<ModelEntry>& registry, const std::string& name);
std::string kind_name(ModelKind kind);

}  // namespace recipkit::models
