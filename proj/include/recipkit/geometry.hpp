#pragma once

#include <functional>
#include <string>
#include <vector>

#include "recipkit/core_types.hpp"
#include "recipkit/dynamics.hpp"

// Levi-Civita connections of metric fields, flatness of Hessian metrics, and the
// variational / dual variational systems along a nominal trajectory.

namespace recipkit::geometry {

/// gamma[k](i, j) = Gamma^k_ij.
using Christoffel = std::vector<Matrix>;

struct Connection {
  int dim = 0;
  std::function<Christoffel(const Vector&)> gamma;

  Christoffel operator()(const Vector& x) const { return gamma(x); }
};

/// Partials of G by central differences. Throws kSingularMatrix when G(x) is singular.
Christoffel levi_civita(const MetricField& G, const Vector& x);
/// 1/2 (Hessian K)^{-1} times the third partials of K (central differences, h = 1e-4).
Christoffel hessian_christoffel(const ScalarField& K, const Vector& x);

Connection levi_civita_connection(const MetricField& G);
Connection hessian_connection(const ScalarField& K);

/// max |Gamma^k_ij - Gamma^k_ji| over samples.
double torsion(const Connection& c, const std::vector<Vector>& samples);
double max_symbol(const Christoffel& g);
double max_gap(const Christoffel& a, const Christoffel& b);

/// d^3 K / dx_l dx_i dx_j as T[l](i, j).
std::vector<Matrix> third_derivatives(const ScalarField& K, const Vector& x, double h = 1e-4);

struct FlatnessResult {
  bool flat = false;
  double max_third = 0.0;   // largest sampled third partial
  double max_gamma = 0.0;   // largest sampled Christoffel symbol
  bool consistent = false;  // flat iff max_gamma <= tol
};

FlatnessResult flatness_check(const ScalarField& K, const std::vector<Vector>& samples,
                              double tol = 1e-6);

// Variational systems ---------------------------------------------------------------

/// Nominal (x(t), u(t)): cubic Hermite through the states with slopes f + g u at the nodes.
class NominalPath {
 public:
  NominalPath(const AffineSystem& sys, const dynamics::Trajectory& traj);

  double t0() const { return times_.front(); }
  double t1() const { return times_.back(); }
  Vector x(double t) const;
  Vector xdot(double t) const;  // derivative of the interpolant
  Vector u(double t) const;
  const dynamics::Trajectory& trajectory() const { return traj_; }

 private:
  size_t segment(double t) const;
  dynamics::Trajectory traj_;
  std::vector<double> times_;
  std::vector<Vector> slopes_;
};

/// x' = A(t) x + B(t) u, y = C(t) x.
struct LtvSystem {
  int n = 0;
  int m = 0;
  int p = 0;
  std::function<Matrix(double)> A, B, C;
};

/// A = df/dx + sum_j u_j dg_j/dx, B = g(x), C = dh/dx along the nominal.
/// Requires k = 0; throws kOutsideDomain when the nominal leaves the domain.
LtvSystem variational_system(const AffineSystem& sys, const dynamics::Trajectory& nominal);

enum class DualForm {
  kDrift,     // 2 Gamma^a_bc f_c and 2 Gamma^a_bc g_jc terms
  kVelocity,  // 2 Gamma^a_bc x'_c with x' from the nominal path
};

/// p_b' = (df_a/dx_b + 2 Gamma^a_bc f_c) p_a + sum_j u_j (dg_ja/dx_b + 2 Gamma^a_bc g_jc) p_a
///        + sum_j ud_j dh_j/dx_b,   yd_j = sum_i p_i g_ji.
LtvSystem dual_variational_system(const AffineSystem& sys, const Connection& connection,
                                  const dynamics::Trajectory& nominal,
                                  DualForm form = DualForm::kDrift);

struct LtvTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> outputs;
};

/// Classical RK4 with a fixed step (<= step) on [t0, t1].
LtvTrajectory simulate_ltv(const LtvSystem& sys, const Vector& x0,
                           const dynamics::InputSignal& u, double t0, double t1, double step);

struct Probe {
  std::string name;
  Vector xi;                   // delta x(0)
  dynamics::InputSignal du;    // delta u(t) = ud(t)
};

/// One-hot pulses and sinusoids per input channel, xi = 0, plus one free response per
/// state direction.
std::vector<Probe> default_probes(int n, int m, double t0, double t1);

struct ProbeRecord {
  std::string name;
  std::vector<double> times;
  std::vector<Vector> dy;
  std::vector<Vector> yd;
  std::vector<double> gap;
  double max_gap = 0.0;
  double max_isomorphism_gap = 0.0;  // max |p - G(x) dx|
};

struct ExternalReciprocityResult {
  bool match = false;
  double max_output_gap = 0.0;
  double max_isomorphism_gap = 0.0;
  std::vector<ProbeRecord> probes;
};

struct ExternalOptions {
  double tol = 1e-6;
  double step = 0.0;  // 0: the nominal grid spacing
};

/// Variational from delta x(0) = xi and dual from p(0) = G(x(0)) xi with ud = du, both
/// under the Levi-Civita connection of G.
ExternalReciprocityResult external_reciprocity_test(const AffineSystem& sys, const MetricField& G,
                                                    const dynamics::Trajectory& nominal,
                                                    const std::vector<Probe>& probes,
                                                    const ExternalOptions& opts = {});

}  // namespace recipkit::geometry
