#pragma once

#include <string>
#include <vector>

#include "recipkit/core_types.hpp"

// Integrability (reciprocity) conditions for x' = F(x,u), y = H(x,u) with
// respect to a metric G(x) and a signature sigma, and the potentials they imply.

namespace recipkit::nonlinear {

struct StateInputSample {
  Vector x;
  Vector u;
};
using SampleSet = std::vector<StateInputSample>;

/// Input box of the system, or [-1,1]^nu when none was set.
BoxDomain input_box(const NonlinearSystem& sys);

/// Halton points on the (x,u) box, strictly inside it.
SampleSet default_samples(const NonlinearSystem& sys, int count = 200);

/// dG/dx_i for i = 1..n by central differences.
std::vector<Matrix> metric_derivatives(const MetricField& G, const Vector& x);

/// Results hold on the sampled points only; they are not a proof.
struct ReciprocityReport {
  double residual_state = 0.0;   // d(GF)/dx symmetric (or G dF/dx, Hessian test)
  double residual_output = 0.0;  // sigma dH/du = (dH/du)^T sigma
  double residual_cross = 0.0;   // G dF/du = (dH/dx)^T sigma
  double residual_input_fields = 0.0;  // d(G g_j)/dx symmetric; affine test only
  bool reciprocal = false;
  int points_tested = 0;
  std::string note = "conditions checked on sample points only";
};

ReciprocityReport check_reciprocity(const NonlinearSystem& sys, const MetricField& G,
                                    const SignatureMatrix& sigma, const SampleSet& samples,
                                    double tol = 1e-6, double det_floor = 1e-12);

/// Affine specialisation, sampled over states only.
ReciprocityReport check_reciprocity_affine(const AffineSystem& sys, const MetricField& G,
                                           const SignatureMatrix& sigma,
                                           const std::vector<Vector>& states,
                                           double tol = 1e-6, double det_floor = 1e-12);

struct HessianMetricResult {
  bool hessian = false;
  double residual = 0.0;
};

/// max |dG_jk/dx_i - dG_ik/dx_j| over samples.
HessianMetricResult is_hessian_metric(const MetricField& G, const std::vector<Vector>& samples,
                                      double tol = 1e-5);

struct ReconstructOptions {
  int quadrature_order = 32;
  double quadrature_tol = 1e-10;
  double hessian_tol = 1e-5;      // threshold for the Hessian-metric precondition
  double verify_tol = 1e-3;       // max |d^2 K - G| accepted at check points
  int check_points = 20;
};

/// K with Hessian G, K(x0) = 0 and grad K(x0) = 0; the gradient is exposed analytically
/// (the inner line integral), the Hessian by differences of it.
ScalarField reconstruct_K(const MetricField& G, const Vector& base_point,
                          const ReconstructOptions& opts = {});

/// Simplified test: G dF/dx symmetric with G = Hessian of K, plus lines two and three.
ReciprocityReport check_reciprocity_hessian(const NonlinearSystem& sys, const ScalarField& K,
                                            const SignatureMatrix& sigma,
                                            const SampleSet& samples, double tol = 1e-6,
                                            double det_floor = 1e-12);

enum class PathKind { kStraight, kStaircase };

/// V on (x,u)-space with G F = -dV/dx and sigma H = -dV/du.
struct PotentialFunction {
  ScalarField V;
  Vector base_point;  // (x0, u0)
  double max_gradient_error = 0.0;

  int nx() const { return static_cast<int>(base_point.size()) - nu_; }
  int nu() const { return nu_; }
  double operator()(const Vector& x, const Vector& u) const;

  int nu_ = 0;
};

struct PotentialOptions {
  PathKind path = PathKind::kStraight;
  double quadrature_tol = 1e-10;
  double reciprocity_tol = 1e-6;
  double verify_tol = 1e-4;
  int check_points = 20;
};

PotentialFunction reconstruct_potential(const NonlinearSystem& sys, const MetricField& G,
                                        const SignatureMatrix& sigma, const Vector& x0,
                                        const Vector& u0, const PotentialOptions& opts = {});

/// Line integral of -(G F, sigma H) from (x0,u0) to (x,u) along the chosen path.
double potential_line_integral(const NonlinearSystem& sys, const MetricField& G,
                               const SignatureMatrix& sigma, const Vector& x0,
                               const Vector& u0, const Vector& x, const Vector& u,
                               PathKind path, double tol = 1e-10);

}  // namespace recipkit::nonlinear
