#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "recipkit/core_types.hpp"

// Legendre transform K*(z) = z^T x - K(x) with z = grad K(x), computed by solving
// grad K(x) = z; no convexity is assumed.

namespace recipkit::legendre {

struct NewtonOptions {
  int max_iter = 100;
  double tol = 1e-10;       // on |grad K(x) - z|, scaled by max(1, |z|)
  int max_halvings = 50;
  double det_floor = 1e-300;
};

struct LegendreResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// Damped Newton on grad K(x) = z from x_init. Steps are halved until the residual
/// decreases and the iterate stays in K's domain.
LegendreResult legendre_transform(const ScalarField& K, const Vector& z, const Vector& x_init,
                                  const NewtonOptions& opts = {});

/// Solved (z, x) pairs used to warm-start Newton. Safe for concurrent use.
class NewtonCache {
 public:
  explicit NewtonCache(size_t capacity = 4096) : capacity_(capacity) {}
  /// x of the stored pair whose z is nearest; false when empty.
  bool nearest(const Vector& z, Vector& x) const;
  void insert(const Vector& z, const Vector& x);
  size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  size_t capacity_;
  size_t next_ = 0;
  std::vector<std::pair<Vector, Vector>> entries_;
};

enum class InitPolicy { kWarmStart, kColdStart };

struct PairOptions {
  InitPolicy init = InitPolicy::kWarmStart;
  NewtonOptions newton;
  int samples = 200;
  double roundtrip_tol = 1e-8;
  double hessian_tol = 1e-6;
  double biconjugate_tol = 1e-8;
  bool verify = true;
};

struct PairVerification {
  double roundtrip_error = 0.0;      // |grad K*(grad K(x)) - x|
  double hessian_error = 0.0;        // |d^2 K*(grad K(x)) - (d^2 K(x))^{-1}|, differences of grad K*
  double biconjugate_error = 0.0;    // |(K*)*(x) - K(x)|
  bool injective = true;
  int points = 0;
};

class LegendrePair;
LegendrePair make_legendre_pair(const ScalarField& K, const PairOptions& opts);

/// K together with its Legendre transform. Copies share the Newton cache.
class LegendrePair {
 public:
  LegendrePair() = default;
  LegendrePair(ScalarField K, PairOptions opts = {});

  const ScalarField& K() const { return K_; }
  /// K* as a field. Its box bounds grad K over a grid of K's domain; membership in
  /// the co-domain itself is decided by Newton convergence.
  const ScalarField& Kstar() const { return Kstar_; }

  Vector forward(const Vector& x) const { return K_.gradient(x); }
  /// grad K*(z): the x solving grad K(x) = z.
  Vector inverse(const Vector& z) const;
  double conjugate(const Vector& z) const;
  LegendreResult solve(const Vector& z) const;
  /// d^2 K*(z) = (d^2 K(grad K*(z)))^{-1}.
  Matrix conjugate_hessian(const Vector& z) const;
  /// (K*)*(x) by Newton on grad K*(z) = x from a cold start.
  double biconjugate(const Vector& x) const;
  /// K*(grad K(x)).
  double conjugate_at_gradient(const Vector& x) const;

  PairVerification verify(const std::vector<Vector>& xs, double fd_step = 1e-5) const;
  const PairVerification& verification() const { return verification_; }
  size_t cache_size() const { return cache_ ? cache_->size() : 0; }

 private:
  friend LegendrePair make_legendre_pair(const ScalarField& K, const PairOptions& opts);

  ScalarField K_;
  ScalarField Kstar_;
  PairOptions opts_;
  std::shared_ptr<NewtonCache> cache_;
  PairVerification verification_;
};

/// Builds the pair and checks the round-trip, Hessian and biconjugation identities on
/// `opts.samples` Halton points; throws kCheckFailed naming the worst point otherwise.
LegendrePair make_legendre_pair(const ScalarField& K, const PairOptions& opts);
inline LegendrePair make_legendre_pair(const ScalarField& K) { return make_legendre_pair(K, PairOptions{}); }

struct TildeReport {
  double identity_error = 0.0;     // |S~(z) - (z^T grad S*(z) - S*(z))|
  double gradient_error = 0.0;     // |grad S~(z) - d^2 S*(z) z|
  double gradient_at_zero = 0.0;   // |grad S~(0)|, when 0 is in the co-domain
  bool zero_in_codomain = false;
  bool convex = false;             // d^2 S >= 0 on the samples
  double min_excess = 0.0;         // min S~(z) - S~(0) over samples (convex case)
  bool floor_holds = true;
  int points = 0;
};

struct TildeFunction {
  ScalarField field;  // z -> S(grad S*(z))
  TildeReport report;
};

TildeFunction tilde_function(const LegendrePair& pair, int samples = 100);
TildeFunction tilde_function(const ScalarField& S, int samples = 100);

struct HomogeneityResult {
  bool equal = false;      // K*(grad K(x)) = K(x) for K - K(0)
  bool degree2 = false;    // K(tx) - K(0) = t^2 (K(x) - K(0)), t in {0.5, 2}
  bool agree = false;
  double equal_residual = 0.0;
  double degree_residual = 0.0;
};

/// Samples the domain shrunk by 1/2 about the origin; the origin must lie in the closed box.
HomogeneityResult homogeneity_check(const ScalarField& K, double tol = 1e-8, int samples = 200);

/// |grad f(x) . x - degree f(x)| <= tol (1 + |f(x)|) on samples of f's domain.
bool euler_degree_check(const ScalarField& f, double degree, double tol = 1e-6,
                        int samples = 200);

}  // namespace recipkit::legendre
