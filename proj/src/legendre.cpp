#include "recipkit/legendre.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "recipkit/numerics.hpp"

namespace recipkit::legendre {

namespace {

double residual_scale(const Vector& z) { return std::max(1.0, z.norm()); }

Vector newton_step(const ScalarField& K, const Vector& x, const Vector& r) {
  const Matrix H = K.hessian(x);
  Eigen::FullPivLU<Matrix> lu(H);
  if (!lu.isInvertible()) {
    fail(ErrorCode::kSingularMatrix, "Hessian of K is singular at " + format_point(x));
  }
  return -lu.solve(r);
}

// Residual norm at y, or +inf when y leaves the domain or K misbehaves there.
double trial_residual(const ScalarField& K, const Vector& y, const Vector& z) {
  if (!K.domain().contains(y)) return std::numeric_limits<double>::infinity();
  const double r = (K.gradient(y) - z).norm();
  return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
}

LegendreResult solve_with(const ScalarField& K, const Vector& z, const Vector& x_init,
                          const NewtonOptions& opts) {
  if (z.size() != K.dim() || x_init.size() != K.dim()) {
    fail(ErrorCode::kDimensionMismatch, "legendre_transform: z and x_init must match dim K");
  }
  if (!K.domain().contains(x_init)) {
    fail(ErrorCode::kOutsideDomain, "legendre_transform: x_init outside domain at " +
                                        format_point(x_init));
  }
  const double target = opts.tol * residual_scale(z);
  Vector x = x_init;
  double rn = (K.gradient(x) - z).norm();
  int it = 0;
  int polish = 0;
  while (it < opts.max_iter) {
    if (rn <= target) {
      // A few extra full steps take the residual down to rounding level.
      if (polish >= 2 || rn == 0.0) break;
    }
    const Vector dx = newton_step(K, x, K.gradient(x) - z);
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opts.max_halvings; ++k, step *= 0.5) {
      const Vector y = x + step * dx;
      const double ry = trial_residual(K, y, z);
      if (ry < rn) {
        x = y;
        rn = ry;
        accepted = true;
        break;
      }
    }
    ++it;
    if (!accepted) break;
    if (rn <= target) ++polish;
  }
  if (!(rn <= target)) {
    fail(ErrorCode::kNotConverged,
         "Newton for grad K(x) = z did not converge at z = " + format_point(z) +
             " (residual " + std::to_string(rn) + "); z may lie outside the co-domain");
  }
  LegendreResult res;
  res.value = z.dot(x) - K.value(x);
  res.x = std::move(x);
  res.iterations = it;
  res.residual = rn;
  return res;
}

struct Engine {
  ScalarField K;
  PairOptions opts;
  std::shared_ptr<NewtonCache> cache;

  LegendreResult solve(const Vector& z) const {
    Vector x0;
    const bool warm = opts.init == InitPolicy::kWarmStart && cache && cache->nearest(z, x0);
    if (!warm) x0 = K.domain().center();
    LegendreResult res;
    try {
      res = solve_with(K, z, x0, opts.newton);
    } catch (const Error&) {
      if (!warm) throw;
      res = solve_with(K, z, K.domain().center(), opts.newton);
    }
    if (opts.init == InitPolicy::kWarmStart && cache) cache->insert(z, res.x);
    return res;
  }

  Matrix conjugate_hessian(const Vector& z) const {
    const Vector x = solve(z).x;
    return checked_inverse(K.hessian(x), 0.0, ("Hessian of K at " + format_point(x)).c_str());
  }
};

BoxDomain gradient_image_box(const ScalarField& K) {
  const int n = K.dim();
  const int per_axis = std::clamp(static_cast<int>(std::pow(4096.0, 1.0 / n)), 2, 33);
  Vector lo = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const auto& x : K.domain().grid(per_axis)) {
    const Vector z = K.gradient(x);
    lo = lo.cwiseMin(z);
    hi = hi.cwiseMax(z);
  }
  const Vector pad = (1e-9 * (hi - lo).cwiseAbs()).array() + 1e-12;
  return BoxDomain(lo - pad, hi + pad);
}

// Fourth-order central differences of f; false when a stencil point fails.
bool central_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& z, double h,
                      Matrix& J) {
  try {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Vector e = Vector::Zero(z.size());
      e[i] = h;
      const Vector col =
          (-f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)) / (12.0 * h);
      if (i == 0) J.resize(col.size(), z.size());
      J.col(i) = col;
    }
  } catch (const Error&) {
    return false;
  }
  return true;
}

bool conjugate_jacobian_fd(const LegendrePair& pair, const Vector& z, double h, Matrix& J) {
  return central_jacobian([&pair](const Vector& w) { return pair.inverse(w); }, z, h, J);
}

}  // namespace

LegendreResult legendre_transform(const ScalarField& K, const Vector& z, const Vector& x_init,
                                  const NewtonOptions& opts) {
  return solve_with(K, z, x_init, opts);
}

bool NewtonCache::nearest(const Vector& z, Vector& x) const {
  std::lock_guard<std::mutex> lock(mu_);
  double best = std::numeric_limits<double>::infinity();
  const std::pair<Vector, Vector>* hit = nullptr;
  for (const auto& e : entries_) {
    if (e.first.size() != z.size()) continue;
    const double d = (e.first - z).squaredNorm();
    if (d < best) {
      best = d;
      hit = &e;
    }
  }
  if (!hit) return false;
  x = hit->second;
  return true;
}

void NewtonCache::insert(const Vector& z, const Vector& x) {
  std::lock_guard<std::mutex> lock(mu_);
  if (capacity_ == 0) return;
  if (entries_.size() < capacity_) {
    entries_.emplace_back(z, x);
  } else {
    entries_[next_] = {z, x};
    next_ = (next_ + 1) % capacity_;
  }
}

size_t NewtonCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

void NewtonCache::clear() {
  std::lock_guard<std::mutex> lock(mu_);
  entries_.clear();
  next_ = 0;
}

LegendrePair::LegendrePair(ScalarField K, PairOptions opts)
    : K_(std::move(K)), opts_(opts), cache_(std::make_shared<NewtonCache>()) {
  if (!K_.valid()) fail(ErrorCode::kInvalidArgument, "LegendrePair: K is empty");
  auto engine = std::make_shared<Engine>(Engine{K_, opts_, cache_});
  Kstar_ = ScalarField(
      gradient_image_box(K_), [engine](const Vector& z) { return engine->solve(z).value; },
      [engine](const Vector& z) { return engine->solve(z).x; },
      [engine](const Vector& z) { return engine->conjugate_hessian(z); });
}

LegendreResult LegendrePair::solve(const Vector& z) const {
  return Engine{K_, opts_, cache_}.solve(z);
}

Vector LegendrePair::inverse(const Vector& z) const { return solve(z).x; }

double LegendrePair::conjugate(const Vector& z) const { return solve(z).value; }

Matrix LegendrePair::conjugate_hessian(const Vector& z) const {
  return Engine{K_, opts_, cache_}.conjugate_hessian(z);
}

double LegendrePair::conjugate_at_gradient(const Vector& x) const {
  return conjugate(forward(x));
}

double LegendrePair::biconjugate(const Vector& x) const {
  // Newton on grad K*(z) = x, whose Jacobian is d^2 K*(z) = (d^2 K(x'))^{-1}.
  Vector z = forward(K_.domain().center());
  LegendreResult inner = solve(z);
  double rn = (inner.x - x).norm();
  const double target = 1e-12 * std::max(1.0, x.norm());
  int polish = 0;
  for (int it = 0; it < opts_.newton.max_iter; ++it) {
    if (rn <= target && (polish >= 2 || rn == 0.0)) break;
    const Vector dz = -K_.hessian(inner.x) * (inner.x - x);
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opts_.newton.max_halvings; ++k, step *= 0.5) {
      const Vector zt = z + step * dz;
      LegendreResult trial;
      try {
        trial = solve(zt);
      } catch (const Error&) {
        continue;
      }
      const double rt = (trial.x - x).norm();
      if (rt < rn) {
        z = zt;
        inner = std::move(trial);
        rn = rt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (rn <= target) ++polish;
  }
  if (!(rn <= 1e-9 * std::max(1.0, x.norm()))) {
    fail(ErrorCode::kNotConverged, "biconjugate: no z with grad K*(z) = " + format_point(x));
  }
  return x.dot(z) - inner.value;
}

PairVerification LegendrePair::verify(const std::vector<Vector>& xs, double fd_step) const {
  PairVerification v;
  const int n = K_.dim();
  std::vector<Vector> zs;
  zs.reserve(xs.size());
  double worst = -1.0;
  Vector worst_point;
  std::string worst_what;
  auto note = [&](double err, double tol, const Vector& x, const char* what) {
    const double ratio = err / tol;
    if (ratio > worst) {
      worst = ratio;
      worst_point = x;
      worst_what = what;
    }
  };
  for (const auto& x : xs) {
    const Vector z = forward(x);
    zs.push_back(z);
    LegendreResult r;
    try {
      r = solve(z);
    } catch (const Error&) {
      note(std::numeric_limits<double>::infinity(), 1.0, x, "Newton inversion");
      continue;
    }
    const double rt = (r.x - x).norm() / std::max(1.0, x.norm());
    v.roundtrip_error = std::max(v.roundtrip_error, rt);
    if (rt > opts_.roundtrip_tol) {
      // Newton found another preimage of the same z.
      v.injective = false;
      note(rt, opts_.roundtrip_tol, x, "round trip (grad K not injective)");
    }

    const Matrix H = K_.hessian(x);
    Matrix Hs;
    const double s = 1.0 / checked_inverse(H, 0.0, "Hessian of K").norm();
    if (!conjugate_jacobian_fd(*this, z, fd_step * std::max(1.0, z.norm()) * std::min(1.0, s),
                               Hs)) {
      note(std::numeric_limits<double>::infinity(), 1.0, x, "Hessian reciprocity stencil");
      continue;
    }
    const double he = max_abs(Hs * H - Matrix::Identity(n, n));
    v.hessian_error = std::max(v.hessian_error, he);
    note(he, opts_.hessian_tol, x, "Hessian reciprocity");

    double be = std::numeric_limits<double>::infinity();
    try {
      be = std::abs(biconjugate(x) - K_.value(x)) / std::max(1.0, std::abs(K_.value(x)));
    } catch (const Error&) {
    }
    v.biconjugate_error = std::max(v.biconjugate_error, be);
    note(be, opts_.biconjugate_tol, x, "biconjugation");
    ++v.points;
  }
  for (size_t i = 0; i < zs.size() && v.injective; ++i) {
    for (size_t j = i + 1; j < zs.size(); ++j) {
      if ((zs[i] - zs[j]).norm() <= 1e-10 * std::max(1.0, zs[i].norm()) &&
          (xs[i] - xs[j]).norm() > 1e-6) {
        v.injective = false;
        note(std::numeric_limits<double>::infinity(), 1.0, xs[i], "injectivity");
        break;
      }
    }
  }
  if (worst > 1.0) {
    fail(ErrorCode::kCheckFailed, "Legendre pair: " + worst_what + " fails; worst point " +
                                      format_point(worst_point) + " (error/tol " +
                                      std::to_string(worst) + ")");
  }
  return v;
}

LegendrePair make_legendre_pair(const ScalarField& K, const PairOptions& opts) {
  LegendrePair pair(K, opts);
  if (opts.verify) {
    pair.verification_ = pair.verify(K.domain().halton(opts.samples));
  }
  return pair;
}

TildeFunction tilde_function(const LegendrePair& pair, int samples) {
  const ScalarField& S = pair.K();
  TildeFunction out;
  out.field = ScalarField(
      pair.Kstar().domain(), [pair](const Vector& z) { return pair.K().value(pair.inverse(z)); },
      [pair](const Vector& z) -> Vector {
        const Vector x = pair.inverse(z);
        return checked_inverse(pair.K().hessian(x), 0.0, "Hessian of S") * z;
      });

  TildeReport& rep = out.report;
  double s0 = 0.0;
  const int n = S.dim();
  try {
    const LegendreResult r0 = pair.solve(Vector::Zero(n));
    rep.zero_in_codomain = true;
    s0 = S.value(r0.x);
    rep.gradient_at_zero = out.field.gradient(Vector::Zero(n)).norm();
  } catch (const Error&) {
    rep.zero_in_codomain = false;
  }
  rep.convex = true;
  rep.min_excess = std::numeric_limits<double>::infinity();
  for (const auto& x : S.domain().halton(samples)) {
    if (min_eigenvalue_sym(sym(S.hessian(x))) < -1e-12) rep.convex = false;
    const Vector z = pair.forward(x);
    const LegendreResult r = pair.solve(z);
    const double st = S.value(r.x);
    rep.identity_error = std::max(rep.identity_error, std::abs(st - (z.dot(r.x) - r.value)));

    const Vector g = out.field.gradient(z);
    const double sc = 1.0 / checked_inverse(S.hessian(r.x), 0.0, "Hessian of S").norm();
    Matrix fd;
    if (central_jacobian([&out](const Vector& w) { return Vector::Constant(1, out.field.value(w)); },
                         z, 1e-5 * std::max(1.0, z.norm()) * std::min(1.0, sc), fd)) {
      rep.gradient_error = std::max(rep.gradient_error,
                                    (fd.row(0).transpose() - g).norm() / std::max(1.0, g.norm()));
    }
    if (rep.zero_in_codomain) rep.min_excess = std::min(rep.min_excess, st - s0);
    ++rep.points;
  }
  if (!rep.zero_in_codomain) rep.min_excess = 0.0;
  rep.floor_holds = !(rep.convex && rep.zero_in_codomain) || rep.min_excess >= -1e-10;
  return out;
}

TildeFunction tilde_function(const ScalarField& S, int samples) {
  PairOptions opts;
  opts.verify = false;
  return tilde_function(LegendrePair(S, opts), samples);
}

HomogeneityResult homogeneity_check(const ScalarField& K, double tol, int samples) {
  const int n = K.dim();
  const Vector origin = Vector::Zero(n);
  if (!K.domain().contains(origin)) {
    fail(ErrorCode::kPreconditionFailed,
         "homogeneity_check: the origin is not in the domain, so K(tx) cannot be sampled");
  }
  const double k0 = K.value(origin);
  const ScalarField K0(
      K.domain(), [K, k0](const Vector& x) { return K.value(x) - k0; },
      [K](const Vector& x) { return K.gradient(x); },
      [K](const Vector& x) { return K.hessian(x); });
  PairOptions opts;
  opts.verify = false;
  const LegendrePair pair(K0, opts);

  HomogeneityResult res;
  for (const auto& x : K.domain().scaled_about(origin, 0.5).halton(samples)) {
    const double kx = K0.value(x);
    res.equal_residual = std::max(res.equal_residual, std::abs(pair.conjugate_at_gradient(x) - kx));
    for (double t : {0.5, 2.0}) {
      res.degree_residual =
          std::max(res.degree_residual, std::abs(K0.value(t * x) - t * t * kx));
    }
  }
  res.equal = res.equal_residual <= tol;
  res.degree2 = res.degree_residual <= tol;
  res.agree = res.equal == res.degree2;
  return res;
}

bool euler_degree_check(const ScalarField& f, double degree, double tol, int samples) {
  for (const auto& x : f.domain().halton(samples)) {
    const double fx = f.value(x);
    if (std::abs(f.gradient(x).dot(x) - degree * fx) > tol * (1.0 + std::abs(fx))) return false;
  }
  return true;
}

}  // namespace recipkit::legendre
