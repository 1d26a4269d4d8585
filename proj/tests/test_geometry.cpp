#include <doctest.h>

#include <cmath>
#include <random>

#include "recipkit/geometry.hpp"
#include "recipkit/models.hpp"
#include "test_support.hpp"

using namespace recipkit;
using namespace recipkit::geometry;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }
Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector v3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

ScalarField cubic_scalar() {
  return ScalarField(
      BoxDomain::cube(1, 0.5, 3), [](const Vector& x) { return std::pow(x[0], 3) / 6; },
      [](const Vector& x) { return v1(x[0] * x[0] / 2); },
      [](const Vector& x) { return Matrix::Constant(1, 1, x[0]); });
}

// K = 1/2 x^T Q x + sum_i c_i (a_i^T x)^3 / 6 + d exp(b^T x), with exact third partials.
struct RandomHessianK {
  Matrix Q, Acols;
  Vector c, b;
  double d = 0.0;

  ScalarField field(const BoxDomain& box) const {
    const auto self = *this;
    return ScalarField(
        box,
        [self](const Vector& x) {
          const Vector s = self.Acols.transpose() * x;
          return 0.5 * x.dot(self.Q * x) + self.c.dot(s.array().pow(3).matrix()) / 6 +
                 self.d * std::exp(self.b.dot(x));
        },
        [self](const Vector& x) -> Vector {
          const Vector s = self.Acols.transpose() * x;
          return self.Q * x + self.Acols * (self.c.cwiseProduct(s.cwiseProduct(s)) / 2) +
                 self.d * std::exp(self.b.dot(x)) * self.b;
        },
        [self](const Vector& x) -> Matrix { return self.hessian(x); });
  }
  Matrix hessian(const Vector& x) const {
    const Vector s = Acols.transpose() * x;
    return Q + Acols * c.cwiseProduct(s).asDiagonal() * Acols.transpose() +
           d * std::exp(b.dot(x)) * b * b.transpose();
  }
  Christoffel gamma(const Vector& x) const {
    const int n = static_cast<int>(x.size());
    std::vector<Matrix> T(static_cast<size_t>(n), Matrix::Zero(n, n));
    for (int l = 0; l < n; ++l) {
      for (int i = 0; i < Acols.cols(); ++i) {
        const Vector a = Acols.col(i);
        T[static_cast<size_t>(l)] += c[i] * a[l] * a * a.transpose();
      }
      T[static_cast<size_t>(l)] += d * std::exp(b.dot(x)) * b[l] * b * b.transpose();
    }
    const Matrix Hi = hessian(x).inverse();
    Christoffel out(static_cast<size_t>(n), Matrix::Zero(n, n));
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) out[static_cast<size_t>(k)] += 0.5 * Hi(k, l) * T[static_cast<size_t>(l)];
    return out;
  }
};

const models::ModelEntry& model(const std::string& name) {
  static const auto reg = models::builtin_registry();
  return models::find_model(reg, name);
}

}  // namespace

TEST_CASE("Christoffel symbols") {
  SUBCASE("constant metric is flat") {
    const auto G = MetricField::constant((Matrix(2, 2) << 2, 1, 1, -3).finished(), BoxDomain::cube(2, -1, 1));
    CHECK(max_symbol(levi_civita(G, v2(0.3, 0.1))) < 1e-12);
  }
  SUBCASE("G(x) = x from K = x^3/6") {
    const auto K = cubic_scalar();
    for (double x : {0.8, 2.0}) {
      CHECK(levi_civita(MetricField::hessian_of(K), v1(x))[0](0, 0) == doctest::Approx(1 / (2 * x)).epsilon(1e-8));
      CHECK(hessian_christoffel(K, v1(x))[0](0, 0) == doctest::Approx(1 / (2 * x)).epsilon(1e-8));
    }
    CHECK(hessian_christoffel(K, v1(2.0))[0](0, 0) == doctest::Approx(0.25).epsilon(1e-10));
  }
  SUBCASE("K = x1^4 + x2^2/2 away from the degenerate line") {
    const ScalarField K(
        BoxDomain(v2(0.5, -1), v2(2, 1)),
        [](const Vector& x) { return std::pow(x[0], 4) + 0.5 * x[1] * x[1]; },
        [](const Vector& x) { return v2(4 * std::pow(x[0], 3), x[1]); },
        [](const Vector& x) {
          Matrix H = Matrix::Zero(2, 2);
          H(0, 0) = 12 * x[0] * x[0];
          H(1, 1) = 1;
          return H;
        });
    for (const auto& x : K.domain().scaled_about(K.domain().center(), 0.8).halton(10)) {
      const auto a = levi_civita(MetricField::hessian_of(K), x);
      const auto b = hessian_christoffel(K, x);
      CHECK(max_gap(a, b) < 1e-4);
      CHECK(a[0](0, 0) == doctest::Approx(1.0 / x[0]).epsilon(1e-6));
    }
  }
  SUBCASE("random Hessian metrics: both constructions match the analytic symbols") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1, 1);
    double worst_lc = 0, worst_h = 0, worst_pair = 0, tors = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + trial % 3;
      RandomHessianK r;
      r.Q = testsupport::random_spd(rng, n, 2.0);
      r.Acols = testsupport::random_matrix(rng, n, 2, 0.5);
      r.c = v2(uni(rng), uni(rng));
      r.b = testsupport::random_matrix(rng, n, 1, 0.5);
      r.d = 0.5 * std::abs(uni(rng));
      const auto K = r.field(BoxDomain::cube(n, -0.5, 0.5));
      Vector x(n);
      for (int i = 0; i < n; ++i) x[i] = 0.4 * uni(rng);
      const auto oracle = r.gamma(x);
      const auto lc = levi_civita(MetricField::hessian_of(K), x);
      const auto hc = hessian_christoffel(K, x);
      worst_lc = std::max(worst_lc, max_gap(lc, oracle));
      worst_h = std::max(worst_h, max_gap(hc, oracle));
      worst_pair = std::max(worst_pair, max_gap(lc, hc));
      tors = std::max(tors, torsion(hessian_connection(K), {x}));
    }
    CHECK(worst_lc < 1e-6);
    CHECK(worst_h < 1e-6);
    CHECK(worst_pair < 1e-4);
    CHECK(tors < 1e-8);
  }
  SUBCASE("singular metric") {
    const auto G = MetricField::constant(Matrix::Zero(2, 2), BoxDomain::cube(2, -1, 1));
    CHECK_THROWS_AS(levi_civita(G, v2(0, 0)), Error);
  }
}

TEST_CASE("flatness") {
  const BoxDomain box = BoxDomain::cube(2, -1, 1);
  const auto samples = box.halton(20);
  const ScalarField quad(
      box, [](const Vector& x) { return x[0] * x[0] - 3 * x[0] * x[1] + x[1] + 2; },
      [](const Vector& x) { return v2(2 * x[0] - 3 * x[1], -3 * x[0] + 1); },
      [](const Vector&) { return (Matrix(2, 2) << 2, -3, -3, 0).finished(); });
  const auto fq = flatness_check(quad, samples);
  CHECK(fq.flat);
  CHECK(fq.consistent);
  CHECK(fq.max_gamma < 1e-10);

  const ScalarField cub(
      box, [](const Vector& x) { return 0.5 * x.squaredNorm() + 0.1 * std::pow(x[0], 3); },
      [](const Vector& x) { return v2(x[0] + 0.3 * x[0] * x[0], x[1]); },
      [](const Vector& x) {
        Matrix H = Matrix::Identity(2, 2);
        H(0, 0) += 0.6 * x[0];
        return H;
      });
  CHECK_FALSE(flatness_check(cub, samples).flat);

  const ScalarField ex(
      box, [](const Vector& x) { return std::exp(x[0]) + 0.5 * x[1] * x[1]; },
      [](const Vector& x) { return v2(std::exp(x[0]), x[1]); },
      [](const Vector& x) {
        Matrix H = Matrix::Identity(2, 2);
        H(0, 0) = std::exp(x[0]);
        return H;
      });
  const auto fe = flatness_check(ex, samples);
  CHECK_FALSE(fe.flat);
  CHECK(fe.consistent);
}

TEST_CASE("variational and dual variational systems of a linear system") {
  const auto& e = model("relaxation-2x2");
  const auto hs = e.hessian();
  const auto sys = hs.to_affine();
  const auto& L = *e.linear;
  const auto nominal = dynamics::simulate_pseudo_gradient(
      hs, v2(1, -1), [](double t) { return v1(std::sin(t)); }, 0, 2, {});
  const auto var = variational_system(sys, nominal);
  const auto dual = dual_variational_system(sys, hessian_connection(hs.K), nominal);
  for (double t : {0.0, 0.77, 2.0}) {
    CHECK(testsupport::max_abs_diff(var.A(t), L.A) < 1e-9);
    CHECK(testsupport::max_abs_diff(var.B(t), L.B) < 1e-12);
    CHECK(testsupport::max_abs_diff(var.C(t), L.C) < 1e-12);
    CHECK(testsupport::max_abs_diff(dual.A(t), L.A.transpose()) < 1e-9);
    CHECK(testsupport::max_abs_diff(dual.B(t), L.C.transpose()) < 1e-12);
    CHECK(testsupport::max_abs_diff(dual.C(t), L.B.transpose()) < 1e-12);
  }

  SUBCASE("free response matches C exp(At) xi") {
    const auto tr = simulate_ltv(var, v2(0.5, 1.0), [](double) { return v1(0); }, 0, 2, 1e-2);
    const Vector y = L.C * testsupport::taylor_expm(2.0 * L.A) * v2(0.5, 1.0);
    CHECK((tr.outputs.back() - y).norm() < 1e-9);
  }
  SUBCASE("external test matches and p = G dx") {
    const auto r = external_reciprocity_test(sys, hs.metric(), nominal, default_probes(2, 1, 0, 2));
    CHECK(r.match);
    CHECK(r.max_output_gap < 1e-6);
    CHECK(r.max_isomorphism_gap < 1e-9);
    CHECK(r.probes.size() == 4);
  }
}

TEST_CASE("equilibrium nominal freezes the linearization") {
  const auto sw = models::swing_default();
  const auto hs = models::swing_as_hessian_pseudo_gradient(sw);
  const auto sys = hs.to_affine();
  const auto nominal = dynamics::simulate_pseudo_gradient(hs, Vector::Zero(3), dynamics::zero_input(2), 0, 1, {});
  const auto var = variational_system(sys, nominal);
  CHECK(testsupport::max_abs_diff(var.A(0.0), var.A(0.9)) < 1e-14);
  CHECK(testsupport::max_abs_diff(var.A(0.3), sys.jac_f(Vector::Zero(3))) < 1e-14);
}

TEST_CASE("dual with f = g = 0") {
  AffineSystem s;
  s.nx = 2;
  s.nu = 1;
  s.domain = BoxDomain::cube(2, -2, 2);
  s.f = [](const Vector&) { return Vector(Vector::Zero(2)); };
  s.g = [](const Vector&) { return Matrix(Matrix::Zero(2, 1)); };
  s.h = [](const Vector& x) { return v1(x[0] * x[1] + x[0]); };
  dynamics::Trajectory nom;
  nom.times = {0, 0.5, 1};
  nom.states = {v2(0.5, 0.2), v2(0.5, 0.2), v2(0.5, 0.2)};
  nom.inputs = {v1(0.3), v1(0.3), v1(0.3)};
  nom.outputs = nom.inputs;
  const auto d = dual_variational_system(s, levi_civita_connection(MetricField::constant(Matrix::Identity(2, 2), s.domain)), nom);
  CHECK(recipkit::max_abs(d.A(0.4)) < 1e-14);
  CHECK(recipkit::max_abs(d.C(0.4)) == 0.0);
  CHECK((d.B(0.4) - v2(1.2, 0.5)).norm() < 1e-6);
}

TEST_CASE("swing: dual forms agree and the external test matches") {
  const auto sw = models::swing_default();
  const auto hs = models::swing_as_hessian_pseudo_gradient(sw);
  const auto sys = hs.to_affine();
  const dynamics::InputSignal u = [](double t) { return v2(0.3 * std::sin(t), -0.1); };
  dynamics::SimOptions o;
  o.step = 1e-3;
  const auto nominal = dynamics::simulate_pseudo_gradient(hs, v3(0.4, -0.3, 0.5), u, 0, 2, o);
  const auto conn = hessian_connection(hs.K);
  const auto d1 = dual_variational_system(sys, conn, nominal, DualForm::kDrift);
  const auto d2 = dual_variational_system(sys, conn, nominal, DualForm::kVelocity);
  double gap = 0;
  for (size_t k = 0; k < nominal.size(); k += 97) {
    gap = std::max(gap, testsupport::max_abs_diff(d1.A(nominal.times[k]), d2.A(nominal.times[k])));
  }
  CHECK(gap < 1e-8);

  const auto r = external_reciprocity_test(sys, hs.metric(), nominal, default_probes(3, 2, 0, 2));
  MESSAGE("swing external gap " << r.max_output_gap << ", isomorphism gap " << r.max_isomorphism_gap);
  CHECK(r.match);
  CHECK(r.max_isomorphism_gap < 1e-5);
}

TEST_CASE("Brayton-Moser external test, and a non-reciprocal perturbation") {
  const auto hs = model("brayton-moser").hessian();
  const auto sys = hs.to_affine();
  const auto nominal = dynamics::simulate_pseudo_gradient(
      hs, v2(0.5, -0.3), [](double t) { return v1(0.5 * std::sin(t)); }, 0, 2, {});
  const auto G = MetricField::constant(hs.K.hessian(v2(0, 0)), hs.domain());
  const auto probes = default_probes(2, 1, 0, 2);
  const auto r = external_reciprocity_test(sys, G, nominal, probes);
  CHECK(r.match);
  CHECK(r.max_output_gap < 1e-6);

  AffineSystem bad = sys;
  bad.f = [f = sys.f](const Vector& x) -> Vector {
    Vector v = f(x);
    v[1] += 0.8 * x[0];
    return v;
  };
  bad.df_dx = {};
  const auto rb = external_reciprocity_test(bad, G, nominal, probes);
  CHECK_FALSE(rb.match);
  CHECK(rb.max_output_gap > 1e-2);
}

TEST_CASE("nominal outside the domain") {
  const auto hs = model("relaxation-2x2").hessian();
  dynamics::Trajectory nom;
  nom.times = {0, 1};
  nom.states = {v2(0, 0), v2(5, 0)};
  nom.inputs = {v1(0), v1(0)};
  nom.outputs = nom.inputs;
  CHECK_THROWS_AS(variational_system(hs.to_affine(), nom), Error);
}
