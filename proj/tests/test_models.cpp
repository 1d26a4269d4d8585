#include <doctest.h>

#include <cmath>

#include "recipkit/linear_analysis.hpp"
#include "recipkit/models.hpp"
#include "recipkit/nonlinear_reciprocity.hpp"
#include "test_support.hpp"

using namespace recipkit;
using namespace recipkit::models;

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

// max |analytic - central difference| of gradient and Hessian over points.
double fd_mismatch(const ScalarField& f, const std::vector<Vector>& xs) {
  const double h = 1e-5;
  double err = 0.0;
  for (const auto& x : xs) {
    const Vector g = f.gradient(x);
    const Matrix H = f.hessian(x);
    for (int i = 0; i < x.size(); ++i) {
      Vector e = Vector::Zero(x.size());
      e[i] = h;
      err = std::max(err, std::abs((f.value(x + e) - f.value(x - e)) / (2 * h) - g[i]));
      err = std::max(err, ((f.gradient(x + e) - f.gradient(x - e)) / (2 * h) - H.col(i)).cwiseAbs().maxCoeff());
    }
  }
  return err;
}

}  // namespace

TEST_CASE("linear Brayton-Moser circuit is reciprocal") {
  const auto bm = bm_linear(v1(1), v1(1), Matrix::Ones(1, 1), v1(1), v1(1));
  const Matrix g = (Matrix(2, 1) << 1, 0).finished();
  const auto sys = bm_as_pseudo_gradient(bm, g);
  CHECK(sys.nx == 2);
  const auto nl = sys.to_nonlinear();
  const auto rep = nonlinear::check_reciprocity_hessian(nl, sys.K, sys.sigma,
                                                        nonlinear::default_samples(nl, 100));
  CHECK(rep.reciprocal);
  CHECK(rep.residual_state < 1e-6);
  CHECK(rep.residual_cross < 1e-6);
  // diag(L, -Cap)
  const Matrix Hk = sys.K.hessian(v2(0.3, 0.2));
  CHECK(Hk(0, 0) == 1.0);
  CHECK(Hk(1, 1) == -1.0);
  CHECK(Hk(0, 1) == 0.0);

  SUBCASE("Lambda = 0 decouples the RL and RC halves") {
    const auto dec = bm_as_pseudo_gradient(bm_linear(v1(1), v1(1), Matrix::Zero(1, 1), v1(1), v1(1)), g);
    const Matrix Jf = dec.to_nonlinear().jac_F_x(v2(0.4, -0.2), v1(0));
    CHECK(std::abs(Jf(0, 1)) < 1e-12);
    CHECK(std::abs(Jf(1, 0)) < 1e-12);
  }
  SUBCASE("non-positive inductance") {
    CHECK_THROWS_AS(bm_linear(v1(0), v1(1), Matrix::Ones(1, 1), v1(1), v1(1)), Error);
    CHECK_THROWS_AS(bm_linear(v1(1), v1(-1), Matrix::Ones(1, 1), v1(1), v1(1)), Error);
  }
}

TEST_CASE("Brayton-Moser port-Hamiltonian form") {
  const auto bm = bm_default();
  const Matrix g = (Matrix(2, 1) << 1, 0).finished();
  const auto ph = bm_as_port_hamiltonian(bm, g);
  const auto pg = bm_as_pseudo_gradient(bm, g).pseudo_gradient();
  const Vector z = v2(0.4, -0.3);
  // 1/2 phi^2 / L + 1/2 Q^2 / Cap
  CHECK(ph.H.value(z) == doctest::Approx(0.5 * 0.16 / bm.L[0] + 0.5 * 0.09 / bm.Cap[0]));
  // z' = diag(L, Cap) x' with x = grad H(z)
  for (const auto& zz : ph.domain().scaled_about(Vector::Zero(2), 0.5).halton(20)) {
    const Vector x = ph.H.gradient(zz);
    const Vector u = v1(0.3);
    const Vector zdot = ph.rhs(zz, u);
    const Vector xdot = pg.rhs(x, u);
    CHECK((zdot - v2(bm.L[0] * xdot[0], bm.Cap[0] * xdot[1])).norm() < 1e-12);
  }
  CHECK(ph.check(ph.domain().halton(20)).ok);
  CHECK(fd_mismatch(bm.P(), bm.domain.scaled_about(Vector::Zero(2), 0.9).halton(20)) < 1e-6);
}

TEST_CASE("swing model") {
  SwingModel sw;
  sw.M = v2(1, 1);
  sw.A = Matrix::Identity(2, 2);
  sw.D = (Matrix(2, 1) << 1, -1).finished();
  sw.gamma = v1(1);
  const auto ph = swing_as_port_hamiltonian(sw);
  CHECK(ph.n == 3);
  const auto chk = ph.check(ph.domain().halton(30));
  CHECK(chk.ok);
  CHECK(chk.max_skew == 0.0);
  // y = M^{-1} p
  const Vector z = v3(0.6, -0.2, 0.3);
  CHECK((ph.output(z) - z.head(2)).norm() < 1e-15);

  SUBCASE("A = 0 conserves H, A > 0 dissipates") {
    SwingModel lossless = sw;
    lossless.A = Matrix::Zero(2, 2);
    dynamics::SimOptions o;
    o.step = 1e-2;
    const auto tr = dynamics::simulate_port_hamiltonian(swing_as_port_hamiltonian(lossless), z,
                                                        dynamics::zero_input(2), 0, 10, o);
    const auto& S = tr.monitors.at("storage");
    double drift = 0;
    for (double s : S) drift = std::max(drift, std::abs(s - S.front()));
    CHECK(drift < 1e-8);
    const auto td = dynamics::simulate_port_hamiltonian(ph, z, dynamics::zero_input(2), 0, 5, o);
    const auto& Sd = td.monitors.at("storage");
    for (size_t k = 1; k < Sd.size(); ++k) CHECK(Sd[k] <= Sd[k - 1] + 1e-12);
  }
  SUBCASE("dimension mismatch") {
    SwingModel bad = sw;
    bad.D = Matrix::Ones(3, 1);
    CHECK_THROWS_AS(swing_as_port_hamiltonian(bad), Error);
  }
}

TEST_CASE("swing co-energy representation") {
  const auto sw = swing_default();
  const auto sys = swing_as_hessian_pseudo_gradient(sw);
  const double g = sw.gamma[0];

  SUBCASE("equilibrium and storage minimum at the origin") {
    const Vector o = Vector::Zero(3);
    CHECK(sys.pseudo_gradient().rhs(o, Vector::Zero(2)).norm() < 1e-15);
    const ScalarField S = sw.storage();
    CHECK(S.gradient(o).norm() < 1e-15);
    for (const auto& x : sw.coenergy_domain().halton(100)) CHECK(S.value(x) >= S.value(o));
  }
  SUBCASE("H2*(0) = gamma, confirmed by a sup oracle") {
    const ScalarField h2s = sw.H2_conjugate();
    CHECK(h2s.value(v1(0)) == doctest::Approx(g));
    for (double p : {0.0, 0.5, -1.2}) {
      double sup = -1e300;
      for (int i = 0; i <= 200000; ++i) {
        const double q = -M_PI / 2 + M_PI * i / 200000;
        sup = std::max(sup, p * q + g * std::cos(q));
      }
      CHECK(h2s.value(v1(p)) == doctest::Approx(sup).epsilon(1e-8));
    }
  }
  SUBCASE("metric diag(M, -1/sqrt(gamma^2 - pi^2))") {
    const Vector x = v3(0.2, 0.1, 0.8);
    const Matrix H = sys.K.hessian(x);
    CHECK(H(0, 0) == sw.M[0]);
    CHECK(H(1, 1) == sw.M[1]);
    CHECK(H(2, 2) == doctest::Approx(-1.0 / std::sqrt(g * g - 0.64)));
    CHECK(fd_mismatch(sys.K, sw.coenergy_domain().scaled_about(Vector::Zero(3), 0.9).halton(20)) < 1e-5);
  }
  SUBCASE("reciprocal for sigma = I") {
    const auto nl = sys.to_nonlinear();
    const auto rep = nonlinear::check_reciprocity_hessian(nl, sys.K, sys.sigma,
                                                          nonlinear::default_samples(nl, 100));
    CHECK(rep.reciprocal);
  }
  SUBCASE("coordinate change") {
    const Vector x = v3(0.3, -0.4, 1.1);
    CHECK((sw.to_coenergy(sw.to_energy(x)) - x).norm() < 1e-14);
    CHECK_THROWS_AS(sw.to_energy(v3(0, 0, 1.5)), Error);
    CHECK_THROWS_AS(sw.H2_conjugate().value(v1(-2.0)), Error);
  }
  SUBCASE("trajectories agree under (omega, pi) = (M^{-1} p, Gamma sin q)") {
    const auto ph = swing_as_port_hamiltonian(sw);
    const dynamics::InputSignal u = [](double t) { return v2(0.2 * std::cos(t), 0.1); };
    const Vector x0 = v3(0.5, -0.5, 0.6);
    dynamics::SimOptions o;
    o.step = 1e-3;
    const auto tz = dynamics::simulate_port_hamiltonian(ph, sw.to_energy(x0), u, 0, 2, o);
    const auto tx = dynamics::simulate_pseudo_gradient(sys, x0, u, 0, 2, o);
    double gap = 0;
    for (size_t k = 0; k < tz.size(); k += 100) {
      gap = std::max(gap, (sw.to_coenergy(tz.states[k]) - tx.states[k]).norm());
    }
    CHECK(gap < 1e-6);
    // storage passes the dissipation monitor along the co-energy trajectory
    const auto d = dynamics::dissipation_monitor(tx, sw.storage());
    CHECK(d.passive_along);
  }
}

TEST_CASE("RC circuits") {
  SUBCASE("scalar linear RC, storage psi^2 / 2") {
    const auto rc = rc_as_relaxation(rc_scalar_linear());
    for (double p : {-2.0, 0.3, 1.7}) {
      CHECK(rc.storage.value(v1(p)) == doctest::Approx(0.5 * p * p).epsilon(1e-9));
    }
    // W = (psi_c - psi_t)^2 / 2: psi_c' = -(psi_c - psi_t)
    const Vector rhs = rc.system.pseudo_gradient().rhs(v1(1.0), v1(0.25));
    CHECK(rhs[0] == doctest::Approx(-0.75).epsilon(1e-8));
    CHECK(dynamics::certify_relaxation(rc.system).relaxation);
  }
  SUBCASE("tanh conductors: log cosh potential, certified") {
    const auto e = EdgeCharacteristic::tanh_conductor();
    for (double v : {-3.0, -0.5, 0.0, 0.7, 40.0}) {
      CHECK(e.W(v) == doctest::Approx(std::log(std::cosh(v))));
      CHECK(e.dG(v) >= 0);
    }
    const auto m = rc_default();
    const auto rc = rc_as_relaxation(m);
    const auto W = m.W(rc.pair.Kstar().domain());
    CHECK(W.gradient(Vector::Zero(3)).norm() == 0.0);
    CHECK(fd_mismatch(W, W.domain().scaled_about(Vector::Zero(3), 0.5).halton(10)) < 1e-6);
    CHECK(dynamics::certify_relaxation(rc.system).relaxation);
  }
  SUBCASE("psi_t = 0 gives non-increasing storage") {
    const auto rc = rc_as_relaxation(rc_default());
    dynamics::SimOptions o;
    o.step = 1e-2;
    auto tr = dynamics::simulate_pseudo_gradient(rc.system, v2(1.0, -0.5), dynamics::zero_input(1), 0, 5, o);
    dynamics::attach_storage(tr, rc.storage);
    const auto& S = tr.monitors.at("storage");
    for (size_t k = 1; k < S.size(); ++k) CHECK(S[k] <= S[k - 1] + 1e-12);
  }
  SUBCASE("dS/dt <= J_t psi_t along a driven trajectory") {
    const auto rc = rc_as_relaxation(rc_default());
    dynamics::SimOptions o;
    o.step = 1e-2;
    const auto tr = dynamics::simulate_pseudo_gradient(
        rc.system, v2(0.5, 0.2), [](double t) { return v1(0.8 * std::sin(2 * t)); }, 0, 5, o);
    const auto d = dynamics::dissipation_monitor(tr, rc.storage);
    CHECK(d.passive_along);
    CHECK(d.max_violation <= 1e-6 * d.supply_scale);
  }
  SUBCASE("non-monotone conductor is rejected") {
    auto m = rc_scalar_linear();
    m.edges = {{"negative", [](double v) { return -0.5 * v * v; }, [](double v) { return -v; },
                [](double) { return -1.0; }}};
    CHECK_THROWS_AS(rc_as_relaxation(m), Error);
  }
  SUBCASE("negative capacitor curvature is rejected") {
    auto m = rc_scalar_linear();
    m.Hcap = ScalarField(
        BoxDomain::cube(1, -1, 1), [](const Vector& q) { return -0.5 * q[0] * q[0]; },
        [](const Vector& q) { return Vector(-q); },
        [](const Vector&) { return Matrix::Constant(1, 1, -1.0); });
    CHECK_THROWS_AS(rc_as_relaxation(m), Error);
  }
}

TEST_CASE("fixture library ground truth") {
  const auto lib = fixture_library();
  REQUIRE(lib.size() == 4);
  for (const auto& e : lib) {
    CAPTURE(e.name);
    REQUIRE(e.linear.has_value());
    const auto rec = linear::check_linear_reciprocity(*e.linear, e.G, e.sigma);
    CHECK(rec.reciprocal == e.reciprocal);
    if (e.passive) {
      CHECK(linear::lmi_residual(*e.linear, e.Q).passive);
    }
  }
  SUBCASE("scalar-relaxation") {
    const auto& e = find_model(lib, "scalar-relaxation");
    CHECK(dynamics::certify_relaxation(e.hessian()).relaxation);
    CHECK(e.linear->A(0, 0) == -1.0);
  }
  SUBCASE("gyrator is not reciprocal for any diagonal G") {
    const auto& e = find_model(lib, "gyrator");
    double best = 1e300;
    for (double a : {0.1, 0.5, 1.0, 2.0, 10.0}) {
      for (double b : {0.1, 0.5, 1.0, 2.0, 10.0}) {
        const Matrix G = Vector(v2(a, b)).asDiagonal();
        best = std::min(best, linear::check_linear_reciprocity(*e.linear, G, e.sigma).residual);
      }
    }
    CHECK(best > 1e-3);
  }
  SUBCASE("indefinite-G is a compatible pair with Q = I") {
    const auto& e = find_model(lib, "indefinite-G");
    CHECK(e.G(1, 1) == -1.0);
    CHECK(linear::lmi_residual(*e.linear, Matrix::Identity(2, 2)).passive);
  }
}

TEST_CASE("registry") {
  const auto reg = builtin_registry();
  for (const char* n : {"brayton-moser", "swing", "swing-ph", "rc-relaxation", "rc-scalar"}) {
    const auto& e = find_model(reg, n);
    CHECK_FALSE(e.description.empty());
    CHECK(e.x0.size() > 0);
    if (e.hessian) {
      const auto s = e.hessian();
      CHECK(s.nx == e.x0.size());
      CHECK(s.domain().contains(e.x0));
    }
    if (e.port_hamiltonian) CHECK(e.port_hamiltonian().n > 0);
  }
  CHECK_THROWS_AS(find_model(reg, "no-such-model"), Error);
  // storage of the swing-ph entry conserves under its own split conversion
  const auto& sp = find_model(reg, "swing-ph");
  const auto conv = dynamics::ph_to_hessian_pseudo_gradient(sp.port_hamiltonian(), sp.split());
  const Vector x = conv.to_coenergy(sp.x0);
  CHECK((x - v3(0.3, -0.2, 0.4)).norm() < 1e-10);
  const auto& bm = find_model(reg, "brayton-moser");
  const auto rep = dynamics::check_ph_assumptions(bm.port_hamiltonian(), bm.split());
  CHECK(rep.all());
}
