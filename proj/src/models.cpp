#include "recipkit/models.hpp"

#include <algorithm>
#include <cmath>

#include "recipkit/numerics.hpp"

namespace recipkit::models {

using dynamics::HessianPseudoGradientSystem;
using dynamics::PhSplit;
using dynamics::PortHamiltonianSystem;

namespace {

constexpr double kAsinClamp = 1.0 - 1e-12;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) out[i++] = a;
  return out;
}

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix M(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double a : r) M(i, j++) = a;
    ++i;
  }
  return M;
}

ScalarField quadratic_field(const Matrix& Q, const BoxDomain& box) {
  return ScalarField(
      box, [Q](const Vector& x) { return 0.5 * x.dot(Q * x); },
      [Q](const Vector& x) -> Vector { return Q * x; }, [Q](const Vector&) { return Q; });
}

// arcsin(p / gamma) with the argument clamped just inside +-1; beyond the line limit it throws.
double safe_asin(double p, double gamma) {
  const double s = p / gamma;
  if (std::abs(s) >= 1.0) {
    fail(ErrorCode::kOutsideDomain, "line flow " + std::to_string(p) +
                                        " reaches the limit gamma = " + std::to_string(gamma));
  }
  return std::asin(std::clamp(s, -kAsinClamp, kAsinClamp));
}

// sum_j r_j x_j^2 / 2 + c_j x_j^4 / 4 times a sign.
ScalarField separable_poly(const Vector& r, const Vector& c, double sign, const BoxDomain& box) {
  return ScalarField(
      box,
      [r, c, sign](const Vector& x) {
        return sign * (0.5 * r.dot(x.cwiseProduct(x)) + 0.25 * c.dot(x.array().pow(4).matrix()));
      },
      [r, c, sign](const Vector& x) -> Vector {
        return sign * (r.cwiseProduct(x) + c.cwiseProduct(x.array().pow(3).matrix()));
      },
      [r, c, sign](const Vector& x) -> Matrix {
        return (sign * (r + 3.0 * c.cwiseProduct(x.cwiseProduct(x)))).asDiagonal();
      });
}

}  // namespace

// Brayton-Moser -----------------------------------------------------------------

void BraytonMoserModel::validate() const {
  require(L.size() > 0 && (L.array() > 0).all(), ErrorCode::kInvalidArgument,
          "inductances must be positive");
  require(Cap.size() > 0 && (Cap.array() > 0).all(), ErrorCode::kInvalidArgument,
          "capacitances must be positive");
  require(Lambda.rows() == L.size() && Lambda.cols() == Cap.size(), ErrorCode::kDimensionMismatch,
          "Lambda must be nI x nV");
  require(P1.valid() && P1.dim() == L.size() && P2.valid() && P2.dim() == Cap.size(),
          ErrorCode::kDimensionMismatch, "P1 and P2 must live on currents and voltages");
  require(domain.dim() == L.size() + Cap.size(), ErrorCode::kDimensionMismatch,
          "domain must be the (I, V) box");
}

ScalarField BraytonMoserModel::K() const {
  Matrix G = Matrix::Zero(L.size() + Cap.size(), L.size() + Cap.size());
  G.diagonal() << L, -Cap;
  return quadratic_field(G, domain);
}

ScalarField BraytonMoserModel::P() const {
  const ScalarField p1 = P1, p2 = P2;
  const Matrix Lam = Lambda;
  const int ni = n_currents(), nv = n_voltages();
  return ScalarField(
      domain,
      [p1, p2, Lam, ni, nv](const Vector& x) {
        const Vector I = x.head(ni), V = x.tail(nv);
        return p1.value(I) + p2.value(V) + I.dot(Lam * V);
      },
      [p1, p2, Lam, ni, nv](const Vector& x) {
        const Vector I = x.head(ni), V = x.tail(nv);
        Vector g(ni + nv);
        g << p1.gradient(I) + Lam * V, p2.gradient(V) + Lam.transpose() * I;
        return g;
      },
      [p1, p2, Lam, ni, nv](const Vector& x) {
        Matrix H = Matrix::Zero(ni + nv, ni + nv);
        H.topLeftCorner(ni, ni) = p1.hessian(x.head(ni));
        H.bottomRightCorner(nv, nv) = p2.hessian(x.tail(nv));
        H.topRightCorner(ni, nv) = Lam;
        H.bottomLeftCorner(nv, ni) = Lam.transpose();
        return H;
      });
}

ScalarField BraytonMoserModel::hamiltonian() const {
  Matrix Hm = Matrix::Zero(L.size() + Cap.size(), L.size() + Cap.size());
  Hm.diagonal() << L.cwiseInverse(), Cap.cwiseInverse();
  Vector scale(L.size() + Cap.size());
  scale << L, Cap;
  const BoxDomain zbox(scale.cwiseProduct(domain.lower()), scale.cwiseProduct(domain.upper()));
  return quadratic_field(Hm, zbox);
}

BraytonMoserModel bm_linear(const Vector& L, const Vector& Cap, const Matrix& Lambda,
                            const Vector& R, const Vector& Gc, double bound) {
  BraytonMoserModel m;
  m.L = L;
  m.Cap = Cap;
  m.Lambda = Lambda;
  m.P1 = separable_poly(R, Vector::Zero(R.size()), 1.0,
                        BoxDomain::cube(static_cast<int>(L.size()), -bound, bound));
  m.P2 = separable_poly(Gc, Vector::Zero(Gc.size()), 1.0,
                        BoxDomain::cube(static_cast<int>(Cap.size()), -bound, bound));
  m.domain = BoxDomain::cube(static_cast<int>(L.size() + Cap.size()), -bound, bound);
  m.validate();
  return m;
}

BraytonMoserModel bm_default() {
  BraytonMoserModel m;
  m.L = vec({1.0});
  m.Cap = vec({0.5});
  m.Lambda = mat({{1.0}});
  m.P1 = separable_poly(vec({0.5}), vec({0.2}), 1.0, BoxDomain::cube(1, -2, 2));
  m.P2 = separable_poly(vec({0.3}), vec({0.1}), -1.0, BoxDomain::cube(1, -2, 2));
  m.domain = BoxDomain::cube(2, -2, 2);
  m.validate();
  return m;
}

HessianPseudoGradientSystem bm_as_pseudo_gradient(const BraytonMoserModel& model,
                                                  const Matrix& g_input) {
  model.validate();
  const int n = model.n_currents() + model.n_voltages();
  const Matrix g = g_input.size() ? g_input : Matrix::Zero(n, 0);
  require(g.rows() == n, ErrorCode::kDimensionMismatch, "g_input must have n rows");
  return dynamics::make_affine_hessian_system(model.K(), model.P(), g,
                                              SignatureMatrix::identity(static_cast<int>(g.cols())));
}

PortHamiltonianSystem bm_as_port_hamiltonian(const BraytonMoserModel& model,
                                             const Matrix& g_input) {
  model.validate();
  const int ni = model.n_currents(), nv = model.n_voltages(), n = ni + nv;
  const Matrix g = g_input.size() ? g_input : Matrix::Zero(n, 0);
  Matrix J = Matrix::Zero(n, n);
  J.topRightCorner(ni, nv) = -model.Lambda;
  J.bottomLeftCorner(nv, ni) = model.Lambda.transpose();
  PortHamiltonianSystem s;
  s.n = n;
  s.m = static_cast<int>(g.cols());
  s.J = [J](const Vector&) { return J; };
  const ScalarField p1 = model.P1, p2 = model.P2;
  s.R = [p1, p2, ni, nv](const Vector& e) {
    Vector r(ni + nv);
    r << p1.gradient(e.head(ni)), -p2.gradient(e.tail(nv));
    return r;
  };
  s.H = model.hamiltonian();
  // g acts on (I, V) equations; in z = (L I, Cap V) the same columns apply.
  s.g = [g](const Vector&) { return g; };
  return s;
}

// Swing ---------------------------------------------------------------------------

void SwingModel::validate() const {
  require(M.size() > 0 && (M.array() > 0).all(), ErrorCode::kInvalidArgument,
          "masses must be positive");
  require(A.rows() == M.size() && A.cols() == M.size(), ErrorCode::kDimensionMismatch,
          "A must be n x n");
  require(min_eigenvalue_sym(sym(A)) >= -1e-12, ErrorCode::kInvalidArgument,
          "damping A must be positive semidefinite");
  require(D.rows() == M.size() && D.cols() == gamma.size(), ErrorCode::kDimensionMismatch,
          "incidence must be nodes x edges");
  require(gamma.size() > 0 && (gamma.array() > 0).all(), ErrorCode::kInvalidArgument,
          "line constants must be positive");
  require(flow_fraction > 0 && flow_fraction < 1, ErrorCode::kInvalidArgument,
          "flow_fraction must lie in (0, 1)");
}

BoxDomain SwingModel::coenergy_domain() const {
  const int n = nodes(), k = edges();
  Vector hi(n + k);
  hi << Vector::Constant(n, omega_bound), flow_fraction * gamma;
  return BoxDomain(-hi, hi);
}

BoxDomain SwingModel::energy_domain() const {
  const int n = nodes(), k = edges();
  Vector hi(n + k);
  hi << omega_bound * M, Vector::Constant(k, std::asin(flow_fraction));
  return BoxDomain(-hi, hi);
}

Vector SwingModel::to_coenergy(const Vector& z) const {
  const int n = nodes(), k = edges();
  Vector x(n + k);
  x << z.head(n).cwiseQuotient(M), gamma.cwiseProduct(z.tail(k).array().sin().matrix());
  return x;
}

Vector SwingModel::to_energy(const Vector& x) const {
  const int n = nodes(), k = edges();
  Vector z(n + k);
  z.head(n) = M.cwiseProduct(x.head(n));
  for (int j = 0; j < k; ++j) z[n + j] = safe_asin(x[n + j], gamma[j]);
  return z;
}

ScalarField SwingModel::H2_conjugate() const {
  const Vector gm = gamma;
  const int k = edges();
  const BoxDomain box = coenergy_domain().select([&] {
    std::vector<int> idx;
    for (int j = 0; j < k; ++j) idx.push_back(nodes() + j);
    return idx;
  }());
  return ScalarField(
      box,
      [gm, k](const Vector& p) {
        double v = 0.0;
        for (int j = 0; j < k; ++j) {
          const double a = safe_asin(p[j], gm[j]);
          v += p[j] * a + gm[j] * std::cos(a);
        }
        return v;
      },
      [gm, k](const Vector& p) {
        Vector g(k);
        for (int j = 0; j < k; ++j) g[j] = safe_asin(p[j], gm[j]);
        return g;
      },
      [gm, k](const Vector& p) {
        Matrix H = Matrix::Zero(k, k);
        for (int j = 0; j < k; ++j) {
          safe_asin(p[j], gm[j]);
          H(j, j) = 1.0 / std::sqrt(gm[j] * gm[j] - p[j] * p[j]);
        }
        return H;
      });
}

ScalarField SwingModel::storage() const {
  const Vector m = M, gm = gamma;
  const int n = nodes(), k = edges();
  return ScalarField(
      coenergy_domain(),
      [m, gm, n, k](const Vector& x) {
        double v = 0.5 * x.head(n).dot(m.cwiseProduct(x.head(n)));
        for (int j = 0; j < k; ++j) v -= gm[j] * std::cos(safe_asin(x[n + j], gm[j]));
        return v;
      },
      [m, gm, n, k](const Vector& x) {
        Vector g(n + k);
        g.head(n) = m.cwiseProduct(x.head(n));
        for (int j = 0; j < k; ++j) {
          const double c = std::cos(safe_asin(x[n + j], gm[j]));
          g[n + j] = x[n + j] / (gm[j] * c);
        }
        return g;
      });
}

SwingModel swing_default() {
  SwingModel s;
  s.M = vec({1.0, 2.0});
  s.A = mat({{0.5, 0.0}, {0.0, 0.3}});
  s.D = mat({{1.0}, {-1.0}});
  s.gamma = vec({1.5});
  s.validate();
  return s;
}

PortHamiltonianSystem swing_as_port_hamiltonian(const SwingModel& model) {
  model.validate();
  const int n = model.nodes(), k = model.edges();
  Matrix J = Matrix::Zero(n + k, n + k);
  J.topRightCorner(n, k) = -model.D;
  J.bottomLeftCorner(k, n) = model.D.transpose();
  Matrix g = Matrix::Zero(n + k, n);
  g.topRows(n) = Matrix::Identity(n, n);
  const Matrix A = model.A;
  const Vector Minv = model.M.cwiseInverse(), gm = model.gamma;

  PortHamiltonianSystem s;
  s.n = n + k;
  s.m = n;
  s.J = [J](const Vector&) { return J; };
  s.R = [A, n, k](const Vector& e) {
    Vector r = Vector::Zero(n + k);
    r.head(n) = A * e.head(n);
    return r;
  };
  s.g = [g](const Vector&) { return g; };
  s.H = ScalarField(
      model.energy_domain(),
      [Minv, gm, n, k](const Vector& z) {
        return 0.5 * z.head(n).dot(Minv.cwiseProduct(z.head(n))) -
               gm.dot(z.tail(k).array().cos().matrix());
      },
      [Minv, gm, n, k](const Vector& z) {
        Vector g(n + k);
        g << Minv.cwiseProduct(z.head(n)), gm.cwiseProduct(z.tail(k).array().sin().matrix());
        return g;
      },
      [Minv, gm, n, k](const Vector& z) {
        Vector d(n + k);
        d << Minv, gm.cwiseProduct(z.tail(k).array().cos().matrix());
        return Matrix(d.asDiagonal());
      });
  return s;
}

HessianPseudoGradientSystem swing_as_hessian_pseudo_gradient(const SwingModel& model) {
  model.validate();
  const int n = model.nodes(), k = model.edges();
  const Vector m = model.M;
  const ScalarField h2s = model.H2_conjugate();
  const BoxDomain box = model.coenergy_domain();
  const ScalarField K(
      box,
      [m, h2s, n, k](const Vector& x) {
        return 0.5 * x.head(n).dot(m.cwiseProduct(x.head(n))) - h2s.value(x.tail(k));
      },
      [m, h2s, n, k](const Vector& x) {
        Vector g(n + k);
        g << m.cwiseProduct(x.head(n)), -h2s.gradient(x.tail(k));
        return g;
      },
      [m, h2s, n, k](const Vector& x) {
        Matrix H = Matrix::Zero(n + k, n + k);
        H.topLeftCorner(n, n) = m.asDiagonal();
        H.bottomRightCorner(k, k) = -h2s.hessian(x.tail(k));
        return H;
      });
  const Matrix D = model.D, A = model.A;
  const ScalarField P(
      box,
      [D, A, n, k](const Vector& x) {
        const Vector w = x.head(n), p = x.tail(k);
        return w.dot(D * p) + 0.5 * w.dot(A * w);
      },
      [D, A, n, k](const Vector& x) {
        const Vector w = x.head(n), p = x.tail(k);
        Vector g(n + k);
        g << D * p + A * w, D.transpose() * w;
        return g;
      },
      [D, A, n, k](const Vector&) {
        Matrix H = Matrix::Zero(n + k, n + k);
        H.topLeftCorner(n, n) = A;
        H.topRightCorner(n, k) = D;
        H.bottomLeftCorner(k, n) = D.transpose();
        return H;
      });
  Matrix g = Matrix::Zero(n + k, n);
  g.topRows(n) = Matrix::Identity(n, n);
  return dynamics::make_affine_hessian_system(K, P, g, SignatureMatrix::identity(n),
                                              BoxDomain::cube(n, -1.0, 1.0));
}

PhSplit swing_split(const SwingModel& model) {
  const int n = model.nodes(), k = model.edges();
  const BoxDomain ebox = model.energy_domain();
  std::vector<int> i1, i2;
  for (int i = 0; i < n; ++i) i1.push_back(i);
  for (int j = 0; j < k; ++j) i2.push_back(n + j);
  PhSplit s;
  s.idx1 = i1;
  s.idx2 = i2;
  s.H1 = quadratic_field(Matrix(model.M.cwiseInverse().asDiagonal()), ebox.select(i1));
  const Vector gm = model.gamma;
  s.H2 = ScalarField(
      ebox.select(i2), [gm](const Vector& q) { return -gm.dot(q.array().cos().matrix()); },
      [gm](const Vector& q) -> Vector { return gm.cwiseProduct(q.array().sin().matrix()); },
      [gm](const Vector& q) -> Matrix {
        return Matrix(gm.cwiseProduct(q.array().cos().matrix()).asDiagonal());
      });
  BoxDomain wbox = model.coenergy_domain().select(i1);
  s.P1 = quadratic_field(model.A, wbox);
  s.Pc = model.D;
  s.g1 = Matrix::Identity(n, n);
  return s;
}

// RC circuits -----------------------------------------------------------------------

EdgeCharacteristic EdgeCharacteristic::linear(double conductance) {
  require(conductance >= 0, ErrorCode::kInvalidArgument, "conductance must be nonnegative");
  return {"linear", [conductance](double v) { return 0.5 * conductance * v * v; },
          [conductance](double v) { return conductance * v; },
          [conductance](double) { return conductance; }};
}

EdgeCharacteristic EdgeCharacteristic::tanh_conductor() {
  return {"tanh",
          [](double v) {
            // log cosh without overflow
            const double a = std::abs(v);
            return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
          },
          [](double v) { return std::tanh(v); },
          [](double v) {
            const double c = std::cosh(v);
            return 1.0 / (c * c);
          }};
}

void RcCircuitModel::validate() const {
  require(Dc.cols() == Dt.cols(), ErrorCode::kDimensionMismatch, "Dc and Dt need one column per edge");
  require(static_cast<size_t>(Dc.cols()) == edges.size(), ErrorCode::kDimensionMismatch,
          "one characteristic per edge");
  require(Hcap.valid() && Hcap.dim() == Dc.rows(), ErrorCode::kDimensionMismatch,
          "Hcap must live on the capacitor charges");
  require(Dt.rows() > 0, ErrorCode::kInvalidArgument, "at least one terminal is needed");
}

ScalarField RcCircuitModel::W(const BoxDomain& psi_c_box) const {
  Matrix D(Dc.rows() + Dt.rows(), Dc.cols());
  D << Dc, Dt;
  const auto es = edges;
  const BoxDomain box = psi_c_box.product(BoxDomain::cube(terminals(), -terminal_bound, terminal_bound));
  return ScalarField(
      box,
      [D, es](const Vector& psi) {
        const Vector v = D.transpose() * psi;
        double w = 0.0;
        for (size_t j = 0; j < es.size(); ++j) w += es[j].W(v[static_cast<Eigen::Index>(j)]);
        return w;
      },
      [D, es](const Vector& psi) -> Vector {
        const Vector v = D.transpose() * psi;
        Vector cur(v.size());
        for (size_t j = 0; j < es.size(); ++j)
          cur[static_cast<Eigen::Index>(j)] = es[j].G(v[static_cast<Eigen::Index>(j)]);
        return D * cur;
      },
      [D, es](const Vector& psi) -> Matrix {
        const Vector v = D.transpose() * psi;
        Vector d(v.size());
        for (size_t j = 0; j < es.size(); ++j)
          d[static_cast<Eigen::Index>(j)] = es[j].dG(v[static_cast<Eigen::Index>(j)]);
        return D * d.asDiagonal() * D.transpose();
      });
}

RcCircuitModel rc_default() {
  RcCircuitModel m;
  m.Dc = mat({{1.0, -1.0}, {0.0, 1.0}});
  m.Dt = mat({{-1.0, 0.0}});
  m.edges = {EdgeCharacteristic::tanh_conductor(), EdgeCharacteristic::tanh_conductor()};
  m.Hcap = ScalarField(
      BoxDomain::cube(2, -2, 2),
      [](const Vector& q) { return 0.5 * q.squaredNorm() + q.array().pow(4).sum() / 12.0; },
      [](const Vector& q) -> Vector { return q + q.array().pow(3).matrix() / 3.0; },
      [](const Vector& q) -> Matrix {
        return Matrix((Vector::Ones(q.size()) + q.cwiseProduct(q)).asDiagonal());
      });
  m.terminal_bound = 1.0;
  m.validate();
  return m;
}

RcCircuitModel rc_scalar_linear() {
  RcCircuitModel m;
  m.Dc = mat({{1.0}});
  m.Dt = mat({{-1.0}});
  m.edges = {EdgeCharacteristic::linear(1.0)};
  m.Hcap = quadratic_field(Matrix::Identity(1, 1), BoxDomain::cube(1, -3, 3));
  m.validate();
  return m;
}

RcRelaxation rc_as_relaxation(const RcCircuitModel& model) {
  model.validate();
  RcRelaxation out;
  for (const auto& q : model.Hcap.domain().halton(100)) {
    if (min_eigenvalue_sym(sym(model.Hcap.hessian(q))) <= 0.0) {
      fail(ErrorCode::kPreconditionFailed,
           "capacitor energy Hessian is not positive definite at " + format_point(q));
    }
  }
  legendre::PairOptions popts;
  popts.samples = 50;
  out.pair = legendre::make_legendre_pair(model.Hcap, popts);
  const BoxDomain psi_c = out.pair.Kstar().domain();
  const ScalarField W = model.W(psi_c);
  for (const auto& psi : W.domain().halton(200)) {
    if (min_eigenvalue_sym(sym(W.hessian(psi))) < -1e-12) {
      fail(ErrorCode::kPreconditionFailed, "W is not convex at " + format_point(psi));
    }
  }
  out.system = dynamics::make_hessian_system(
      out.pair.Kstar(), W, SignatureMatrix::negative_identity(model.terminals()),
      BoxDomain::cube(model.terminals(), -model.terminal_bound, model.terminal_bound));
  const auto pair = out.pair;
  const ScalarField H = model.Hcap;
  out.storage = ScalarField(
      psi_c, [pair, H](const Vector& x) { return H.value(pair.inverse(x)); },
      [pair](const Vector& x) -> Vector { return pair.conjugate_hessian(x) * x; });
  return out;
}

// Registry --------------------------------------------------------------------------

std::vector<ModelEntry> fixture_library() {
  std::vector<ModelEntry> lib;
  {
    ModelEntry e;
    e.name = "scalar-relaxation";
    e.description = "x' = -x + u, y = x; reciprocal, passive and a relaxation system (G = Q = 1)";
    e.reference = "linear relaxation systems";
    e.linear = linear::LinearSystem(mat({{-1}}), mat({{1}}), mat({{1}}), mat({{0}}));
    e.G = mat({{1}});
    e.Q = mat({{1}});
    e.sigma = SignatureMatrix::identity(1);
    e.reciprocal = e.passive = e.relaxation = true;
    e.hessian = [] {
      const BoxDomain box = BoxDomain::cube(1, -3, 3);
      return dynamics::make_affine_hessian_system(quadratic_field(mat({{1}}), box),
                                                  quadratic_field(mat({{1}}), box), mat({{1}}),
                                                  SignatureMatrix::identity(1));
    };
    e.storage = [] { return quadratic_field(mat({{1}}), BoxDomain::cube(1, -3, 3)); };
    e.x0 = vec({1.0});
    lib.push_back(e);
  }
  {
    ModelEntry e;
    e.name = "gyrator";
    e.description = "skew A = [[0,1],[-1,0]], B = e2, C = e1^T; not reciprocal for G = I";
    e.reference = "linear reciprocity counterexample";
    e.linear = linear::LinearSystem(mat({{0, 1}, {-1, 0}}), mat({{0}, {1}}), mat({{1, 0}}),
                                    mat({{0}}));
    e.G = Matrix::Identity(2, 2);
    e.sigma = SignatureMatrix::identity(1);
    e.x0 = vec({1.0, 0.0});
    lib.push_back(e);
  }
  {
    ModelEntry e;
    e.name = "indefinite-G";
    e.description =
        "G = diag(1,-1), P = [[1,2],[2,-1]], C = (1,0), D = 1; passive with compatible Q = I";
    e.reference = "compatible storage with an indefinite metric";
    const Matrix G = mat({{1, 0}, {0, -1}});
    const Matrix P = mat({{1, 2}, {2, -1}});
    linear::LinearPseudoGradientForm pg{G, P, mat({{1, 0}}), mat({{1}}),
                                        SignatureMatrix::identity(1)};
    e.linear = pg.to_state_space();
    e.G = G;
    e.Q = Matrix::Identity(2, 2);
    e.sigma = SignatureMatrix::identity(1);
    e.reciprocal = e.passive = true;
    e.x0 = vec({1.0, -0.5});
    lib.push_back(e);
  }
  {
    ModelEntry e;
    e.name = "relaxation-2x2";
    e.description = "G = [[2,0.5],[0.5,1]] > 0, P = [[1,0.2],[0.2,0.5]], C = (1,0.5), D = 0";
    e.reference = "linear relaxation systems";
    const Matrix G = mat({{2, 0.5}, {0.5, 1}});
    const Matrix P = mat({{1, 0.2}, {0.2, 0.5}});
    const Matrix C = mat({{1, 0.5}});
    linear::LinearPseudoGradientForm pg{G, P, C, mat({{0}}), SignatureMatrix::identity(1)};
    e.linear = pg.to_state_space();
    e.G = G;
    e.Q = G;
    e.sigma = SignatureMatrix::identity(1);
    e.reciprocal = e.passive = e.relaxation = true;
    e.hessian = [G, P, C] {
      const BoxDomain box = BoxDomain::cube(2, -3, 3);
      return dynamics::make_affine_hessian_system(quadratic_field(G, box), quadratic_field(P, box),
                                                  Matrix(C.transpose()),
                                                  SignatureMatrix::identity(1));
    };
    e.storage = [G] { return quadratic_field(G, BoxDomain::cube(2, -3, 3)); };
    e.x0 = vec({1.0, -1.0});
    lib.push_back(e);
  }
  return lib;
}

std::vector<ModelEntry> builtin_registry() {
  auto reg = fixture_library();
  {
    ModelEntry e;
    e.name = "brayton-moser";
    e.description = "RLC circuit in mixed-potential form, cubic resistor and conductor, source in series with L";
    e.reference = "Brayton-Moser example";
    e.kind = ModelKind::kHessian;
    e.sigma = SignatureMatrix::identity(1);
    e.reciprocal = e.passive = true;
    const Matrix g = mat({{1}, {0}});
    e.hessian = [g] { return bm_as_pseudo_gradient(bm_default(), g); };
    e.port_hamiltonian = [g] { return bm_as_port_hamiltonian(bm_default(), g); };
    e.split = [] {
      const auto m = bm_default();
      PhSplit s;
      s.idx1 = {0};
      s.idx2 = {1};
      const BoxDomain zb = m.hamiltonian().domain();
      s.H1 = quadratic_field(mat({{1.0 / m.L[0]}}), zb.select({0}));
      s.H2 = quadratic_field(mat({{1.0 / m.Cap[0]}}), zb.select({1}));
      s.P1 = m.P1;
      s.P2 = m.P2;
      return s;
    };
    e.storage = [] {
      const auto m = bm_default();
      Matrix S = Matrix::Zero(2, 2);
      S.diagonal() << m.L[0], m.Cap[0];
      return quadratic_field(S, m.domain);
    };
    e.x0 = vec({0.5, -0.3});
    reg.push_back(e);
  }
  {
    ModelEntry e;
    e.name = "swing";
    e.description = "two-node swing equations in co-energy variables (omega, pi)";
    e.reference = "swing equation example";
    e.kind = ModelKind::kHessian;
    e.sigma = SignatureMatrix::identity(2);
    e.reciprocal = e.passive = true;
    e.hessian = [] { return swing_as_hessian_pseudo_gradient(swing_default()); };
    e.port_hamiltonian = [] { return swing_as_port_hamiltonian(swing_default()); };
    e.split = [] { return swing_split(swing_default()); };
    e.storage = [] { return swing_default().storage(); };
    e.x0 = vec({0.3, -0.2, 0.4});
    reg.push_back(e);
  }
  {
    ModelEntry e;
    e.name = "swing-ph";
    e.description = "two-node swing equations in energy variables (p, q)";
    e.reference = "swing equation example";
    e.kind = ModelKind::kPortHamiltonian;
    e.sigma = SignatureMatrix::identity(2);
    e.reciprocal = e.passive = true;
    e.port_hamiltonian = [] { return swing_as_port_hamiltonian(swing_default()); };
    e.split = [] { return swing_split(swing_default()); };
    e.storage = [] { return swing_as_port_hamiltonian(swing_default()).H; };
    e.x0 = swing_default().to_energy(vec({0.3, -0.2, 0.4}));
    reg.push_back(e);
  }
  {
    ModelEntry e;
    e.name = "rc-relaxation";
    e.description = "two nonlinear capacitors, tanh conductors, one terminal; sigma = -I";
    e.reference = "nonlinear RC example";
    e.kind = ModelKind::kHessian;
    e.sigma = SignatureMatrix::negative_identity(1);
    e.reciprocal = e.passive = e.relaxation = true;
    e.hessian = [] { return rc_as_relaxation(rc_default()).system; };
    e.storage = [] { return rc_as_relaxation(rc_default()).storage; };
    e.x0 = vec({1.0, -0.5});
    reg.push_back(e);
  }
  {
    ModelEntry e;
    e.name = "rc-scalar";
    e.description = "one capacitor H = Q^2/2, one linear conductor, one terminal; sigma = -I";
    e.reference = "nonlinear RC example, linear reduction";
    e.kind = ModelKind::kHessian;
    e.sigma = SignatureMatrix::negative_identity(1);
    e.reciprocal = e.passive = e.relaxation = true;
    e.hessian = [] { return rc_as_relaxation(rc_scalar_linear()).system; };
    e.storage = [] { return rc_as_relaxation(rc_scalar_linear()).storage; };
    e.x0 = vec({1.0});
    reg.push_back(e);
  }
  return reg;
}

const ModelEntry& find_model(const std::vector<ModelEntry>& registry, const std::string& name) {
  for (const auto& e : registry) {
    if (e.name == name) return e;
  }
  fail(ErrorCode::kInvalidArgument, "unknown model '" + name + "'");
}

std::string kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinear: return "linear";
    case ModelKind::kHessian: return "hessian_pseudo_gradient";
    case ModelKind::kPortHamiltonian: return "port_hamiltonian";
    case ModelKind::kAffine: return "nonlinear";
  }
  return "unknown";
}

}  // namespace recipkit::models
