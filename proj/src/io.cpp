#include "recipkit/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "recipkit/dynamics.hpp"

namespace recipkit::io {

namespace fs = std::filesystem;

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

void dump(const Json& j, int indent, int depth, std::string& out) {
  const std::string pad = indent > 0 ? std::string(static_cast<size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? std::string(static_cast<size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        out += Json(it.key()).dump();
        out += indent > 0 ? ": " : ":";
        dump(it.value(), indent, depth + 1, out);
      }
      out += nl;
      out += close;
      out += "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // numeric rows stay on one line
      bool flat = true;
      for (const auto& e : j) flat = flat && (e.is_number() || e.is_null() || e.is_boolean());
      out += "[";
      if (!flat) out += nl;
      bool first = true;
      for (const auto& e : j) {
        if (!first) {
          out += ",";
          out += flat ? (indent > 0 ? " " : "") : nl;
        }
        first = false;
        if (!flat) out += pad;
        dump(e, indent, depth + 1, out);
      }
      if (!flat) {
        out += nl;
        out += close;
      }
      out += "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_number(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

BoxDomain box_from_json(const Json& j, int n, const std::string& what) {
  if (!j.contains("lower") && !j.contains("upper")) return BoxDomain::cube(n, -1e6, 1e6);
  const Vector lo = vector_from_json(j.at("lower"), what + ".lower");
  const Vector hi = vector_from_json(j.at("upper"), what + ".upper");
  require(lo.size() == n && hi.size() == n, ErrorCode::kDimensionMismatch,
          what + ": box has the wrong dimension");
  return BoxDomain(lo, hi);
}

SignatureMatrix sigma_from_json(const Json& j, int m) {
  if (!j.contains("sigma")) return SignatureMatrix::identity(m);
  std::vector<int> d;
  for (const auto& e : j.at("sigma")) d.push_back(e.get<int>());
  require(static_cast<int>(d.size()) == m, ErrorCode::kDimensionMismatch,
          "sigma must have one entry per input");
  return SignatureMatrix(d);
}

std::vector<int> indices_from_json(const Json& j) {
  std::vector<int> out;
  for (const auto& e : j) out.push_back(e.get<int>());
  return out;
}

Vector default_x0(const BoxDomain& box) {
  Vector x = box.center();
  for (int i = 0; i < x.size(); ++i) x[i] += 0.25 * std::min(1.0, box.upper()[i] - x[i]);
  return x;
}

models::ModelEntry parse_entry(const Json& j, const std::vector<models::ModelEntry>& builtins) {
  models::ModelEntry e;
  if (j.contains("model")) {
    e = models::find_model(builtins, j.at("model").get<std::string>());
    if (j.contains("name")) e.name = j.at("name").get<std::string>();
    if (j.contains("description")) e.description = j.at("description").get<std::string>();
    if (j.contains("x0")) e.x0 = vector_from_json(j.at("x0"), "x0");
    return e;
  }
  e.name = j.value("name", std::string("input"));
  e.description = j.value("description", std::string());
  e.reference = j.value("reference", std::string("user supplied"));
  e.reciprocal = j.value("reciprocal", false);
  e.passive = j.value("passive", false);
  e.relaxation = j.value("relaxation", false);
  const std::string kind = j.at("kind").get<std::string>();

  if (kind == "linear") {
    e.kind = models::ModelKind::kLinear;
    const Matrix A = matrix_from_json(j.at("A"), "A");
    const Matrix B = matrix_from_json(j.at("B"), "B");
    const Matrix C = matrix_from_json(j.at("C"), "C");
    const Matrix D = j.contains("D") ? matrix_from_json(j.at("D"), "D") : Matrix::Zero(C.rows(), B.cols());
    e.linear = linear::LinearSystem(A, B, C, D);
    e.linear->validate();
    e.sigma = sigma_from_json(j, static_cast<int>(B.cols()));
    if (j.contains("G")) e.G = matrix_from_json(j.at("G"), "G");
    if (j.contains("Q")) e.Q = matrix_from_json(j.at("Q"), "Q");
    e.x0 = j.contains("x0") ? vector_from_json(j.at("x0"), "x0") : Vector(Vector::Constant(A.rows(), 0.5));
    return e;
  }

  if (kind == "hessian_pseudo_gradient") {
    e.kind = models::ModelKind::kHessian;
    const ScalarField K = scalar_field_from_json(j.at("K"), "K");
    const ScalarField P = scalar_field_from_json(j.at("P"), "P");
    const int n = K.dim();
    require(P.dim() == n, ErrorCode::kDimensionMismatch, "K and P must have the same dimension");
    const Matrix g = j.contains("g") ? matrix_from_json(j.at("g"), "g") : Matrix::Zero(n, 0);
    require(g.rows() == n, ErrorCode::kDimensionMismatch, "g must have n rows");
    const int m = static_cast<int>(g.cols());
    e.sigma = sigma_from_json(j, m);
    BoxDomain ubox = BoxDomain::cube(m, -1, 1);
    if (j.contains("u_lower")) {
      ubox = BoxDomain(vector_from_json(j.at("u_lower"), "u_lower"), vector_from_json(j.at("u_upper"), "u_upper"));
    }
    const SignatureMatrix sigma = e.sigma;
    e.hessian = [K, P, g, sigma, ubox] {
      return dynamics::make_affine_hessian_system(K, P, g, sigma, ubox);
    };
    if (j.contains("storage")) {
      const ScalarField S = scalar_field_from_json(j.at("storage"), "storage");
      e.storage = [S] { return S; };
    }
    e.x0 = j.contains("x0") ? vector_from_json(j.at("x0"), "x0") : default_x0(K.domain());
    return e;
  }

  if (kind == "port_hamiltonian") {
    e.kind = models::ModelKind::kPortHamiltonian;
    const ScalarField H = scalar_field_from_json(j.at("H"), "H");
    const int n = H.dim();
    const Matrix J = matrix_from_json(j.at("J"), "J");
    require(J.rows() == n && J.cols() == n, ErrorCode::kDimensionMismatch, "J must be n x n");
    const Matrix R = j.contains("R") ? matrix_from_json(j.at("R"), "R") : Matrix::Zero(n, n);
    const Matrix g = j.contains("g") ? matrix_from_json(j.at("g"), "g") : Matrix::Zero(n, 0);
    require(R.rows() == n && R.cols() == n && g.rows() == n, ErrorCode::kDimensionMismatch,
            "R must be n x n and g must have n rows");
    e.sigma = SignatureMatrix::identity(static_cast<int>(g.cols()));
    e.port_hamiltonian = [H, J, R, g] {
      dynamics::PortHamiltonianSystem s;
      s.n = H.dim();
      s.m = static_cast<int>(g.cols());
      s.J = [J](const Vector&) { return J; };
      s.R = [R](const Vector& v) -> Vector { return R * v; };
      s.H = H;
      s.g = [g](const Vector&) { return g; };
      return s;
    };
    e.storage = [H] { return H; };
    if (j.contains("split")) {
      const Json& s = j.at("split");
      dynamics::PhSplit sp;
      sp.idx1 = indices_from_json(s.at("idx1"));
      sp.idx2 = indices_from_json(s.at("idx2"));
      sp.H1 = scalar_field_from_json(s.at("H1"), "split.H1");
      sp.H2 = scalar_field_from_json(s.at("H2"), "split.H2");
      if (s.contains("P1")) sp.P1 = scalar_field_from_json(s.at("P1"), "split.P1");
      if (s.contains("P2")) sp.P2 = scalar_field_from_json(s.at("P2"), "split.P2");
      e.split = [sp] { return sp; };
    }
    e.x0 = j.contains("x0") ? vector_from_json(j.at("x0"), "x0") : default_x0(H.domain());
    return e;
  }

  if (kind == "nonlinear") {
    e.kind = models::ModelKind::kAffine;
    std::vector<ScalarField> f, h;
    for (const auto& c : j.at("f")) f.push_back(scalar_field_from_json(c, "f"));
    for (const auto& c : j.at("h")) h.push_back(scalar_field_from_json(c, "h"));
    const int n = static_cast<int>(f.size());
    require(n > 0, ErrorCode::kInvalidArgument, "f needs at least one component");
    const Matrix g = j.contains("g") ? matrix_from_json(j.at("g"), "g") : Matrix::Zero(n, 0);
    const int m = static_cast<int>(g.cols());
    require(g.rows() == n && static_cast<int>(h.size()) == m, ErrorCode::kDimensionMismatch,
            "g must be n x m and h must have m components");
    for (const auto& c : f) require(c.dim() == n, ErrorCode::kDimensionMismatch, "f component dimension");
    for (const auto& c : h) require(c.dim() == n, ErrorCode::kDimensionMismatch, "h component dimension");
    e.sigma = sigma_from_json(j, m);
    if (j.contains("G")) e.G = matrix_from_json(j.at("G"), "G");
    const BoxDomain box = f.front().domain();
    const auto stack = [](const std::vector<ScalarField>& c) {
      return [c](const Vector& x) -> Vector {
        Vector v(static_cast<Eigen::Index>(c.size()));
        for (size_t i = 0; i < c.size(); ++i) v[static_cast<Eigen::Index>(i)] = c[i].value(x);
        return v;
      };
    };
    const auto jac = [](const std::vector<ScalarField>& c, int n_) {
      return [c, n_](const Vector& x) -> Matrix {
        Matrix M(static_cast<Eigen::Index>(c.size()), n_);
        for (size_t i = 0; i < c.size(); ++i) M.row(static_cast<Eigen::Index>(i)) = c[i].gradient(x).transpose();
        return M;
      };
    };
    e.affine = [=] {
      AffineSystem s;
      s.nx = n;
      s.nu = m;
      s.f = stack(f);
      s.h = stack(h);
      s.g = [g](const Vector&) { return g; };
      s.df_dx = jac(f, n);
      s.dh_dx = jac(h, n);
      s.domain = box;
      s.input_domain = BoxDomain::cube(m, -1, 1);
      return s;
    };
    e.x0 = j.contains("x0") ? vector_from_json(j.at("x0"), "x0") : default_x0(box);
    return e;
  }
  fail(ErrorCode::kInvalidArgument, "unknown system kind '" + kind + "'");
}

}  // namespace

std::string dump_json(const Json& j, int indent) {
  std::string out;
  dump(j, indent, 0, out);
  out += "\n";
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::kInvalidArgument, "cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) fail(ErrorCode::kInvalidArgument, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::kInvalidArgument, "cannot move output into " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kInvalidArgument, "cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, origin + ": malformed JSON (" + e.what() + ")");
  }
}

Json to_json(const Matrix& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
    rows.push_back(r);
  }
  return rows;
}

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const geometry::Christoffel& gamma) {
  Json a = Json::array();
  for (const auto& g : gamma) a.push_back(to_json(g));
  return a;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  try {
    if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
    require(j.is_array(), ErrorCode::kInvalidArgument, what + " must be a nested array");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Json& r = j.at(static_cast<size_t>(i));
      require(r.is_array() && static_cast<Eigen::Index>(r.size()) == cols, ErrorCode::kInvalidArgument,
              what + ": ragged or non-array row");
      for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = r.at(static_cast<size_t>(k)).get<double>();
    }
    return M;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, what + ": " + e.what());
  }
}

Vector vector_from_json(const Json& j, const std::string& what) {
  try {
    require(j.is_array(), ErrorCode::kInvalidArgument, what + " must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, what + ": " + e.what());
  }
}

ScalarField polynomial_field(const std::vector<PolynomialTerm>& terms, const BoxDomain& box) {
  const int n = box.dim();
  for (const auto& t : terms) {
    require(static_cast<int>(t.powers.size()) == n, ErrorCode::kDimensionMismatch,
            "polynomial term has the wrong number of powers");
    for (int p : t.powers) require(p >= 0, ErrorCode::kInvalidArgument, "negative power");
  }
  // d^a/dx^a of x^p, a in {0,1,2}
  const auto dpow = [](double x, int p, int a) {
    if (p < a) return 0.0;
    double c = 1.0;
    for (int k = 0; k < a; ++k) c *= p - k;
    return c * std::pow(x, p - a);
  };
  const auto mono = [dpow](const PolynomialTerm& t, const Vector& x, int i, int j) {
    // derivative order per variable: one for i, one for j (i may equal j), -1 for none
    double v = t.coef;
    for (int k = 0; k < x.size() && v != 0.0; ++k) {
      const int a = (k == i) + (k == j);
      v *= dpow(x[k], t.powers[static_cast<size_t>(k)], a);
    }
    return v;
  };
  return ScalarField(
      box,
      [terms, mono](const Vector& x) {
        double v = 0.0;
        for (const auto& t : terms) v += mono(t, x, -1, -1);
        return v;
      },
      [terms, mono, n](const Vector& x) {
        Vector g = Vector::Zero(n);
        for (const auto& t : terms)
          for (int i = 0; i < n; ++i) g[i] += mono(t, x, i, -1);
        return g;
      },
      [terms, mono, n](const Vector& x) {
        Matrix H = Matrix::Zero(n, n);
        for (const auto& t : terms)
          for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) H(i, j) += mono(t, x, i, j);
        return Matrix(H.selfadjointView<Eigen::Upper>());
      });
}

ScalarField scalar_field_from_json(const Json& j, const std::string& what) {
  try {
    require(j.is_object(), ErrorCode::kInvalidArgument, what + " must be an object");
    if (j.contains("quadratic")) {
      const Matrix Q = matrix_from_json(j.at("quadratic"), what + ".quadratic");
      require(Q.rows() == Q.cols(), ErrorCode::kDimensionMismatch, what + ": Q must be square");
      const Matrix Qs = 0.5 * (Q + Q.transpose());
      return ScalarField(
          box_from_json(j, static_cast<int>(Q.rows()), what),
          [Qs](const Vector& x) { return 0.5 * x.dot(Qs * x); },
          [Qs](const Vector& x) -> Vector { return Qs * x; }, [Qs](const Vector&) { return Qs; });
    }
    std::vector<PolynomialTerm> terms;
    int n = -1;
    for (const auto& row : j.at("terms")) {
      require(row.is_array() && row.size() >= 2, ErrorCode::kInvalidArgument,
              what + ": each term is [coef, p_1, ..., p_n]");
      PolynomialTerm t;
      t.coef = row.at(0).get<double>();
      for (size_t k = 1; k < row.size(); ++k) t.powers.push_back(row.at(k).get<int>());
      if (n < 0) n = static_cast<int>(t.powers.size());
      require(static_cast<int>(t.powers.size()) == n, ErrorCode::kDimensionMismatch,
              what + ": terms disagree on the dimension");
      terms.push_back(t);
    }
    if (n < 0) n = j.contains("lower") ? static_cast<int>(j.at("lower").size()) : 1;
    return polynomial_field(terms, box_from_json(j, n, what));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, what + ": " + e.what());
  }
}

models::ModelEntry model_from_json(const Json& j, const std::vector<models::ModelEntry>& builtins) {
  try {
    return parse_entry(j, builtins);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("model description: ") + e.what());
  }
}

std::vector<models::ModelEntry> load_model_file(const fs::path& path,
                                                const std::vector<models::ModelEntry>& builtins) {
  const Json j = parse_json(read_file(path), path.string());
  std::vector<models::ModelEntry> out;
  if (j.is_object() && j.contains("models")) {
    for (const auto& m : j.at("models")) out.push_back(model_from_json(m, builtins));
  } else {
    out.push_back(model_from_json(j, builtins));
  }
  return out;
}

std::vector<models::ModelEntry> registry_with_user_models(const std::string& path_list) {
  auto reg = models::builtin_registry();
  const auto builtins = reg;
  std::set<std::string> names;
  for (const auto& e : reg) names.insert(e.name);
  for (const auto& item : split(path_list, ':')) {
    std::vector<fs::path> files;
    if (fs::is_directory(item)) {
      for (const auto& de : fs::directory_iterator(item)) {
        if (de.path().extension() == ".json") files.push_back(de.path());
      }
      std::sort(files.begin(), files.end());
    } else if (fs::exists(item)) {
      files.push_back(item);
    } else {
      fail(ErrorCode::kInvalidArgument, "model path entry does not exist: " + item);
    }
    for (const auto& f : files) {
      for (auto& e : load_model_file(f, builtins)) {
        if (!names.insert(e.name).second) {
          fail(ErrorCode::kInvalidArgument, "duplicate model name '" + e.name + "' in " + f.string());
        }
        reg.push_back(std::move(e));
      }
    }
  }
  return reg;
}

std::string trajectory_csv(const dynamics::Trajectory& traj) {
  traj.validate();
  std::string out = "t";
  const auto n = traj.states.empty() ? 0 : traj.states.front().size();
  const auto m = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  const auto p = traj.outputs.empty() ? 0 : traj.outputs.front().size();
  for (Eigen::Index i = 0; i < n; ++i) out += ",x_" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < m; ++i) out += ",u_" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < p; ++i) out += ",y_" + std::to_string(i + 1);
  out += ",S,supply\n";
  const auto S = traj.monitors.find("storage");
  const auto W = traj.monitors.find("supply");
  for (size_t k = 0; k < traj.size(); ++k) {
    out += format_shortest(traj.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) out += "," + format_shortest(traj.states[k][i]);
    for (Eigen::Index i = 0; i < m; ++i) out += "," + format_shortest(traj.inputs[k][i]);
    for (Eigen::Index i = 0; i < p; ++i) out += "," + format_shortest(traj.outputs[k][i]);
    out += ",";
    if (S != traj.monitors.end()) out += format_shortest(S->second[k]);
    out += ",";
    if (W != traj.monitors.end()) out += format_shortest(W->second[k]);
    out += "\n";
  }
  return out;
}

std::string probe_csv(const geometry::ProbeRecord& rec) {
  std::string out = "t";
  const auto p = rec.dy.empty() ? 0 : rec.dy.front().size();
  for (Eigen::Index i = 0; i < p; ++i) out += ",dy_" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < p; ++i) out += ",yd_" + std::to_string(i + 1);
  out += ",gap\n";
  for (size_t k = 0; k < rec.times.size(); ++k) {
    out += format_shortest(rec.times[k]);
    for (Eigen::Index i = 0; i < p; ++i) out += "," + format_shortest(rec.dy[k][i]);
    for (Eigen::Index i = 0; i < p; ++i) out += "," + format_shortest(rec.yd[k][i]);
    out += "," + format_shortest(rec.gap[k]) + "\n";
  }
  return out;
}

}  // namespace recipkit::io
