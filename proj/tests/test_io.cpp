#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "recipkit/error.hpp"
#include "recipkit/io.hpp"
#include "recipkit/linear_analysis.hpp"
#include "recipkit/nonlinear_reciprocity.hpp"

using namespace recipkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("recipkit_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 1e-300}) {
    CHECK(std::stod(io::format_number(x)) == x);
    CHECK(std::stod(io::format_shortest(x)) == x);
  }
  CHECK(io::format_shortest(0.1) == "0.1");
  CHECK(io::format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("deterministic json dump") {
  io::Json j;
  j["b"] = 1.0 / 3.0;
  j["a"] = {1.0, 2.0};
  j["nan"] = std::numeric_limits<double>::quiet_NaN();
  j["s"] = "x";
  const std::string out = io::dump_json(j);
  CHECK(out.find("\"b\"") < out.find("\"a\""));
  CHECK(out.find("0.33333333333333331") != std::string::npos);
  CHECK(out.find("\"nan\": null") != std::string::npos);
  CHECK(out == io::dump_json(j));
  const io::Json back = io::parse_json(out);
  CHECK(back["b"].get<double>() == 1.0 / 3.0);
}

TEST_CASE("malformed json is an input error") {
  try {
    io::parse_json("{\"kind\": ", "bad.json");
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
    CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
  }
}

TEST_CASE("atomic write replaces content and leaves no temporaries") {
  const fs::path d = scratch("atomic");
  const fs::path f = d / "sub" / "report.json";
  io::write_file_atomic(f, "first");
  io::write_file_atomic(f, "second");
  CHECK(io::read_file(f) == "second");
  int count = 0;
  for (const auto& e : fs::recursive_directory_iterator(d)) count += e.is_regular_file();
  CHECK(count == 1);
}

TEST_CASE("matrix json round-trip and shape errors") {
  Matrix M(2, 3);
  M << 1, 2, 3, 4, 5, 6.5;
  CHECK(io::matrix_from_json(io::to_json(M), "M") == M);
  CHECK_THROWS_AS(io::matrix_from_json(io::Json::parse("[[1,2],[3]]"), "M"), Error);
  CHECK_THROWS_AS(io::matrix_from_json(io::Json::parse("[[1,\"a\"]]"), "M"), Error);
  CHECK_THROWS_AS(io::vector_from_json(io::Json::parse("{}"), "v"), Error);
}

TEST_CASE("polynomial field derivatives match hand values") {
  // 2 x^3 y - y^2 / 2
  const ScalarField f = io::polynomial_field({{2.0, {3, 1}}, {-0.5, {0, 2}}}, BoxDomain::cube(2, -3, 3));
  const Vector x = v2(1.5, -0.7);
  CHECK(f.value(x) == doctest::Approx(2 * 3.375 * -0.7 - 0.245));
  const Vector g = f.gradient(x);
  CHECK(g[0] == doctest::Approx(6 * 2.25 * -0.7));
  CHECK(g[1] == doctest::Approx(2 * 3.375 + 0.7));
  const Matrix H = f.hessian(x);
  CHECK(H(0, 0) == doctest::Approx(12 * 1.5 * -0.7));
  CHECK(H(0, 1) == doctest::Approx(6 * 2.25));
  CHECK(H(1, 0) == doctest::Approx(6 * 2.25));
  CHECK(H(1, 1) == doctest::Approx(-1.0));
}

TEST_CASE("scalar field json forms") {
  const auto q = io::scalar_field_from_json(
      io::Json::parse(R"({"quadratic": [[2, 1], [1, 3]], "lower": [-1, -1], "upper": [1, 1]})"), "Q");
  CHECK(q.value(v2(1, 1)) == doctest::Approx(3.5));
  const auto t = io::scalar_field_from_json(io::Json::parse(R"({"terms": [[0.5, 2], [0.25, 4]]})"), "K");
  CHECK(t.dim() == 1);
  CHECK(t.hessian(Vector::Constant(1, 2.0))(0, 0) == doctest::Approx(1 + 3 * 4.0));
  CHECK_THROWS_AS(io::scalar_field_from_json(io::Json::parse(R"({"terms": [[1, 2], [1, 1, 1]]})"), "K"),
                  Error);
}

TEST_CASE("linear model from json") {
  const auto reg = models::builtin_registry();
  const auto e = io::model_from_json(io::Json::parse(R"({
    "name": "rlc", "kind": "linear",
    "A": [[-1, 0], [0, -2]], "B": [[1], [1]], "C": [[1, 1]],
    "G": [[1, 0], [0, 1]]})"),
                                     reg);
  CHECK(e.name == "rlc");
  REQUIRE(e.linear.has_value());
  CHECK(e.linear->D.rows() == 1);
  CHECK(linear::check_linear_reciprocity(*e.linear, e.G, e.sigma).reciprocal);
  CHECK_THROWS_AS(io::model_from_json(io::Json::parse(R"({"kind": "linear", "A": [[1]], "B": [[1], [2]],
    "C": [[1]]})"),
                                      reg),
                  Error);
  CHECK_THROWS_AS(io::model_from_json(io::Json::parse(R"({"kind": "quantum"})"), reg), Error);
}

TEST_CASE("hessian model from json") {
  const auto reg = models::builtin_registry();
  const auto e = io::model_from_json(io::Json::parse(R"({
    "name": "cubic", "kind": "hessian_pseudo_gradient",
    "K": {"terms": [[0.5, 2], [0.0833333333333333333, 4]], "lower": [-2], "upper": [2]},
    "P": {"terms": [[0.5, 2]], "lower": [-2], "upper": [2]},
    "g": [[1]]})"),
                                     reg);
  REQUIRE(e.hessian);
  const auto sys = e.hessian();
  const Vector x = Vector::Constant(1, 0.5);
  CHECK(sys.metric()(x)(0, 0) == doctest::Approx(1.25));
  CHECK(e.x0.size() == 1);
}

TEST_CASE("alias of a built-in model") {
  const auto reg = models::builtin_registry();
  const auto e = io::model_from_json(io::Json::parse(R"({"model": "swing", "name": "my-swing"})"), reg);
  CHECK(e.name == "my-swing");
  CHECK(e.kind == models::find_model(reg, "swing").kind);
  CHECK_THROWS_AS(io::model_from_json(io::Json::parse(R"({"model": "nope"})"), reg), Error);
}

TEST_CASE("user registry and duplicates") {
  const fs::path d = scratch("registry");
  io::write_file_atomic(d / "a.json", R"({"models": [{"name": "one", "kind": "linear",
    "A": [[-1]], "B": [[1]], "C": [[1]]}]})");
  const auto reg = io::registry_with_user_models(d.string());
  CHECK(reg.size() == models::builtin_registry().size() + 1);
  CHECK(models::find_model(reg, "one").kind == models::ModelKind::kLinear);

  io::write_file_atomic(d / "b.json", R"({"name": "swing", "model": "swing"})");
  try {
    io::registry_with_user_models(d.string());
    FAIL("expected a duplicate error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
  CHECK_THROWS_AS(io::registry_with_user_models((d / "missing.json").string()), Error);
}

TEST_CASE("trajectory csv") {
  dynamics::Trajectory t;
  t.times = {0.0, 0.5};
  t.states = {v2(1, 2), v2(0.5, 0.25)};
  t.inputs = {Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)};
  t.outputs = {Vector::Constant(1, 3.0), Vector::Constant(1, 0.1)};
  t.monitors["storage"] = {2.5, 0.15625};
  const std::string csv = io::trajectory_csv(t);
  CHECK(csv == "t,x_1,x_2,u_1,y_1,S,supply\n0,1,2,0,3,2.5,\n0.5,0.5,0.25,1,0.1,0.15625,\n");
}
