#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recipkit/core_types.hpp"
#include "recipkit/dynamics.hpp"
#include "recipkit/geometry.hpp"
#include "recipkit/models.hpp"

// JSON system descriptions, JSON reports and CSV data files.

namespace recipkit::io {

using Json = nlohmann::ordered_json;

/// 17 significant digits, for reports.
std::string format_number(double v);
/// Shortest representation that round-trips, for CSV.
std::string format_shortest(double v);

/// Deterministic dump: keys in insertion order, numbers at 17 significant digits,
/// non-finite numbers as null.
std::string dump_json(const Json& j, int indent = 2);

/// Writes to a temporary file next to `path`, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
/// Throws kInvalidArgument with the parser's diagnostic.
Json parse_json(const std::string& text, const std::string& origin = "input");

Json to_json(const Matrix& M);
Json to_json(const Vector& v);
Json to_json(const geometry::Christoffel& gamma);
Matrix matrix_from_json(const Json& j, const std::string& what);
Vector vector_from_json(const Json& j, const std::string& what);

/// sum_t coef_t prod_i x_i^{powers_t[i]}.
struct PolynomialTerm {
  double coef = 0.0;
  std::vector<int> powers;
};

ScalarField polynomial_field(const std::vector<PolynomialTerm>& terms, const BoxDomain& box);

/// {"terms": [[coef, p_1, ..., p_n], ...], "lower": [...], "upper": [...]} or
/// {"quadratic": Q, "lower": [...], "upper": [...]} for x^T Q x / 2.
ScalarField scalar_field_from_json(const Json& j, const std::string& what);

/// One model description. "kind" is linear, nonlinear, hessian_pseudo_gradient or
/// port_hamiltonian; {"model": NAME} aliases a built-in.
models::ModelEntry model_from_json(const Json& j, const std::vector<models::ModelEntry>& builtins);

/// A file holding one description or {"models": [...]}.
std::vector<models::ModelEntry> load_model_file(const std::filesystem::path& path,
                                                const std::vector<models::ModelEntry>& builtins);

/// Built-ins plus every file (or *.json in every directory) on a ':'-separated path
/// list. Duplicate names throw kInvalidArgument.
std::vector<models::ModelEntry> registry_with_user_models(const std::string& path_list);

/// Header t, x_1..x_n, u_1..u_m, y_1..y_m, S, supply. S is the "storage" monitor, or
/// empty when the trajectory has none.
std::string trajectory_csv(const dynamics::Trajectory& traj);
/// Header t, dy_1.., yd_1.., gap.
std::string probe_csv(const geometry::ProbeRecord& rec);

}  // namespace recipkit::io
