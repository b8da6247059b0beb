#pragma once

#include <filesystem>
#include <string>

#include "varlasso/estimators.hpp"
#include "varlasso/var.hpp"

namespace varlasso {

namespace fs = std::filesystem;

/// Dataset CSV: header y1..yk, then the p initial rows followed by the T path
/// rows. Values are written with 17 significant digits so they reload
/// exactly. Alongside `csv`:
///   <stem>.meta.json         {"k", "p", "T"}
///   <stem>.innovations.csv   T x k, only when the dataset carries them
void save_dataset(const Dataset& data, const fs::path& csv);
/// Throws FormatError on malformed or inconsistent files.
Dataset load_dataset(const fs::path& csv);

fs::path meta_path(const fs::path& csv);
fs::path innovations_path(const fs::path& csv);

/// Matrix as CSV with the given column names (or y1..yn when empty).
std::string matrix_to_csv(const Matrix& M, const std::string& prefix = "y");
Matrix matrix_from_csv(const std::string& text);

/// {"k", "p", "coefficients": k x kp row-major, "sigma": k x k row-major}.
std::string model_to_json(const VarModel& model);
VarModel model_from_json(const std::string& text);

/// {"estimator", "k", "p", "lambda_per_equation", "beta" (k x kp row-major), "active_sets"}.
std::string system_fit_to_json(const SystemFit& fit);
SystemFit system_fit_from_json(const std::string& text);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& text);

}  // namespace varlasso
