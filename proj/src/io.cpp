#include "varlasso/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace varlasso {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\r')) ++end;
    if (end == begin || *end != '\0' || errno == ERANGE) throw FormatError("bad number '" + s + "'");
    return v;
}

std::vector<double> flatten(const Matrix& M) {
    std::vector<double> out;
    out.reserve(std::size_t(M.size()));
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) out.push_back(M(i, j));
    }
    return out;
}

Matrix unflatten(const json& arr, Index rows, Index cols, const char* what) {
    if (!arr.is_array() || Index(arr.size()) != rows * cols) {
        throw FormatError(std::string(what) + ": expected " + std::to_string(rows * cols) + " values");
    }
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            const auto& v = arr[std::size_t(i * cols + j)];
            if (!v.is_number()) throw FormatError(std::string(what) + ": non-numeric entry");
            M(i, j) = v.get<double>();
        }
    }
    return M;
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what());
    }
}

Index get_count(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0) {
        throw FormatError(std::string("missing or invalid '") + key + "'");
    }
    return Index(j[key].get<long long>());
}

}  // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
}

fs::path meta_path(const fs::path& csv) {
    fs::path p = csv;
    return p.replace_extension(".meta.json");
}

fs::path innovations_path(const fs::path& csv) {
    fs::path p = csv;
    return p.replace_extension(".innovations.csv");
}

std::string matrix_to_csv(const Matrix& M, const std::string& prefix) {
    std::string out;
    for (Index j = 0; j < M.cols(); ++j) {
        if (j) out += ',';
        out += prefix + std::to_string(j + 1);
    }
    out += '\n';
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) {
            if (j) out += ',';
            out += format_double(M(i, j));
        }
        out += '\n';
    }
    return out;
}

Matrix matrix_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const Index cols = Index(split(line, ',').size());
    if (cols == 0) throw FormatError("CSV header has no columns");
    std::vector<double> values;
    Index rows = 0;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (Index(cells.size()) != cols) {
            throw FormatError("CSV row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(cols));
        }
        for (const auto& c : cells) values.push_back(parse_double(c));
        ++rows;
    }
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) M(i, j) = values[std::size_t(i * cols + j)];
    }
    return M;
}

void save_dataset(const Dataset& data, const fs::path& csv) {
    data.validate();
    write_file(csv, matrix_to_csv(data.observations()));
    ordered_json meta;
    meta["k"] = data.k;
    meta["p"] = data.p;
    meta["T"] = data.T;
    write_file(meta_path(csv), meta.dump(2) + "\n");
    if (data.innovations) {
        write_file(innovations_path(csv), matrix_to_csv(*data.innovations, "e"));
    } else if (fs::exists(innovations_path(csv))) {
        fs::remove(innovations_path(csv));
    }
}

Dataset load_dataset(const fs::path& csv) {
    const json meta = parse_json(read_file(meta_path(csv)));
    Dataset d;
    d.k = get_count(meta, "k");
    d.p = get_count(meta, "p");
    d.T = get_count(meta, "T");
    const Matrix all = matrix_from_csv(read_file(csv));
    if (all.cols() != d.k || all.rows() != d.p + d.T) {
        throw FormatError("dataset " + csv.string() + " does not match its metadata");
    }
    d.initial = all.topRows(d.p);
    d.path = all.bottomRows(d.T);
    if (fs::exists(innovations_path(csv))) {
        Matrix e = matrix_from_csv(read_file(innovations_path(csv)));
        if (e.rows() != d.T || e.cols() != d.k) throw FormatError("innovations file has the wrong shape");
        d.innovations = std::move(e);
    }
    try {
        d.validate();
    } catch (const Error& e) {
        throw FormatError(e.what());
    }
    return d;
}

std::string model_to_json(const VarModel& model) {
    ordered_json j;
    j["k"] = model.k();
    j["p"] = model.p();
    j["coefficients"] = flatten(model.coefficients());
    j["sigma"] = flatten(model.sigma());
    return j.dump(2) + "\n";
}

VarModel model_from_json(const std::string& text) {
    const json j = parse_json(text);
    const Index k = get_count(j, "k");
    const Index p = get_count(j, "p");
    if (k < 1 || p < 1) throw FormatError("model needs k, p >= 1");
    if (!j.contains("coefficients") || !j.contains("sigma")) throw FormatError("model needs coefficients and sigma");
    for (const auto& [key, _] : j.items()) {
        if (key != "k" && key != "p" && key != "coefficients" && key != "sigma") {
            throw FormatError("unknown model key '" + key + "'");
        }
    }
    const Matrix coef = unflatten(j["coefficients"], k, k * p, "coefficients");
    const Matrix sigma = unflatten(j["sigma"], k, k, "sigma");
    return model_from_coefficients(coef, p, sigma);
}

std::string system_fit_to_json(const SystemFit& fit) {
    ordered_json j;
    j["estimator"] = std::string(tag_name(fit.tag));
    j["k"] = fit.k;
    j["p"] = fit.p;
    ordered_json lambdas = ordered_json::array();
    for (double l : fit.lambdas()) lambdas.push_back(std::isfinite(l) ? ordered_json(l) : ordered_json());
    j["lambda_per_equation"] = std::move(lambdas);
    j["beta"] = flatten(fit.coefficients());
    ordered_json sets = ordered_json::array();
    for (const auto& e : fit.equations) sets.push_back(e.active_set);
    j["active_sets"] = std::move(sets);
    ordered_json feasible = ordered_json::array();
    for (const auto& e : fit.equations) feasible.push_back(e.feasible);
    j["feasible"] = std::move(feasible);
    return j.dump(2) + "\n";
}

SystemFit system_fit_from_json(const std::string& text) {
    const json j = parse_json(text);
    SystemFit fit;
    if (!j.contains("estimator") || !j["estimator"].is_string()) throw FormatError("fit needs 'estimator'");
    try {
        fit.tag = parse_tag(j["estimator"].get<std::string>());
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
    fit.k = get_count(j, "k");
    fit.p = get_count(j, "p");
    const Matrix beta = unflatten(j.value("beta", json()), fit.k, fit.k * fit.p, "beta");
    const json lambdas = j.value("lambda_per_equation", json::array());
    const json feasible = j.value("feasible", json::array());
    for (Index i = 0; i < fit.k; ++i) {
        EquationFit e;
        e.tag = fit.tag;
        e.beta = beta.row(i).transpose();
        e.active_set = support_of(e.beta);
        e.df = double(e.active_set.size());
        e.lambda_selected = std::numeric_limits<double>::quiet_NaN();
        if (i < Index(lambdas.size()) && lambdas[std::size_t(i)].is_number()) {
            e.lambda_selected = lambdas[std::size_t(i)].get<double>();
        }
        if (i < Index(feasible.size()) && feasible[std::size_t(i)].is_boolean()) {
            e.feasible = feasible[std::size_t(i)].get<bool>();
        }
        fit.equations.push_back(std::move(e));
    }
    return fit;
}

}  // namespace varlasso
