#include "cli.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "varlasso/estimators.hpp"
#include "varlasso/io.hpp"
#include "varlasso/mc.hpp"
#include "varlasso/theory.hpp"
#include "varlasso/var.hpp"

namespace varlasso::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExitWith : std::runtime_error {
    int code;
    ExitWith(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

const std::vector<std::string> kCommon = {"seed", "threads", "out", "format"};

const std::map<std::string, std::vector<std::string>> kCommandKeys = {
    {"simulate", {"experiment", "k", "T", "model", "burn_in"}},
    {"fit", {"data", "estimators", "lambda", "truth"}},
    {"forecast", {"data", "fit"}},
    {"mc", {"experiment", "k", "T", "reps", "estimators", "lambda", "theory"}},
    {"diag", {"data", "truth", "experiment", "k", "T", "reps", "lambda", "q", "A"}},
    {"paper-tables", {"experiments", "reps", "estimators"}},
};

// Merged settings: config file first, then command-line flags on top.
class Settings {
public:
    void set(const std::string& key, json value) { values_[key] = std::move(value); }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback = "") const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second.is_string()) return it->second.get<std::string>();
        return it->second.dump();
    }
    long long integer(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second.is_number_integer()) return it->second.get<long long>();
        if (it->second.is_string()) {
            const std::string s = it->second.get<std::string>();
            std::size_t used = 0;
            try {
                const long long v = std::stoll(s, &used);
                if (used == s.size()) return v;
            } catch (const std::exception&) {
            }
        }
        throw ConfigError("'" + key + "' must be an integer");
    }
    double number(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second.is_number()) return it->second.get<double>();
        if (it->second.is_string()) {
            const std::string s = it->second.get<std::string>();
            std::size_t used = 0;
            try {
                const double v = std::stod(s, &used);
                if (used == s.size()) return v;
            } catch (const std::exception&) {
            }
        }
        throw ConfigError("'" + key + "' must be a number");
    }
    bool flag(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return false;
        if (it->second.is_boolean()) return it->second.get<bool>();
        const std::string s = str(key);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw ConfigError("'" + key + "' must be a boolean");
    }

private:
    std::map<std::string, json> values_;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<EstimatorTag> estimator_list(const Settings& s, const std::string& fallback) {
    std::vector<EstimatorTag> tags;
    std::string raw = fallback;
    if (s.has("estimators")) {
        raw.clear();
        const std::string v = s.str("estimators");
        // Accept a JSON array from a config file as well as a comma list.
        if (!v.empty() && v.front() == '[') {
            for (const auto& e : json::parse(v)) raw += e.get<std::string>() + ",";
        } else {
            raw = v;
        }
    }
    if (raw == "all") return {std::begin(kAllEstimators), std::end(kAllEstimators)};
    for (const auto& name : split_list(raw)) {
        try {
            tags.push_back(parse_tag(name));
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
    }
    if (tags.empty()) throw ConfigError("no estimators given");
    return tags;
}

char experiment_of(const Settings& s) {
    const std::string e = s.str("experiment");
    if (e.size() != 1 || e[0] < 'A' || e[0] > 'D') throw ConfigError("--experiment must be one of A, B, C, D");
    return e[0];
}

Index positive(const Settings& s, const std::string& key, long long fallback) {
    const long long v = s.integer(key, fallback);
    if (v < 1) throw ConfigError("'" + key + "' must be >= 1");
    return Index(v);
}

std::uint64_t seed_of(const Settings& s) {
    const long long v = s.integer("seed", 1);
    if (v < 0) throw ConfigError("'seed' must be >= 0");
    return std::uint64_t(v);
}

fs::path out_dir(const Settings& s) { return fs::path(s.str("out", ".")); }

std::string format_of(const Settings& s) {
    const std::string f = s.str("format", "csv");
    if (f != "csv" && f != "json") throw ConfigError("--format must be csv or json");
    return f;
}

EstimatorOptions estimator_options(const Settings& s) {
    EstimatorOptions opts;
    if (s.has("lambda")) {
        const double l = s.number("lambda", 0.0);
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("--lambda must be finite and >= 0");
        opts.fixed_lambda = l;
    }
    return opts;
}

VarModel load_model(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    try {
        return model_from_json(text);
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
}

Dataset load_data(const Settings& s) {
    if (!s.has("data")) throw ConfigError("--data is required");
    try {
        return load_dataset(s.str("data"));
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(); }

// ---------------------------------------------------------------------------

int cmd_simulate(const Settings& s, std::ostream& out) {
    const Index T = positive(s, "T", 100);
    std::optional<VarModel> model;
    if (s.has("model")) {
        if (s.has("experiment")) throw ConfigError("give either --model or --experiment, not both");
        model = load_model(s.str("model"));
    } else if (s.has("experiment")) {
        try {
            model = make_dgp(experiment_of(s), positive(s, "k", 10)).model;
        } catch (const UnknownCombination& e) {
            throw ConfigError(e.what());
        }
    } else {
        throw ConfigError("simulate needs --experiment or --model");
    }
    std::optional<Index> burn;
    if (s.has("burn_in")) {
        const long long b = s.integer("burn_in", 0);
        if (b < 0) throw ConfigError("'burn_in' must be >= 0");
        burn = Index(b);
    }
    const Dataset data = simulate(*model, T, seed_of(s), burn);
    const fs::path dir = out_dir(s);
    save_dataset(data, dir / "data.csv");
    write_file(dir / "truth.json", model_to_json(*model));
    out << "wrote " << (dir / "data.csv").string() << " (k=" << data.k << ", p=" << data.p << ", T=" << data.T
        << ")\n";
    return kOk;
}

int cmd_fit(const Settings& s, std::ostream& out) {
    const Dataset data = load_data(s);
    const auto tags = estimator_list(s, "lasso");
    std::optional<SparsityInfo> truth;
    if (s.has("truth")) {
        const VarModel m = load_model(s.str("truth"));
        if (m.k() != data.k || m.p() != data.p) throw ConfigError("truth model does not match the data");
        truth = SparsityInfo::from_coefficients(m.coefficients());
    }
    for (EstimatorTag t : tags) {
        if (t == EstimatorTag::oracle_ols && !truth) throw ConfigError("oracle_ols needs --truth");
    }
    const EstimatorOptions opts = estimator_options(s);
    const RegressionProblem problem = stack(data);
    bool any_infeasible = false;
    for (EstimatorTag t : tags) {
        const SystemFit fit = fit_system(problem, t, truth ? &*truth : nullptr, opts);
        const fs::path path = out_dir(s) / ("fit_" + std::string(tag_name(t)) + ".json");
        write_file(path, system_fit_to_json(fit));
        out << tag_name(t) << ":\n";
        for (std::size_t i = 0; i < fit.equations.size(); ++i) {
            const auto& e = fit.equations[i];
            out << "  equation " << i + 1 << ": ";
            if (!e.feasible) {
                out << "infeasible (" << e.infeasible_reason << ")\n";
                continue;
            }
            out << "lambda=" << (std::isfinite(e.lambda_selected) ? num(e.lambda_selected) : "-")
                << " active=" << e.active_set.size() << "\n";
        }
        if (!fit.feasible()) any_infeasible = true;
    }
    if (any_infeasible) throw ExitWith(kEstimatorError, "at least one estimator was infeasible");
    return kOk;
}

int cmd_forecast(const Settings& s, std::ostream& out) {
    const Dataset data = load_data(s);
    if (!s.has("fit")) throw ConfigError("--fit is required");
    SystemFit fit;
    try {
        fit = system_fit_from_json(read_file(s.str("fit")));
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    if (fit.k != data.k || fit.p != data.p) throw ConfigError("fit does not match the data dimensions");
    if (!fit.feasible()) throw ExitWith(kEstimatorError, "fit is marked infeasible");
    const Vector f = forecast_one_step(fit.coefficients(), data);
    write_file(out_dir(s) / "forecast.csv", matrix_to_csv(f.transpose()));
    for (Index i = 0; i < f.size(); ++i) out << (i ? "," : "") << num(f(i));
    out << "\n";
    return kOk;
}

ExperimentSpec experiment_spec(const Settings& s) {
    ExperimentSpec spec;
    spec.experiment = experiment_of(s);
    spec.k = positive(s, "k", 10);
    spec.T = positive(s, "T", 100);
    spec.n_reps = positive(s, "reps", 100);
    spec.base_seed = seed_of(s);
    spec.threads = int(positive(s, "threads", 1));
    spec.estimators = estimator_list(s, "all");
    spec.theory_checks = s.flag("theory");
    spec.options = estimator_options(s);
    try {
        spec.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

std::string report_name(const ExperimentSpec& spec) {
    return std::string(1, spec.experiment) + "_" + std::to_string(spec.k) + "_" + std::to_string(spec.T);
}

int cmd_mc(const Settings& s, std::ostream& out) {
    const std::string format = format_of(s);
    const ExperimentSpec spec = experiment_spec(s);
    const McReport report = run_experiment(spec);
    const fs::path path = out_dir(s) / (report_name(spec) + "." + format);
    write_file(path, format == "csv" ? report.to_csv() : report.to_json());
    write_file(out_dir(s) / (report_name(spec) + ".first_coef.csv"), report.first_coef_csv());
    out << "wrote " << path.string() << " (" << spec.n_reps << " reps, " << std::fixed << std::setprecision(2)
        << report.runtime_seconds << " s)\n"
        << std::defaultfloat;
    return kOk;
}

// Diagnostics for one dataset with known truth.
ordered_json diagnose(const Dataset& data, const VarModel& model, const TheoryParams& params, double lambda) {
    const SparsityInfo truth = SparsityInfo::from_coefficients(model.coefficients());
    const RegressionProblem problem = stack(data);
    const Matrix gamma = population_gamma(model);
    const Matrix coef = model.coefficients();
    const double KT = k_T(data.T, data.k, data.p, params.sigma_T);
    const EventFlags ev = event_flags(data, model, truth, params);

    ordered_json j;
    j["events"] = {{"b_t", ev.b_t},
                   {"c_t", ev.c_t},
                   {"d_t", ev.d_t},
                   {"max_cross", ev.max_cross},
                   {"max_cov_dev", ev.max_cov_dev},
                   {"max_yy", ev.max_yy},
                   {"b_threshold", ev.b_threshold},
                   {"c_threshold", ev.c_threshold},
                   {"d_threshold", ev.d_threshold}};

    EstimatorOptions opts;
    opts.fixed_lambda = lambda;
    opts.solver.tol = 1e-10;
    ordered_json eqs = ordered_json::array();
    for (Index i = 0; i < data.k; ++i) {
        ordered_json e;
        const Vector bstar = coef.row(i).transpose();
        const EquationFit lasso = fit_lasso_bic(problem, i, opts);
        const Thm1Report r = thm1_rhs_check(problem, lasso.beta, bstar, lambda);
        const double tol = 10.0 * opts.solver.tol;
        auto iq = [&](const InequalityCheck& c) {
            return ordered_json{{"lhs", c.lhs}, {"rhs", c.rhs}, {"slack", c.slack()}, {"holds", c.holds(tol)}};
        };
        e["thm1"] = {{"iq1", iq(r.iq1)}, {"iq2", iq(r.iq2)}, {"iq3", iq(r.iq3)}};

        const Index si = truth.s[std::size_t(i)];
        const double kap = params.kappa_gamma_sq[std::size_t(i)];
        if (kap > 0.0) {
            const Thm3Bounds b = thm3_bounds(si, lambda, kap, params.q);
            e["thm3"] = {{"kappa_sq", kap}, {"pred_bound", b.pred_bound}, {"est_bound", b.est_bound}};
        }
        double phi_min = std::numeric_limits<double>::quiet_NaN();
        if (si > 0) {
            const auto& J = truth.support[std::size_t(i)];
            phi_min = min_eigenvalue(sub_matrix(gamma, J, J));
            const double lt = lambda_oracle_ols(data.T, si, params.sigma_T);
            e["oracle_ols_bound"] = number_or_null(phi_min > 0 ? oracle_ols_bound(si, lt, phi_min, params.q) : NAN);
        }
        if (si > 0 && phi_min > 0.0) {
            try {
                const SignRecoveryReport sr = sign_recovery_conditions(problem, i, data.innovations->col(i),
                                                                       lasso.beta, bstar, lambda, KT, phi_min,
                                                                       params.q);
                e["sign_recovery"] = {{"l1_error", sr.l1_error},
                                      {"beta_min_premise", sr.beta_min_premise},
                                      {"adalasso1", iq(sr.adalasso1)},
                                      {"adalasso2", iq(sr.adalasso2)},
                                      {"support_retained", sr.support_retained},
                                      {"foc1", sr.foc1},
                                      {"foc1_margin", number_or_null(sr.foc1_margin)},
                                      {"foc2", sr.foc2},
                                      {"foc2_margin", number_or_null(sr.foc2_margin)},
                                      {"foc_verdict", sr.foc_verdict()}};
            } catch (const SingularSubGram& ex) {
                e["sign_recovery"] = {{"error", ex.what()}};
            }
        }
        eqs.push_back(std::move(e));
    }
    j["equations"] = std::move(eqs);
    return j;
}

int cmd_diag(const Settings& s, std::ostream& out) {
    const double q = s.number("q", 0.5);
    const double A = s.number("A", 1.0);
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("'q' must be in (0,1)");
    if (!(A > 0.0)) throw ConfigError("'A' must be > 0");

    std::vector<Dataset> datasets;
    std::optional<VarModel> model;
    if (s.has("data")) {
        if (!s.has("truth")) throw ConfigError("diag on a dataset needs --truth");
        model = load_model(s.str("truth"));
        datasets.push_back(load_data(s));
        if (model->k() != datasets[0].k || model->p() != datasets[0].p) {
            throw ConfigError("truth model does not match the data");
        }
        if (!datasets[0].innovations) {
            throw ExitWith(kDiagnosticsError, "dataset has no innovations; diagnostics need simulated data");
        }
    } else if (s.has("experiment")) {
        Dgp dgp = [&] {
            try {
                return make_dgp(experiment_of(s), positive(s, "k", 10));
            } catch (const UnknownCombination& e) {
                throw ConfigError(e.what());
            }
        }();
        model = dgp.model;
        const Index T = positive(s, "T", 100);
        const Index reps = positive(s, "reps", 1);
        for (Index r = 0; r < reps; ++r) datasets.push_back(simulate(*model, T, seed_of(s) + std::uint64_t(r)));
    } else {
        throw ConfigError("diag needs --data with --truth, or --experiment");
    }

    const SparsityInfo truth = SparsityInfo::from_coefficients(model->coefficients());
    const Index T = datasets[0].T;
    const TheoryParams params = make_theory_params(*model, truth, T, q, A);
    double lambda = params.lambda;
    if (s.has("lambda")) lambda = s.number("lambda", lambda);
    if (!(lambda > 0.0)) throw ConfigError("lambda_T is 0 for this model (k = p = 1); pass --lambda");

    ordered_json j;
    j["k"] = model->k();
    j["p"] = model->p();
    j["T"] = T;
    j["lambda_T"] = params.lambda;
    j["lambda_used"] = lambda;
    j["sigma_T"] = params.sigma_T;
    j["K_T"] = k_T(T, model->k(), model->p(), params.sigma_T);
    j["q"] = q;
    j["A"] = A;
    j["A_note"] = "theory constant; bounds involving A are parametric";
    j["thm1_probability_bound"] = thm1_probability_bound(T, model->k(), model->p(), A);
    j["f_norm_sum"] = params.f_norm_sum;
    j["kappa_gamma_sq_sbar"] = params.kappa_gamma_sq_sbar;
    const double z = zeta(q, params.kappa_gamma_sq_sbar, params.f_norm_sum);
    j["zeta"] = z;
    if (T >= 2) j["pi_q"] = pi_q(std::max<Index>(truth.s_bar, 1), model->k(), model->p(), T, z);
    std::vector<double> est;
    for (std::size_t i = 0; i < truth.s.size(); ++i) {
        if (params.kappa_gamma_sq[i] > 0.0) {
            est.push_back(thm3_bounds(truth.s[i], lambda, params.kappa_gamma_sq[i], q).est_bound);
        }
    }
    j["system_bound"] = system_bound(est);
    ordered_json reps = ordered_json::array();
    for (const Dataset& d : datasets) reps.push_back(diagnose(d, *model, params, lambda));
    j["replications"] = std::move(reps);

    const fs::path path = out_dir(s) / "diag.json";
    write_file(path, j.dump(2) + "\n");
    out << "wrote " << path.string() << "\n";
    return kOk;
}

int cmd_paper_tables(const Settings& s, std::ostream& out) {
    const std::string exps = s.str("experiments", "ABCD");
    const Index reps = positive(s, "reps", 100);
    const auto tags = estimator_list(s, "all");
    const int threads = int(positive(s, "threads", 1));
    const EstimatorOptions opts;
    for (char e : exps) {
        if (e < 'A' || e > 'D') throw ConfigError("--experiments takes letters from ABCD");
    }
    for (char e : exps) {
        std::ostringstream table;
        table << "k,T,estimator,true_model_uncovered,true_model_included,share_relevant,n_selected,rmse,rmsfe,"
                 "infeasible\n";
        for (Index k : experiment_dims(e)) {
            for (Index T : {Index(50), Index(100), Index(500)}) {
                ExperimentSpec spec;
                spec.experiment = e;
                spec.k = k;
                spec.T = T;
                spec.n_reps = reps;
                spec.base_seed = seed_of(s);
                spec.estimators = tags;
                spec.threads = threads;
                spec.options = opts;
                const McReport report = run_experiment(spec);
                write_file(out_dir(s) / (report_name(spec) + ".csv"), report.to_csv());
                write_file(out_dir(s) / (report_name(spec) + ".first_coef.csv"), report.first_coef_csv());
                std::istringstream rows(report.to_csv());
                std::string line;
                std::getline(rows, line);  // header
                while (std::getline(rows, line)) table << k << ',' << T << ',' << line << '\n';
                out << "experiment " << e << " k=" << k << " T=" << T << " done\n";
            }
        }
        write_file(out_dir(s) / ("table_" + std::string(1, e) + ".csv"), table.str());
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse VAR estimation by LASSO-type methods"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::map<std::string, std::map<std::string, std::string>> flag_values;
    std::map<std::string, std::map<std::string, CLI::Option*>> flag_options;
    std::map<std::string, std::string> config_paths;
    std::map<std::string, bool> theory_flags;

    for (const auto& [name, keys] : kCommandKeys) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_paths[name], "JSON config file");
        std::vector<std::string> all = kCommon;
        all.insert(all.end(), keys.begin(), keys.end());
        for (const auto& key : all) {
            if (key == "theory") {
                flag_options[name][key] = sub->add_flag("--theory", theory_flags[name], "run theory checks");
                continue;
            }
            std::string flag = key;
            for (char& c : flag) {
                if (c == '_') c = '-';
            }
            flag_options[name][key] = sub->add_option("--" + flag, flag_values[name][key]);
        }
    }

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        Settings settings;
        std::set<std::string> allowed(kCommon.begin(), kCommon.end());
        allowed.insert(kCommandKeys.at(name).begin(), kCommandKeys.at(name).end());
        if (!config_paths[name].empty()) {
            json cfg;
            try {
                cfg = json::parse(read_file(config_paths[name]));
            } catch (const json::exception& e) {
                throw ConfigError(std::string("config: ") + e.what());
            } catch (const FormatError& e) {
                throw ConfigError(e.what());
            }
            if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
            for (const auto& [key, value] : cfg.items()) {
                if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "' for " + name);
                settings.set(key, value.is_array() ? json(value.dump()) : value);
            }
        }
        for (const auto& [key, opt] : flag_options[name]) {
            if (opt->count() == 0) continue;
            if (key == "theory") {
                settings.set(key, theory_flags[name]);
            } else {
                settings.set(key, flag_values[name][key]);
            }
        }

        if (name == "simulate") return cmd_simulate(settings, out);
        if (name == "fit") return cmd_fit(settings, out);
        if (name == "forecast") return cmd_forecast(settings, out);
        if (name == "mc") return cmd_mc(settings, out);
        if (name == "diag") return cmd_diag(settings, out);
        return cmd_paper_tables(settings, out);
    } catch (const ExitWith& e) {
        err << "error: " << e.what() << "\n";
        return e.code;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const MissingInnovations& e) {
        err << "error: " << e.what() << "\n";
        return kDiagnosticsError;
    } catch (const NotStationary& e) {
        err << "model error: " << e.what() << "\n";
        return kModelError;
    } catch (const FormatError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const InvalidArgument& e) {
        err << "model error: " << e.what() << "\n";
        return kModelError;
    } catch (const DimensionMismatch& e) {
        err << "model error: " << e.what() << "\n";
        return kModelError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kEstimatorError;
    } catch (const fs::filesystem_error& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    }
}

}  // namespace varlasso::cli
