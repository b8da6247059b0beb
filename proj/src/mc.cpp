#include "varlasso/mc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace varlasso {

VarModel diagonal_var1(Index k, double a, double sigma2) {
    return VarModel({a * Matrix::Identity(k, k)}, sigma2 * Matrix::Identity(k, k));
}

VarModel experiment_b_model(Index k, double sigma2) {
    if (k % 5 != 0) throw InvalidArgument("experiment B needs k divisible by 5");
    Matrix phi1 = Matrix::Zero(k, k), phi4 = Matrix::Zero(k, k);
    for (Index b = 0; b < k; b += 5) {
        phi1.block(b, b, 5, 5).setConstant(0.15);
        phi4.block(b, b, 5, 5).setConstant(-0.1);
    }
    return VarModel({phi1, Matrix::Zero(k, k), Matrix::Zero(k, k), phi4}, sigma2 * Matrix::Identity(k, k));
}

VarModel experiment_c_model(Index k, double sigma2) {
    const Matrix phi1 = 0.95 * Matrix::Identity(k, k);
    std::vector<Matrix> phis;
    for (int j = 1; j <= 5; ++j) phis.push_back(std::pow(-0.95, j - 1) * phi1);
    return VarModel(std::move(phis), sigma2 * Matrix::Identity(k, k));
}

VarModel experiment_d_model(Index k, double rho, double sigma2) {
    Matrix phi(k, k);
    for (Index i = 0; i < k; ++i) {
        for (Index j = 0; j < k; ++j) {
            const Index d = std::abs(i - j);
            phi(i, j) = (d % 2 == 0 ? 1.0 : -1.0) * std::pow(rho, double(d + 1));
        }
    }
    return VarModel({phi}, sigma2 * Matrix::Identity(k, k));
}

std::vector<Index> experiment_dims(char experiment) {
    switch (experiment) {
        case 'A': return {10, 20, 50, 100};
        case 'B':
        case 'C':
        case 'D': return {10, 20, 50};
        default: return {};
    }
}

Dgp make_dgp(char experiment, Index k) {
    const auto dims = experiment_dims(experiment);
    if (std::find(dims.begin(), dims.end(), k) == dims.end()) {
        throw UnknownCombination("no experiment " + std::string(1, experiment) + " with k=" + std::to_string(k));
    }
    auto build = [&]() -> VarModel {
        switch (experiment) {
            case 'A': return diagonal_var1(k, 0.5);
            case 'B': return experiment_b_model(k);
            case 'C': return experiment_c_model(k);
            default: return experiment_d_model(k);
        }
    };
    VarModel model = build();
    SparsityInfo truth = SparsityInfo::from_coefficients(model.coefficients());
    return {std::move(model), std::move(truth)};
}

double rmse(const std::vector<Matrix>& fits, const Matrix& truth) {
    if (fits.empty()) throw InvalidArgument("rmse: no fits");
    double acc = 0.0;
    for (const auto& f : fits) {
        if (f.rows() != truth.rows() || f.cols() != truth.cols()) throw DimensionMismatch("rmse: shape");
        acc += (f - truth).squaredNorm();
    }
    return std::sqrt(acc / double(fits.size()));
}

double rmsfe(const std::vector<Vector>& forecasts, const std::vector<Vector>& realized, Index k) {
    if (forecasts.empty() || forecasts.size() != realized.size()) {
        throw InvalidArgument("rmsfe: need matching nonempty lists");
    }
    double acc = 0.0;
    for (std::size_t r = 0; r < forecasts.size(); ++r) acc += (forecasts[r] - realized[r]).squaredNorm();
    return std::sqrt(acc / (double(k) * double(forecasts.size())));
}

SelectionOutcome selection_outcome(const SystemFit& fit, const SparsityInfo& truth) {
    if (fit.equations.size() != truth.support.size()) throw DimensionMismatch("selection: equation count");
    SelectionOutcome out{true, true, 0.0, 0};
    Index hits = 0, relevant = 0;
    for (std::size_t i = 0; i < truth.support.size(); ++i) {
        const auto& A = fit.equations[i].active_set;
        const auto& J = truth.support[i];
        out.n_selected += Index(A.size());
        relevant += Index(J.size());
        Index h = 0;
        for (Index j : J) {
            if (std::binary_search(A.begin(), A.end(), j)) ++h;
        }
        hits += h;
        if (h != Index(J.size())) out.included = false;
        if (A != J) out.uncovered = false;
    }
    out.share = relevant > 0 ? double(hits) / double(relevant) : 1.0;
    return out;
}

SelectionMetrics selection_metrics(const std::vector<SystemFit>& fits, const SparsityInfo& truth) {
    if (fits.empty()) throw InvalidArgument("selection_metrics: no fits");
    SelectionMetrics m;
    for (const auto& f : fits) {
        const SelectionOutcome o = selection_outcome(f, truth);
        m.uncovered += o.uncovered;
        m.included += o.included;
        m.share += o.share;
        m.n_selected += double(o.n_selected);
    }
    const double n = double(fits.size());
    m.uncovered /= n;
    m.included /= n;
    m.share /= n;
    m.n_selected /= n;
    return m;
}

void ExperimentSpec::validate() const {
    const auto dims = experiment_dims(experiment);
    if (std::find(dims.begin(), dims.end(), k) == dims.end()) {
        throw UnknownCombination("no experiment " + std::string(1, experiment) + " with k=" + std::to_string(k));
    }
    if (T < 2) throw InvalidArgument("ExperimentSpec: T must be >= 2");
    if (n_reps < 1) throw InvalidArgument("ExperimentSpec: n_reps must be >= 1");
    if (threads < 1) throw InvalidArgument("ExperimentSpec: threads must be >= 1");
    if (estimators.empty()) throw InvalidArgument("ExperimentSpec: no estimators");
}

namespace {

struct EstimatorOutcome {
    bool feasible = false;
    std::string reason;
    SelectionOutcome selection;
    double sq_error = 0.0;
    double sq_forecast_error = 0.0;
    double first_coef = std::numeric_limits<double>::quiet_NaN();
};

struct RepOutcome {
    std::vector<EstimatorOutcome> estimators;
    bool b = false, c = false, d = false;
    bool thm1_checked = false;
    bool thm1_ok = true;
    double worst_slack = std::numeric_limits<double>::infinity();
};

RepOutcome run_replication(const ExperimentSpec& spec, const Dgp& dgp, const Matrix& coef,
                           const TheoryParams* theory, Index rep) {
    const Dataset full = simulate(dgp.model, spec.T + 1, spec.base_seed + std::uint64_t(rep));
    const Dataset data = truncate(full, spec.T);
    const Vector realized = full.path.row(spec.T).transpose();
    const RegressionProblem problem = stack(data);

    RepOutcome out;
    for (const SystemFit& fit : fit_systems(problem, spec.estimators, &dgp.truth, spec.options)) {
        EstimatorOutcome eo;
        eo.feasible = fit.feasible();
        eo.reason = fit.infeasible_reason();
        if (eo.feasible) {
            const Matrix est = fit.coefficients();
            eo.selection = selection_outcome(fit, dgp.truth);
            eo.sq_error = (est - coef).squaredNorm();
            eo.sq_forecast_error = (forecast_one_step(est, data) - realized).squaredNorm();
            eo.first_coef = est(0, 0);
        }
        out.estimators.push_back(std::move(eo));
    }

    if (theory) {
        const EventFlags ev = event_flags(data, dgp.model, dgp.truth, *theory);
        out.b = ev.b_t;
        out.c = ev.c_t;
        out.d = ev.d_t;
        if (ev.b_t && theory->lambda > 0.0) {
            EstimatorOptions opts = spec.options;
            opts.fixed_lambda = theory->lambda;
            opts.standardize = false;
            out.thm1_checked = true;
            for (Index i = 0; i < problem.n_equations(); ++i) {
                const EquationFit f = fit_lasso_bic(problem, i, opts);
                const Thm1Report r = thm1_rhs_check(problem, f.beta, coef.row(i).transpose(), theory->lambda);
                const double tol = 10.0 * opts.solver.tol;
                out.worst_slack = std::min({out.worst_slack, r.iq1.slack(), r.iq2.slack(), r.iq3.slack()});
                if (!r.all_hold(tol)) out.thm1_ok = false;
            }
        }
    }
    return out;
}

}  // namespace

McReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    const Dgp dgp = make_dgp(spec.experiment, spec.k);
    const Matrix coef = dgp.model.coefficients();

    std::optional<TheoryParams> theory;
    if (spec.theory_checks) theory = make_theory_params(dgp.model, dgp.truth, spec.T);

    const std::size_t n = std::size_t(spec.n_reps);
    std::vector<RepOutcome> outcomes(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t r = next.fetch_add(1);
            if (r >= n) return;
            try {
                outcomes[r] = run_replication(spec, dgp, coef, theory ? &*theory : nullptr, Index(r));
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    const int n_threads = std::min<int>(spec.threads, int(n));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    McReport report;
    report.spec = spec;
    for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
        EstimatorRow row;
        row.tag = spec.estimators[e];
        double sq = 0.0, fsq = 0.0;
        std::vector<double> first;
        first.reserve(n);
        for (const RepOutcome& o : outcomes) {
            const EstimatorOutcome& eo = o.estimators[e];
            first.push_back(eo.first_coef);
            if (!eo.feasible) {
                if (!row.infeasible) row.infeasible_reason = eo.reason;
                row.infeasible = true;
                continue;
            }
            ++row.n_feasible;
            row.selection.uncovered += eo.selection.uncovered;
            row.selection.included += eo.selection.included;
            row.selection.share += eo.selection.share;
            row.selection.n_selected += double(eo.selection.n_selected);
            sq += eo.sq_error;
            fsq += eo.sq_forecast_error;
        }
        if (row.n_feasible > 0) {
            const double nf = double(row.n_feasible);
            row.selection.uncovered /= nf;
            row.selection.included /= nf;
            row.selection.share /= nf;
            row.selection.n_selected /= nf;
            row.rmse = std::sqrt(sq / nf);
            row.rmsfe = std::sqrt(fsq / (nf * double(spec.k)));
        }
        report.rows.push_back(std::move(row));
        report.first_coef.push_back(std::move(first));
    }
    if (theory) {
        TheorySummary ts;
        ts.lambda_T = theory->lambda;
        ts.prob_bound = thm1_probability_bound(spec.T, spec.k, dgp.model.p(), theory->A_const);
        for (const RepOutcome& o : outcomes) {
            ts.n_b += o.b;
            ts.n_c += o.c;
            ts.n_d += o.d;
            ts.thm1_checked += o.thm1_checked;
            ts.thm1_violations += o.thm1_checked && !o.thm1_ok;
            ts.worst_slack = std::min(ts.worst_slack, o.worst_slack);
        }
        report.theory = ts;
    }
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << std::fixed << v;
    return os.str();
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

std::string McReport::to_csv() const {
    std::ostringstream os;
    os << "estimator,true_model_uncovered,true_model_included,share_relevant,n_selected,rmse,rmsfe,infeasible\n";
    for (const auto& r : rows) {
        os << tag_name(r.tag);
        if (r.infeasible) {
            os << ",,,,,,,1\n";
            continue;
        }
        os << ',' << fmt(r.selection.uncovered) << ',' << fmt(r.selection.included) << ','
           << fmt(r.selection.share) << ',' << fmt(r.selection.n_selected) << ',' << fmt(r.rmse) << ','
           << fmt(r.rmsfe) << ",0\n";
    }
    return os.str();
}

std::string McReport::to_json() const {
    nlohmann::ordered_json j;
    j["experiment"] = std::string(1, spec.experiment);
    j["k"] = spec.k;
    j["T"] = spec.T;
    j["n_reps"] = spec.n_reps;
    j["base_seed"] = spec.base_seed;
    j["seeds"] = {spec.base_seed, spec.base_seed + std::uint64_t(spec.n_reps) - 1};
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["estimator"] = std::string(tag_name(r.tag));
        row["infeasible"] = r.infeasible;
        if (r.infeasible) row["infeasible_reason"] = r.infeasible_reason;
        row["n_feasible"] = r.n_feasible;
        row["true_model_uncovered"] = r.selection.uncovered;
        row["true_model_included"] = r.selection.included;
        row["share_relevant"] = r.selection.share;
        row["n_selected"] = r.selection.n_selected;
        row["rmse"] = r.rmse;
        row["rmsfe"] = r.rmsfe;
        j["rows"].push_back(std::move(row));
    }
    if (theory) {
        nlohmann::ordered_json t;
        t["lambda_T"] = number_or_null(theory->lambda_T);
        t["prob_bound_B_T"] = number_or_null(theory->prob_bound);
        t["freq_B_T"] = double(theory->n_b) / double(spec.n_reps);
        t["freq_C_T"] = double(theory->n_c) / double(spec.n_reps);
        t["freq_D_T"] = double(theory->n_d) / double(spec.n_reps);
        t["thm1_checked"] = theory->thm1_checked;
        t["thm1_violations"] = theory->thm1_violations;
        t["thm1_worst_slack"] = number_or_null(theory->worst_slack);
        j["theory"] = std::move(t);
    }
    return j.dump(2) + "\n";
}

std::string McReport::first_coef_csv() const {
    std::ostringstream os;
    os << "rep";
    for (const EstimatorRow& r : rows) os << "," << tag_name(r.tag);
    os << "\n" << std::setprecision(17);
    const std::size_t n = first_coef.empty() ? 0 : first_coef.front().size();
    for (std::size_t r = 0; r < n; ++r) {
        os << r;
        for (const auto& col : first_coef) {
            os << ",";
            if (std::isfinite(col[r])) os << col[r];
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace varlasso
