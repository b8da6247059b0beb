#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "varlasso/estimators.hpp"
#include "varlasso/theory.hpp"
#include "varlasso/var.hpp"

namespace varlasso {

struct Dgp {
    VarModel model;
    SparsityInfo truth;
};

/// Sigma = sigma2 I throughout.
VarModel diagonal_var1(Index k, double a, double sigma2 = 0.01);
/// Phi_1 and Phi_4 block diagonal with 5 x 5 blocks of 0.15 and -0.1.
VarModel experiment_b_model(Index k, double sigma2 = 0.01);
/// Phi_1 = 0.95 I, Phi_j = (-0.95)^(j-1) Phi_1 for j = 2..5.
VarModel experiment_c_model(Index k, double sigma2 = 0.01);
/// Phi_1(i,j) = (-1)^|i-j| rho^(|i-j|+1).
VarModel experiment_d_model(Index k, double rho = 0.4, double sigma2 = 0.01);

/// The experiment DGPs at the dimensions used in the tables. Throws
/// UnknownCombination for any other (experiment, k).
Dgp make_dgp(char experiment, Index k);
std::vector<Index> experiment_dims(char experiment);

/// sqrt(mean over reps of ||beta_hat - beta*||^2), coefficients stacked.
double rmse(const std::vector<Matrix>& fits, const Matrix& truth);

/// sqrt(mean over reps of ||y_hat - y||^2 / k).
double rmsfe(const std::vector<Vector>& forecasts, const std::vector<Vector>& realized, Index k);

struct SelectionMetrics {
    double uncovered = 0.0;
    double included = 0.0;
    double share = 0.0;
    double n_selected = 0.0;
};

/// Per-system selection outcome, aggregated by `selection_metrics`.
struct SelectionOutcome {
    bool uncovered = false;
    bool included = false;
    double share = 0.0;
    Index n_selected = 0;
};

SelectionOutcome selection_outcome(const SystemFit& fit, const SparsityInfo& truth);
SelectionMetrics selection_metrics(const std::vector<SystemFit>& fits, const SparsityInfo& truth);

struct ExperimentSpec {
    char experiment = 'A';
    Index k = 10;
    Index T = 100;
    Index n_reps = 100;
    std::uint64_t base_seed = 1;
    std::vector<EstimatorTag> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
    bool theory_checks = false;
    int threads = 1;
    EstimatorOptions options;

    void validate() const;
};

struct EstimatorRow {
    EstimatorTag tag = EstimatorTag::lasso;
    SelectionMetrics selection;
    double rmse = 0.0;
    double rmsfe = 0.0;
    bool infeasible = false;       // some replication could not be fitted
    Index n_feasible = 0;          // replications behind the metrics
    std::string infeasible_reason;
};

struct TheorySummary {
    double lambda_T = 0.0;
    double prob_bound = 0.0;  // lower bound on P(B_T) at lambda_T
    Index n_b = 0;
    Index n_c = 0;
    Index n_d = 0;
    Index thm1_checked = 0;     // replications with B_T
    Index thm1_violations = 0;  // of those, any inequality failing
    double worst_slack = std::numeric_limits<double>::infinity();  // smallest slack seen; inf if none checked
};

struct McReport {
    ExperimentSpec spec;
    std::vector<EstimatorRow> rows;
    std::optional<TheorySummary> theory;
    /// Estimate of coefficient (1,1) per estimator and replication, NaN
    /// where the fit was infeasible. Raw material for density plots.
    std::vector<std::vector<double>> first_coef;
    double runtime_seconds = 0.0;  // not serialized

    std::string to_csv() const;
    std::string to_json() const;
    /// One row per replication, one column per estimator; blank if infeasible.
    std::string first_coef_csv() const;
};

/// Replication r simulates T + 1 observations with seed base_seed + r; the
/// first T are used for estimation and the last is the forecast target.
McReport run_experiment(const ExperimentSpec& spec);

}  // namespace varlasso
