#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "varlasso/solver.hpp"
#include "varlasso/var.hpp"

namespace varlasso {

enum class EstimatorTag {
    lasso,
    post_lasso,
    adaptive_lasso_lasso,
    adaptive_lasso_ridge,
    oracle_ols,
    full_ols,
};

inline constexpr EstimatorTag kAllEstimators[] = {
    EstimatorTag::lasso,      EstimatorTag::post_lasso, EstimatorTag::adaptive_lasso_lasso,
    EstimatorTag::adaptive_lasso_ridge, EstimatorTag::oracle_ols, EstimatorTag::full_ols,
};

std::string_view tag_name(EstimatorTag tag);
/// Throws InvalidArgument for an unknown name.
EstimatorTag parse_tag(std::string_view name);

struct EquationFit {
    Vector beta;
    std::vector<Index> active_set;  // {j : beta_j != 0}, ascending
    double lambda_selected = 0.0;   // NaN for the OLS estimators
    EstimatorTag tag = EstimatorTag::lasso;
    double bic_value = 0.0;
    double df = 0.0;
    bool feasible = true;
    std::string infeasible_reason;

    // Adaptive fits only: first-stage estimate and the stage-2 weights.
    std::optional<Vector> first_stage;
    std::optional<Vector> weights;
};

struct SystemFit {
    EstimatorTag tag = EstimatorTag::lasso;
    Index k = 0;
    Index p = 0;
    std::vector<EquationFit> equations;

    /// k x kp; row i is the coefficient vector of equation i.
    Matrix coefficients() const;
    std::vector<double> lambdas() const;
    bool feasible() const;
    /// First infeasibility reason, empty if feasible.
    std::string infeasible_reason() const;
};

/// True supports of a k x kp coefficient block.
struct SparsityInfo {
    std::vector<std::vector<Index>> support;  // J_i
    std::vector<Index> s;                     // |J_i|
    Index s_bar = 0;
    std::vector<double> beta_min_i;  // +inf for an empty support
    double beta_min = 0.0;

    static SparsityInfo from_coefficients(const Matrix& coef);
};

struct EstimatorOptions {
    int n_lambda = 100;
    double ratio = 1e-4;
    SolverOptions solver;
    /// Skip BIC and use this lambda for every lasso-type stage.
    std::optional<double> fixed_lambda;
    /// Solve lasso-type stages on unit-RMS columns and map back.
    bool standardize = false;
};

/// log(rss) + log(T)/T * df; -infinity when rss <= 0 (perfect fit).
double bic(double rss, double df, Index T);

/// Exact ||y - X beta||^2 using only the nonzero columns of beta.
double residual_ss(const Matrix& X, const Vector& y, const Vector& beta);

std::vector<Index> support_of(const Vector& beta);

// Single-equation estimators on the stacked problem. Equation i uses column i
// of problem.Y.
EquationFit fit_lasso_bic(const RegressionProblem& problem, Index i, const EstimatorOptions& opts = {});
EquationFit fit_post_lasso(const RegressionProblem& problem, Index i, const EstimatorOptions& opts = {});
EquationFit fit_adaptive_lasso(const RegressionProblem& problem, Index i, EstimatorTag init,
                               const EstimatorOptions& opts = {});
EquationFit fit_oracle_ols(const RegressionProblem& problem, Index i, const SparsityInfo& truth);
EquationFit fit_full_ols(const RegressionProblem& problem, Index i);

/// Post-lasso and adaptive second stage from an existing first-stage fit.
EquationFit post_lasso_from(const RegressionProblem& problem, Index i, const EquationFit& lasso);
EquationFit adaptive_from(const RegressionProblem& problem, Index i, const EquationFit& first, EstimatorTag tag,
                          const EstimatorOptions& opts);

/// Weighted lasso on one equation with BIC over the path (df = active-set size).
EquationFit fit_weighted_lasso_bic(const Matrix& X, const Vector& y, const Matrix& gram,
                                   const Vector& weights, const EstimatorOptions& opts);

/// Ridge over the lasso grid scaled by T, BIC with df = trace of the hat matrix.
EquationFit fit_ridge_bic(const Matrix& X, const Vector& y, const EstimatorOptions& opts);

/// OLS on the columns `cols`, zeros elsewhere. Throws SingularDesign.
Vector ols_on_support(const Matrix& X, const Vector& y, const std::vector<Index>& cols);

EquationFit fit_equation(const RegressionProblem& problem, Index i, EstimatorTag tag,
                         const SparsityInfo* truth, const EstimatorOptions& opts = {});

/// Applies `tag` to every equation. oracle_ols requires `truth`.
SystemFit fit_system(const RegressionProblem& problem, EstimatorTag tag, const SparsityInfo* truth,
                     const EstimatorOptions& opts = {});
/// Several estimators on one problem; the lasso first stage is computed once
/// and shared by lasso, post_lasso and adaptive_lasso_lasso.
std::vector<SystemFit> fit_systems(const RegressionProblem& problem, const std::vector<EstimatorTag>& tags,
                                   const SparsityInfo* truth, const EstimatorOptions& opts = {});
SystemFit fit_system(const Dataset& data, EstimatorTag tag, const SparsityInfo* truth,
                     const EstimatorOptions& opts = {});

}  // namespace varlasso
