#pragma once

#include <limits>
#include <vector>

#include "varlasso/linalg.hpp"

namespace varlasso {

inline constexpr double kExcluded = std::numeric_limits<double>::infinity();

/// Penalty 2 * lambda * sum_j w_j |beta_j|. An infinite weight excludes the
/// coordinate (beta_j is held at 0).
struct PenaltySpec {
    double lambda = 0.0;
    Vector weights;

    static PenaltySpec unit(double lambda, Index m) { return {lambda, Vector::Ones(m)}; }
    void validate(Index m) const;
};

/// Sufficient statistics of one least-squares problem in the 1/T scaling:
/// gram = X'X/T, xty = X'y/T, yty = y'y/T.
struct GramSystem {
    Matrix gram;
    Vector xty;
    double yty = 0.0;
    Index T = 0;

    static GramSystem from_data(const Matrix& X, const Vector& y);
    /// Reuses a precomputed gram (shared by all equations of a VAR).
    static GramSystem from_gram(const Matrix& gram, const Matrix& X, const Vector& y);

    Index size() const { return gram.rows(); }
    /// (1/T)||y - X beta||^2.
    double mse(const Vector& beta) const;
    /// (1/T) X'(y - X beta).
    Vector correlation(const Vector& beta) const { return xty - gram * beta; }
};

struct SolverOptions {
    double tol = 1e-7;          // KKT residual at which a fit counts as converged
    int max_iter = 100000;      // coordinate sweeps
    bool record_objective = false;
};

struct SolverResult {
    Vector beta;
    int iterations = 0;
    double max_kkt_violation = 0.0;
    bool converged = false;
    /// Coordinates whose column is identically zero; their coefficient is pinned to 0.
    std::vector<Index> zero_columns;
    /// Objective after each sweep, when requested.
    std::vector<double> objective_trace;
};

/// sign(z) max(|z| - gamma, 0); exact ties give 0.
double soft_threshold(double z, double gamma);

/// (1/T)||y - X beta||^2 + 2 lambda sum_j w_j |beta_j|.
double lasso_objective(const GramSystem& sys, const Vector& beta, const PenaltySpec& pen);
double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, const PenaltySpec& pen);

/// Cyclic coordinate descent for the weighted lasso objective above.
///
/// Each update sets beta_j <- S(c_j + G_jj beta_j, lambda w_j) / G_jj with
/// c = X'(y - X beta)/T maintained incrementally. A full sweep over every
/// free coordinate is followed by sweeps restricted to the current nonzero
/// set; the fit stops once the KKT residual is at most `opts.tol`.
SolverResult lasso_cd(const GramSystem& sys, const PenaltySpec& pen, const SolverOptions& opts = {},
                      const Vector* warm_start = nullptr);
SolverResult lasso_cd(const Matrix& X, const Vector& y, const PenaltySpec& pen,
                      const SolverOptions& opts = {}, const Vector* warm_start = nullptr);

/// Largest violation of the lasso stationarity conditions.
double kkt_check(const GramSystem& sys, const Vector& beta, const PenaltySpec& pen);
double kkt_check(const Matrix& X, const Vector& y, const Vector& beta, const PenaltySpec& pen);

/// Smallest lambda whose solution is identically zero: max_j |X_j'y/T| / w_j.
double lambda_max(const GramSystem& sys, const Vector& weights);
double lambda_max(const Matrix& X, const Vector& y, const Vector& weights);

/// Log-spaced grid from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_grid(double lmax, int n_lambda, double ratio);

struct PathPoint {
    double lambda;
    SolverResult result;
};

/// Warm-started fits over lambda_grid, ordered by decreasing lambda.
std::vector<PathPoint> lasso_path(const GramSystem& sys, const Vector& weights, int n_lambda = 100,
                                  double ratio = 1e-4, const SolverOptions& opts = {});
std::vector<PathPoint> lasso_path(const Matrix& X, const Vector& y, const Vector& weights,
                                  int n_lambda = 100, double ratio = 1e-4,
                                  const SolverOptions& opts = {});

struct RidgeResult {
    Vector beta;
    double df;
};

/// beta = (X'X + lambda I)^{-1} X'y and df = trace(X (X'X + lambda I)^{-1} X').
RidgeResult ridge(const Matrix& X, const Vector& y, double lambda);

}  // namespace varlasso
