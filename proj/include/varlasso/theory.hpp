#pragma once

#include <cstdint>
#include <vector>

#include "varlasso/estimators.hpp"
#include "varlasso/var.hpp"

namespace varlasso {

/// sqrt(8 ln(1+T)^5 ln(1+k)^4 ln(1+p)^2 ln(k^2 p) sigma^4 / T).
double lambda_theorem1(Index T, Index k, Index p, double sigma_T);

/// sqrt(8 ln(1+T)^5 ln(1+s)^2 ln(s) sigma^4 / T).
double lambda_oracle_ols(Index T, Index s, double sigma_T);

/// ln(1+k)^2 ln(1+p)^2 ln(T) sigma^2.
double k_T(Index T, Index k, Index p, double sigma_T);

/// 1 - 2 (k^2 p)^(1 - ln(1+T)) - 2 (1+T)^(-1/A). May be negative.
double thm1_probability_bound(Index T, Index k, Index p, double A);

struct ReBudget {
    std::size_t enumeration_cap = 5000;  // enumerate every subset when the count is at most this
    std::size_t n_samples = 200;         // subsets drawn per size otherwise
    int n_random_starts = 4;
    int outer_iter = 150;
    int inner_iter = 300;
    std::uint64_t seed = 12345;
};

struct ReEstimate {
    double value = 0.0;   // upper estimate of kappa^2(r)
    bool enumerated = true;
    std::size_t subsets_evaluated = 0;
    std::vector<Index> argmin_set;
};

/// Upper estimate of min over |R| <= r and the cone ||d_Rc||_1 <= 3 ||d_R||_1
/// of d' psi d / ||d_R||^2.
///
/// For each subset R, u = d_R runs over the unit sphere by projected gradient
/// descent. The inner problem in v = d_Rc is a convex quadratic over an l1
/// ball and is solved by accelerated projected gradient. Starts are the
/// eigenvectors of psi_RR plus random directions seeded from R's content, so
/// the estimate for r is evaluated on a superset of the points used for r-1.
ReEstimate restricted_eigenvalue(const Matrix& psi, Index r, const ReBudget& budget = {});

/// The cone objective at a fixed u (unit norm on R) after minimizing over v:
/// returns the value and writes the minimizer into `v`.
double re_inner_min(const Matrix& psi, const std::vector<Index>& R, const Vector& u, Vector& v,
                    int max_iter = 2000, double tol = 1e-12);

/// max(0, kappa_A^2 - 16 s delta).
double re_perturbation_bound(double kappa_A_sq, Index s, double delta);

/// ||Gamma|| * sum_{i=0}^{T} ||F^i||, truncated once a term drops below 1e-12.
double f_norm_sum(const VarModel& model, Index T);

struct TheoryParams {
    double q = 0.5;
    double A_const = 1.0;  // theory constant; bounds involving A are parametric
    std::vector<double> kappa_gamma_sq;  // per-equation kappa_Gamma^2(s_i)
    double kappa_gamma_sq_sbar = 0.0;    // kappa_Gamma^2(s_bar), used by C_T
    double f_norm_sum = 0.0;
    double lambda = 0.0;   // lambda_T
    double sigma_T = 0.0;

    void validate() const;
};

/// Fills kappa values, f_norm_sum, sigma_T and lambda_T from the model.
TheoryParams make_theory_params(const VarModel& model, const SparsityInfo& truth, Index T, double q = 0.5,
                                double A = 1.0, const ReBudget& budget = {});

struct EventFlags {
    bool b_t = false;
    bool c_t = false;
    bool d_t = false;
    double max_cross = 0.0;
    double max_cov_dev = 0.0;
    double max_yy = 0.0;
    double b_threshold = 0.0;
    double c_threshold = 0.0;
    double d_threshold = 0.0;
};

/// Throws MissingInnovations when `data` has no innovations.
EventFlags event_flags(const Dataset& data, const VarModel& model, const SparsityInfo& truth,
                       const TheoryParams& params);

struct InequalityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double slack() const { return rhs - lhs; }
    bool holds(double tol) const { return slack() >= -tol; }
};

struct Thm1Report {
    InequalityCheck iq1;
    InequalityCheck iq2;
    InequalityCheck iq3;
    bool all_hold(double tol) const { return iq1.holds(tol) && iq2.holds(tol) && iq3.holds(tol); }
};

/// Both sides of the three lasso error inequalities for a fit at `lambda`:
/// two bounds on prediction plus lambda-weighted l1 error, and the cone condition.
Thm1Report thm1_rhs_check(const RegressionProblem& problem, const Vector& beta_hat, const Vector& beta_star,
                          double lambda);

struct Thm3Bounds {
    double pred_bound;
    double est_bound;  // also the beta-min screening threshold
};

/// Throws ZeroKappa when kappa_sq <= 0.
Thm3Bounds thm3_bounds(Index s, double lambda, double kappa_sq, double q);

/// lambda_tilde s / (2 q phi_min).
double oracle_ols_bound(Index s, double lambda_tilde, double phi_min, double q);

/// (1-q)^2 kappa^4 / (4 16^3 f_norm_sum^2).
double zeta(double q, double kappa_sq, double f_norm_sum);

/// 4 k^2 p^2 exp(-zeta T / (s^2 log T (log(k^2 p^2) + 1))) + 2 (k^2 p^2)^(1 - log T).
double pi_q(Index s, Index k, Index p, Index T, double zeta);

double system_bound(const std::vector<double>& est_bounds);

struct SignRecoveryReport {
    double l1_error = 0.0;           // ||beta_hat - beta*||_1 of the first stage
    bool beta_min_premise = false;   // beta_min >= 2 l1_error
    InequalityCheck adalasso1;
    InequalityCheck adalasso2;
    bool support_retained = false;   // J within the first-stage support
    double foc1_margin = 0.0;        // min over j in J^c of lambda w_j - lhs (inf when empty)
    bool foc1 = false;
    double foc2_margin = 0.0;        // min over j in J of sign * candidate
    bool foc2 = false;
    bool foc_verdict() const { return support_retained && foc1 && foc2; }
};

/// Adaptive-lasso sign-recovery conditions for equation i.
///
/// `stage1` is the first-stage estimate; the stage-2 weights are 1/|stage1_j|
/// (infinite off its support). `eps` is the innovation series of equation i.
/// `phi_min_gamma` is phi_min(Gamma_JJ). Throws SingularSubGram when Psi_JJ
/// cannot be inverted.
SignRecoveryReport sign_recovery_conditions(const RegressionProblem& problem, Index i, const Vector& eps,
                                            const Vector& stage1, const Vector& beta_star, double lambda,
                                            double K_T, double phi_min_gamma, double q);

}  // namespace varlasso
