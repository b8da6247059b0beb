#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "varlasso/linalg.hpp"

namespace varlasso {

/// y_t = Phi_1 y_{t-1} + ... + Phi_p y_{t-p} + eps_t, eps_t ~ N(0, Sigma).
class VarModel {
public:
    VarModel(std::vector<Matrix> phis, Matrix sigma);

    Index k() const { return k_; }
    Index p() const { return p_; }
    const std::vector<Matrix>& phis() const { return phis_; }
    const Matrix& phi(Index lag) const { return phis_[std::size_t(lag - 1)]; }
    const Matrix& sigma() const { return sigma_; }

    /// [Phi_1 ... Phi_p], k x kp. Row i is the true coefficient vector of
    /// equation i in the stacked regression.
    Matrix coefficients() const;

private:
    Index k_;
    Index p_;
    std::vector<Matrix> phis_;
    Matrix sigma_;
};

/// Builds a model from the k x kp coefficient block [Phi_1 ... Phi_p].
VarModel model_from_coefficients(const Matrix& coef, Index p, const Matrix& sigma);

struct CompanionForm {
    Matrix F;      // kp x kp
    Matrix omega;  // Sigma in the top-left k x k block
    double rho;    // spectral radius of F
};

CompanionForm companion(const VarModel& model, double tol = 1e-6);

/// Observations y_{1-p}..y_0 (initial) and y_1..y_T (path). Innovations
/// eps_1..eps_T are kept for simulated data.
struct Dataset {
    Index k = 0;
    Index p = 0;
    Index T = 0;
    Matrix initial;                     // p x k, oldest first
    Matrix path;                        // T x k
    std::optional<Matrix> innovations;  // T x k

    /// (p + T) x k, initial rows followed by the path.
    Matrix observations() const;
    void validate() const;
};

/// Default burn-in for simulate: 200 + 10 p.
Index default_burn_in(Index p);

/// Runs the recursion forward from the given initial block with the given
/// innovations (T x k). Used by simulate and for noiseless constructions.
Dataset propagate(const VarModel& model, const Matrix& initial, const Matrix& innovations);

/// Simulates T observations after a burn-in from the zero state.
///
/// Innovations are L z_t with L a Cholesky-type factor of Sigma and z_t a
/// block of k standard normals drawn in coordinate order from a Philox stream
/// keyed by `seed`. Burn-in draws come first, then the p initial
/// observations, then the T recorded steps.
Dataset simulate(const VarModel& model, Index T, std::uint64_t seed,
                 std::optional<Index> burn_in = std::nullopt);

/// First T observations of the path (and innovations).
Dataset truncate(const Dataset& data, Index T);

/// Population covariance of Z_t = (y'_{t-1}, ..., y'_{t-p})'.
Matrix population_gamma(const VarModel& model);

/// max_i max(sigma_{i,y}, sigma_{i,eps}).
double sigma_T(const VarModel& model);

/// Stacked regression y_i = X beta_i + eps_i with rows in ascending time.
struct RegressionProblem {
    Matrix X;    // T x kp, row t is Z_t'
    Matrix Y;    // T x k, column i is y_i
    Matrix psi;  // X'X / T

    Index T() const { return X.rows(); }
    Index n_regressors() const { return X.cols(); }
    Index n_equations() const { return Y.cols(); }
};

RegressionProblem stack(const Dataset& data);

/// Z_{T+1} = (y_T', ..., y_{T+1-p}')'.
Vector next_regressor(const Dataset& data);

/// y_hat_{T+1} = sum_l Phi_hat_l y_{T+1-l} for coefficients shaped k x kp.
Vector forecast_one_step(const Matrix& coef, const Dataset& data);

}  // namespace varlasso
