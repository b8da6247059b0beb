#include "varlasso/var.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "varlasso/rng.hpp"

namespace varlasso {

VarModel::VarModel(std::vector<Matrix> phis, Matrix sigma)
    : k_(sigma.rows()), p_(Index(phis.size())), phis_(std::move(phis)), sigma_(std::move(sigma)) {
    if (p_ < 1) throw InvalidArgument("VarModel: at least one lag required");
    if (sigma_.rows() != sigma_.cols() || k_ < 1) {
        throw DimensionMismatch("VarModel: sigma must be square and non-empty");
    }
    for (const auto& phi : phis_) {
        if (phi.rows() != k_ || phi.cols() != k_) {
            throw DimensionMismatch("VarModel: every Phi must be k x k");
        }
        if (!phi.allFinite()) throw InvalidArgument("VarModel: non-finite coefficient");
    }
    if (!sigma_.allFinite()) throw InvalidArgument("VarModel: non-finite sigma");
    if (max_abs(sigma_ - sigma_.transpose()) > 1e-10 * std::max(1.0, max_abs(sigma_))) {
        throw InvalidArgument("VarModel: sigma not symmetric");
    }
    if (min_eigenvalue(sigma_) < -1e-10 * std::max(1.0, max_abs(sigma_))) {
        throw InvalidArgument("VarModel: sigma not positive semi-definite");
    }
}

Matrix VarModel::coefficients() const {
    Matrix coef(k_, k_ * p_);
    for (Index l = 0; l < p_; ++l) coef.middleCols(l * k_, k_) = phis_[std::size_t(l)];
    return coef;
}

VarModel model_from_coefficients(const Matrix& coef, Index p, const Matrix& sigma) {
    const Index k = coef.rows();
    if (p < 1 || coef.cols() != k * p) {
        throw DimensionMismatch("model_from_coefficients: coefficient block must be k x kp");
    }
    std::vector<Matrix> phis;
    for (Index l = 0; l < p; ++l) phis.emplace_back(coef.middleCols(l * k, k));
    return VarModel(std::move(phis), sigma);
}

CompanionForm companion(const VarModel& model, double tol) {
    const Index k = model.k();
    const Index n = k * model.p();
    CompanionForm cf;
    cf.F = Matrix::Zero(n, n);
    cf.F.topRows(k) = model.coefficients();
    if (model.p() > 1) cf.F.block(k, 0, n - k, n - k).setIdentity();
    cf.omega = Matrix::Zero(n, n);
    cf.omega.topLeftCorner(k, k) = model.sigma();
    cf.rho = spectral_radius(cf.F, tol);
    return cf;
}

Matrix Dataset::observations() const {
    Matrix all(p + T, k);
    all.topRows(p) = initial;
    all.bottomRows(T) = path;
    return all;
}

void Dataset::validate() const {
    if (initial.rows() != p || initial.cols() != k || path.rows() != T || path.cols() != k) {
        throw DimensionMismatch("Dataset: inconsistent shapes");
    }
    if (innovations && (innovations->rows() != T || innovations->cols() != k)) {
        throw DimensionMismatch("Dataset: innovations must be T x k");
    }
    if (!initial.allFinite() || !path.allFinite() || (innovations && !innovations->allFinite())) {
        throw InvalidArgument("Dataset: non-finite observation");
    }
}

Index default_burn_in(Index p) { return 200 + 10 * p; }

Dataset propagate(const VarModel& model, const Matrix& initial, const Matrix& innovations) {
    const Index k = model.k();
    const Index p = model.p();
    if (initial.rows() != p || initial.cols() != k || innovations.cols() != k) {
        throw DimensionMismatch("propagate: initial must be p x k and innovations T x k");
    }
    const Index T = innovations.rows();
    Matrix all(p + T, k);
    all.topRows(p) = initial;
    for (Index t = 0; t < T; ++t) {
        const Index row = p + t;
        Vector y = innovations.row(t).transpose();
        for (Index l = 1; l <= p; ++l) y.noalias() += model.phi(l) * all.row(row - l).transpose();
        all.row(row) = y.transpose();
    }
    Dataset d;
    d.k = k;
    d.p = p;
    d.T = T;
    d.initial = initial;
    d.path = all.bottomRows(T);
    d.innovations = innovations;
    return d;
}

namespace {

// Factor L with L L' = Sigma; falls back to pivoted LDL' for singular Sigma.
Matrix innovation_factor(const Matrix& sigma) {
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::LDLT<Matrix> ldlt(sigma);
    const Vector d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    Matrix L = ldlt.matrixL();
    L = L * d.asDiagonal();
    return ldlt.transpositionsP().transpose() * L;
}

}  // namespace

Dataset simulate(const VarModel& model, Index T, std::uint64_t seed, std::optional<Index> burn_in) {
    const Index k = model.k();
    const Index p = model.p();
    const Index burn = burn_in.value_or(default_burn_in(p));
    if (T < 1 || burn < 0) throw InvalidArgument("simulate: T must be positive and burn_in >= 0");
    const double rho = companion(model).rho;
    if (rho >= 1.0 - 1e-8) {
        throw NotStationary("simulate: companion spectral radius " + std::to_string(rho));
    }

    const Matrix L = innovation_factor(model.sigma());
    NormalStream normals(seed);
    const Index total = burn + p + T;
    Matrix eps(total, k);
    Vector z(k);
    for (Index t = 0; t < total; ++t) {
        for (Index i = 0; i < k; ++i) z(i) = normals.next();
        eps.row(t) = (L * z).transpose();
    }

    const Dataset run = propagate(model, Matrix::Zero(p, k), eps);
    Dataset d;
    d.k = k;
    d.p = p;
    d.T = T;
    d.initial = run.path.middleRows(burn, p);
    d.path = run.path.bottomRows(T);
    d.innovations = eps.bottomRows(T);
    return d;
}

Dataset truncate(const Dataset& data, Index T) {
    if (T < 0 || T > data.T) throw InvalidArgument("truncate: T out of range");
    Dataset d = data;
    d.T = T;
    d.path = data.path.topRows(T);
    if (data.innovations) d.innovations = data.innovations->topRows(T);
    return d;
}

Matrix population_gamma(const VarModel& model) {
    const CompanionForm cf = companion(model);
    if (cf.rho >= 1.0 - 1e-8) throw NotStationary("population_gamma: model not stationary");
    return lyapunov_doubling(cf.F, cf.omega);
}

double sigma_T(const VarModel& model) {
    const Matrix gamma = population_gamma(model);
    double s = 0.0;
    for (Index i = 0; i < model.k(); ++i) {
        s = std::max({s, std::sqrt(std::max(gamma(i, i), 0.0)),
                      std::sqrt(std::max(model.sigma()(i, i), 0.0))});
    }
    return s;
}

RegressionProblem stack(const Dataset& data) {
    data.validate();
    const Index k = data.k;
    const Index p = data.p;
    const Index T = data.T;
    const Matrix all = data.observations();
    RegressionProblem prob;
    prob.X.resize(T, k * p);
    for (Index t = 0; t < T; ++t) {
        const Index row = p + t;  // y_t in `all`
        for (Index l = 1; l <= p; ++l) prob.X.block(t, (l - 1) * k, 1, k) = all.row(row - l);
    }
    prob.Y = data.path;
    prob.psi = (prob.X.transpose() * prob.X) / double(std::max<Index>(T, 1));
    prob.psi = 0.5 * (prob.psi + prob.psi.transpose());
    return prob;
}

Vector next_regressor(const Dataset& data) {
    const Matrix all = data.observations();
    const Index n = all.rows();
    Vector z(data.k * data.p);
    for (Index l = 1; l <= data.p; ++l) z.segment((l - 1) * data.k, data.k) = all.row(n - l).transpose();
    return z;
}

Vector forecast_one_step(const Matrix& coef, const Dataset& data) {
    if (coef.rows() != data.k || coef.cols() != data.k * data.p) {
        throw DimensionMismatch("forecast_one_step: coefficients must be k x kp");
    }
    return coef * next_regressor(data);
}

}  // namespace varlasso
