#include "varlasso/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace varlasso {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Gram system for one equation, optionally on unit-RMS columns. `scale` maps
// solver coordinates back: beta = beta_solver / scale.
struct ScaledSystem {
    GramSystem sys;
    Vector scale;
};

ScaledSystem make_system(const Matrix& X, const Vector& y, const Matrix& gram, bool standardize) {
    ScaledSystem out{GramSystem::from_gram(gram, X, y), Vector::Ones(X.cols())};
    if (!standardize) return out;
    for (Index j = 0; j < X.cols(); ++j) {
        const double d = std::sqrt(std::max(gram(j, j), 0.0));
        out.scale(j) = d > 0.0 ? d : 1.0;
    }
    const Vector inv = out.scale.cwiseInverse();
    out.sys.gram = inv.asDiagonal() * out.sys.gram * inv.asDiagonal();
    out.sys.xty = out.sys.xty.cwiseProduct(inv);
    return out;
}

EquationFit finish(EquationFit fit) {
    fit.active_set = support_of(fit.beta);
    return fit;
}

EquationFit infeasible(EstimatorTag tag, Index m, std::string reason) {
    EquationFit fit;
    fit.tag = tag;
    fit.beta = Vector::Zero(m);
    fit.lambda_selected = kNaN;
    fit.bic_value = kNaN;
    fit.df = kNaN;
    fit.feasible = false;
    fit.infeasible_reason = std::move(reason);
    return fit;
}

EquationFit ols_fit(const Matrix& X, const Vector& y, const std::vector<Index>& cols, EstimatorTag tag) {
    EquationFit fit;
    fit.tag = tag;
    fit.beta = ols_on_support(X, y, cols);
    fit.lambda_selected = kNaN;
    fit.df = double(cols.size());
    fit.bic_value = bic(residual_ss(X, y, fit.beta), fit.df, X.rows());
    return finish(std::move(fit));
}

}  // namespace

std::string_view tag_name(EstimatorTag tag) {
    switch (tag) {
        case EstimatorTag::lasso: return "lasso";
        case EstimatorTag::post_lasso: return "post_lasso";
        case EstimatorTag::adaptive_lasso_lasso: return "adaptive_lasso_lasso";
        case EstimatorTag::adaptive_lasso_ridge: return "adaptive_lasso_ridge";
        case EstimatorTag::oracle_ols: return "oracle_ols";
        case EstimatorTag::full_ols: return "full_ols";
    }
    return "unknown";
}

EstimatorTag parse_tag(std::string_view name) {
    for (EstimatorTag t : kAllEstimators) {
        if (tag_name(t) == name) return t;
    }
    throw InvalidArgument("unknown estimator '" + std::string(name) + "'");
}

Matrix SystemFit::coefficients() const {
    Matrix coef = Matrix::Zero(k, k * p);
    for (Index i = 0; i < Index(equations.size()); ++i) {
        coef.row(i) = equations[std::size_t(i)].beta.transpose();
    }
    return coef;
}

std::vector<double> SystemFit::lambdas() const {
    std::vector<double> out;
    for (const auto& e : equations) out.push_back(e.lambda_selected);
    return out;
}

bool SystemFit::feasible() const {
    return std::all_of(equations.begin(), equations.end(), [](const EquationFit& e) { return e.feasible; });
}

std::string SystemFit::infeasible_reason() const {
    for (const auto& e : equations) {
        if (!e.feasible) return e.infeasible_reason;
    }
    return {};
}

SparsityInfo SparsityInfo::from_coefficients(const Matrix& coef) {
    SparsityInfo info;
    info.beta_min = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < coef.rows(); ++i) {
        std::vector<Index> J;
        double bmin = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < coef.cols(); ++j) {
            if (coef(i, j) != 0.0) {
                J.push_back(j);
                bmin = std::min(bmin, std::abs(coef(i, j)));
            }
        }
        info.s.push_back(Index(J.size()));
        info.s_bar = std::max(info.s_bar, Index(J.size()));
        info.beta_min_i.push_back(bmin);
        info.beta_min = std::min(info.beta_min, bmin);
        info.support.push_back(std::move(J));
    }
    return info;
}

double bic(double rss, double df, Index T) {
    if (T < 1) throw InvalidArgument("bic: T must be >= 1");
    if (!(rss > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(rss) + std::log(double(T)) / double(T) * df;
}

double residual_ss(const Matrix& X, const Vector& y, const Vector& beta) {
    Vector r = y;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta(j) != 0.0) r.noalias() -= X.col(j) * beta(j);
    }
    return r.squaredNorm();
}

std::vector<Index> support_of(const Vector& beta) {
    std::vector<Index> J;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta(j) != 0.0) J.push_back(j);
    }
    return J;
}

Vector ols_on_support(const Matrix& X, const Vector& y, const std::vector<Index>& cols) {
    Vector beta = Vector::Zero(X.cols());
    if (cols.empty()) return beta;
    Matrix XJ(X.rows(), Index(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) XJ.col(Index(c)) = X.col(cols[c]);
    const Vector bJ = least_squares(XJ, y);
    for (std::size_t c = 0; c < cols.size(); ++c) beta(cols[c]) = bJ(Index(c));
    return beta;
}

EquationFit fit_weighted_lasso_bic(const Matrix& X, const Vector& y, const Matrix& gram,
                                   const Vector& weights, const EstimatorOptions& opts) {
    const ScaledSystem ss = make_system(X, y, gram, opts.standardize);
    const Index T = X.rows();
    auto evaluate = [&](double lambda, const SolverResult& r) {
        EquationFit fit;
        fit.beta = r.beta.cwiseQuotient(ss.scale);
        fit.lambda_selected = lambda;
        fit.active_set = support_of(fit.beta);
        fit.df = double(fit.active_set.size());
        fit.bic_value = bic(residual_ss(X, y, fit.beta), fit.df, T);
        return fit;
    };

    if (opts.fixed_lambda) {
        const PenaltySpec pen{*opts.fixed_lambda, weights};
        return evaluate(*opts.fixed_lambda, lasso_cd(ss.sys, pen, opts.solver));
    }

    const auto path = lasso_path(ss.sys, weights, opts.n_lambda, opts.ratio, opts.solver);
    EquationFit best;
    bool have = false;
    for (const auto& point : path) {
        EquationFit fit = evaluate(point.lambda, point.result);
        // Path runs from large to small lambda, so a strict comparison keeps
        // the larger lambda on ties.
        if (!have || fit.bic_value < best.bic_value) {
            best = std::move(fit);
            have = true;
        }
    }
    return best;
}

EquationFit fit_ridge_bic(const Matrix& X, const Vector& y, const EstimatorOptions& opts) {
    const Matrix gram = (X.transpose() * X) / double(X.rows());
    const ScaledSystem ss = make_system(X, y, gram, opts.standardize);
    const Index T = X.rows();
    const Index m = X.cols();
    const double lmax = lambda_max(ss.sys, Vector::Ones(m));

    EquationFit best;
    best.tag = EstimatorTag::adaptive_lasso_ridge;
    if (!(lmax > 0.0)) {
        best.beta = Vector::Zero(m);
        best.lambda_selected = kNaN;
        best.bic_value = bic(y.squaredNorm(), 0.0, T);
        return finish(std::move(best));
    }

    // Ridge in the eigenbasis of X'X: beta(l) = V (b ./ (d + l)), b = V'X'y.
    Eigen::SelfAdjointEigenSolver<Matrix> es(ss.sys.gram * double(T));
    const Vector d = es.eigenvalues().cwiseMax(0.0);
    const Matrix& V = es.eigenvectors();
    const Vector b = V.transpose() * (ss.sys.xty * double(T));
    const double yty = y.squaredNorm();

    std::vector<double> grid;
    if (opts.fixed_lambda) {
        grid.push_back(*opts.fixed_lambda * double(T));
    } else {
        grid = lambda_grid(lmax, opts.n_lambda, opts.ratio);
        for (double& l : grid) l *= double(T);
    }
    bool have = false;
    double best_lambda = 0.0;
    for (double l : grid) {
        double df = 0.0;
        double rss = yty;
        for (Index q = 0; q < m; ++q) {
            const double den = d(q) + l;
            df += d(q) / den;
            rss -= 2.0 * b(q) * b(q) / den - d(q) * b(q) * b(q) / (den * den);
        }
        const double value = bic(std::max(rss, 0.0), df, T);
        if (!have || value < best.bic_value) {
            best.bic_value = value;
            best.df = df;
            best_lambda = l;
            have = true;
        }
    }
    const Vector coef = V * b.cwiseQuotient((d.array() + best_lambda).matrix());
    best.beta = coef.cwiseQuotient(ss.scale);
    best.lambda_selected = best_lambda;
    return finish(std::move(best));
}

EquationFit fit_lasso_bic(const RegressionProblem& problem, Index i, const EstimatorOptions& opts) {
    const Index m = problem.n_regressors();
    EquationFit fit = fit_weighted_lasso_bic(problem.X, problem.Y.col(i), problem.psi, Vector::Ones(m), opts);
    fit.tag = EstimatorTag::lasso;
    return fit;
}

EquationFit post_lasso_from(const RegressionProblem& problem, Index i, const EquationFit& lasso) {
    const Index m = problem.n_regressors();
    if (Index(lasso.active_set.size()) >= problem.T()) {
        return infeasible(EstimatorTag::post_lasso, m, "TooManySelected: lasso active set size >= T");
    }
    try {
        EquationFit fit = ols_fit(problem.X, problem.Y.col(i), lasso.active_set, EstimatorTag::post_lasso);
        fit.lambda_selected = lasso.lambda_selected;
        return fit;
    } catch (const SingularDesign& e) {
        return infeasible(EstimatorTag::post_lasso, m, e.what());
    }
}

EquationFit fit_post_lasso(const RegressionProblem& problem, Index i, const EstimatorOptions& opts) {
    return post_lasso_from(problem, i, fit_lasso_bic(problem, i, opts));
}

EquationFit adaptive_from(const RegressionProblem& problem, Index i, const EquationFit& first, EstimatorTag tag,
                          const EstimatorOptions& opts) {
    if (tag != EstimatorTag::adaptive_lasso_lasso && tag != EstimatorTag::adaptive_lasso_ridge) {
        throw InvalidArgument("adaptive_from: tag must be an adaptive estimator");
    }
    const Index m = problem.n_regressors();
    if (first.beta.size() != m) throw DimensionMismatch("adaptive_from: first stage length");
    const Vector y = problem.Y.col(i);

    // Weights live in solver coordinates (scaled columns when standardizing).
    Vector weights = Vector::Constant(m, kExcluded);
    bool any = false;
    for (Index j = 0; j < m; ++j) {
        if (first.beta(j) == 0.0) continue;
        const double scale = opts.standardize ? std::sqrt(problem.psi(j, j)) : 1.0;
        weights(j) = 1.0 / std::abs(first.beta(j) * scale);
        any = true;
    }

    EquationFit fit;
    if (!any) {
        // Empty first stage: nothing left to select.
        fit.beta = Vector::Zero(m);
        fit.lambda_selected = first.lambda_selected;
        fit.df = 0.0;
        fit.bic_value = bic(y.squaredNorm(), 0.0, problem.T());
    } else {
        fit = fit_weighted_lasso_bic(problem.X, y, problem.psi, weights, opts);
    }
    fit.tag = tag;
    fit.first_stage = first.beta;
    fit.weights = weights;
    return finish(std::move(fit));
}

EquationFit fit_adaptive_lasso(const RegressionProblem& problem, Index i, EstimatorTag init,
                               const EstimatorOptions& opts) {
    if (init == EstimatorTag::adaptive_lasso_lasso) {
        return adaptive_from(problem, i, fit_lasso_bic(problem, i, opts), init, opts);
    }
    if (init == EstimatorTag::adaptive_lasso_ridge) {
        EstimatorOptions ridge_opts = opts;
        ridge_opts.fixed_lambda.reset();
        return adaptive_from(problem, i, fit_ridge_bic(problem.X, problem.Y.col(i), ridge_opts), init, opts);
    }
    throw InvalidArgument("fit_adaptive_lasso: init must be an adaptive tag");
}

EquationFit fit_oracle_ols(const RegressionProblem& problem, Index i, const SparsityInfo& truth) {
    const Index m = problem.n_regressors();
    if (i >= Index(truth.support.size())) throw DimensionMismatch("fit_oracle_ols: truth has too few equations");
    const auto& J = truth.support[std::size_t(i)];
    if (Index(J.size()) >= problem.T()) {
        return infeasible(EstimatorTag::oracle_ols, m, "SingularDesign: s_i >= T");
    }
    try {
        return ols_fit(problem.X, problem.Y.col(i), J, EstimatorTag::oracle_ols);
    } catch (const SingularDesign& e) {
        return infeasible(EstimatorTag::oracle_ols, m, e.what());
    }
}

EquationFit fit_full_ols(const RegressionProblem& problem, Index i) {
    const Index m = problem.n_regressors();
    if (m >= problem.T()) return infeasible(EstimatorTag::full_ols, m, "SingularDesign: kp >= T");
    std::vector<Index> all(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) all[std::size_t(j)] = j;
    try {
        return ols_fit(problem.X, problem.Y.col(i), all, EstimatorTag::full_ols);
    } catch (const SingularDesign& e) {
        return infeasible(EstimatorTag::full_ols, m, e.what());
    }
}

EquationFit fit_equation(const RegressionProblem& problem, Index i, EstimatorTag tag,
                         const SparsityInfo* truth, const EstimatorOptions& opts) {
    switch (tag) {
        case EstimatorTag::lasso: return fit_lasso_bic(problem, i, opts);
        case EstimatorTag::post_lasso: return fit_post_lasso(problem, i, opts);
        case EstimatorTag::adaptive_lasso_lasso:
        case EstimatorTag::adaptive_lasso_ridge: return fit_adaptive_lasso(problem, i, tag, opts);
        case EstimatorTag::oracle_ols:
            if (!truth) throw InvalidArgument("oracle_ols requires the true support");
            return fit_oracle_ols(problem, i, *truth);
        case EstimatorTag::full_ols: return fit_full_ols(problem, i);
    }
    throw InvalidArgument("fit_equation: unknown estimator");
}

SystemFit fit_system(const RegressionProblem& problem, EstimatorTag tag, const SparsityInfo* truth,
                     const EstimatorOptions& opts) {
    const Index k = problem.n_equations();
    if (k < 1 || problem.n_regressors() % k != 0) {
        throw DimensionMismatch("fit_system: regressor count must be a multiple of k");
    }
    if (tag == EstimatorTag::oracle_ols && !truth) {
        throw InvalidArgument("oracle_ols requires the true support");
    }
    SystemFit out;
    out.tag = tag;
    out.k = k;
    out.p = problem.n_regressors() / k;
    out.equations.reserve(std::size_t(k));
    for (Index i = 0; i < k; ++i) out.equations.push_back(fit_equation(problem, i, tag, truth, opts));
    return out;
}

std::vector<SystemFit> fit_systems(const RegressionProblem& problem, const std::vector<EstimatorTag>& tags,
                                   const SparsityInfo* truth, const EstimatorOptions& opts) {
    const Index k = problem.n_equations();
    const bool share = std::count_if(tags.begin(), tags.end(), [](EstimatorTag t) {
                           return t == EstimatorTag::lasso || t == EstimatorTag::post_lasso ||
                                  t == EstimatorTag::adaptive_lasso_lasso;
                       }) > 1;
    std::vector<EquationFit> lasso;
    if (share) {
        for (Index i = 0; i < k; ++i) lasso.push_back(fit_lasso_bic(problem, i, opts));
    }
    std::vector<SystemFit> out;
    for (EstimatorTag tag : tags) {
        if (!share || (tag != EstimatorTag::lasso && tag != EstimatorTag::post_lasso &&
                       tag != EstimatorTag::adaptive_lasso_lasso)) {
            out.push_back(fit_system(problem, tag, truth, opts));
            continue;
        }
        SystemFit sf;
        sf.tag = tag;
        sf.k = k;
        sf.p = problem.n_regressors() / k;
        for (Index i = 0; i < k; ++i) {
            const EquationFit& l = lasso[std::size_t(i)];
            switch (tag) {
                case EstimatorTag::lasso: sf.equations.push_back(l); break;
                case EstimatorTag::post_lasso: sf.equations.push_back(post_lasso_from(problem, i, l)); break;
                default: sf.equations.push_back(adaptive_from(problem, i, l, tag, opts)); break;
            }
        }
        out.push_back(std::move(sf));
    }
    return out;
}

SystemFit fit_system(const Dataset& data, EstimatorTag tag, const SparsityInfo* truth,
                     const EstimatorOptions& opts) {
    return fit_system(stack(data), tag, truth, opts);
}

}  // namespace varlasso
