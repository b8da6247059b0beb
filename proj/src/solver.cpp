#include "varlasso/solver.hpp"

#include <algorithm>
#include <cmath>

namespace varlasso {

void PenaltySpec::validate(Index m) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("PenaltySpec: lambda must be finite and >= 0");
    }
    if (weights.size() != m) throw DimensionMismatch("PenaltySpec: weights length != regressors");
    for (Index j = 0; j < m; ++j) {
        if (!(weights(j) >= 0.0)) throw InvalidArgument("PenaltySpec: negative or NaN weight");
    }
}

GramSystem GramSystem::from_data(const Matrix& X, const Vector& y) {
    if (X.rows() != y.size()) throw DimensionMismatch("GramSystem: rows(X) != len(y)");
    if (X.rows() < 1) throw InvalidArgument("GramSystem: T must be >= 1");
    const double T = double(X.rows());
    GramSystem s;
    s.gram = (X.transpose() * X) / T;
    s.gram = 0.5 * (s.gram + s.gram.transpose());
    s.xty = (X.transpose() * y) / T;
    s.yty = y.squaredNorm() / T;
    s.T = X.rows();
    return s;
}

GramSystem GramSystem::from_gram(const Matrix& gram, const Matrix& X, const Vector& y) {
    if (X.rows() != y.size() || gram.rows() != X.cols() || gram.cols() != X.cols()) {
        throw DimensionMismatch("GramSystem: inconsistent shapes");
    }
    const double T = double(X.rows());
    GramSystem s;
    s.gram = gram;
    s.xty = (X.transpose() * y) / T;
    s.yty = y.squaredNorm() / T;
    s.T = X.rows();
    return s;
}

double GramSystem::mse(const Vector& beta) const {
    const double v = yty - 2.0 * beta.dot(xty) + beta.dot(gram * beta);
    return std::max(v, 0.0);
}

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

namespace {

double penalty_value(const Vector& beta, const PenaltySpec& pen) {
    double s = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta(j) != 0.0) s += pen.weights(j) * std::abs(beta(j));
    }
    return 2.0 * pen.lambda * s;
}

double kkt_from_correlation(const Vector& c, const Vector& beta, const PenaltySpec& pen) {
    double worst = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        const double w = pen.weights(j);
        if (std::isinf(w)) continue;  // excluded coordinate
        const double thr = pen.lambda * w;
        double v;
        if (beta(j) > 0.0) {
            v = std::abs(c(j) - thr);
        } else if (beta(j) < 0.0) {
            v = std::abs(c(j) + thr);
        } else {
            v = std::max(0.0, std::abs(c(j)) - thr);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace

double lasso_objective(const GramSystem& sys, const Vector& beta, const PenaltySpec& pen) {
    return sys.mse(beta) + penalty_value(beta, pen);
}

double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, const PenaltySpec& pen) {
    return (y - X * beta).squaredNorm() / double(X.rows()) + penalty_value(beta, pen);
}

SolverResult lasso_cd(const GramSystem& sys, const PenaltySpec& pen, const SolverOptions& opts,
                      const Vector* warm_start) {
    const Index m = sys.size();
    pen.validate(m);
    if (sys.T < 1) throw InvalidArgument("lasso_cd: T must be >= 1");

    SolverResult res;
    res.beta = Vector::Zero(m);
    if (warm_start) {
        if (warm_start->size() != m) throw DimensionMismatch("lasso_cd: warm start length");
        res.beta = *warm_start;
    }

    const Matrix& G = sys.gram;
    std::vector<Index> free_coords;
    for (Index j = 0; j < m; ++j) {
        if (std::isinf(pen.weights(j))) {
            res.beta(j) = 0.0;
        } else if (!(G(j, j) > 0.0)) {
            res.beta(j) = 0.0;
            res.zero_columns.push_back(j);
        } else {
            free_coords.push_back(j);
        }
    }

    Vector c = sys.correlation(res.beta);
    auto update = [&](Index j) {
        const double gjj = G(j, j);
        const double old = res.beta(j);
        const double z = c(j) + gjj * old;
        const double next = soft_threshold(z, pen.lambda * pen.weights(j)) / gjj;
        const double delta = next - old;
        if (delta != 0.0) {
            res.beta(j) = next;
            c.noalias() -= G.col(j) * delta;
        }
        return std::abs(delta);
    };
    // With the sign pattern on `active` held fixed the objective is a smooth
    // quadratic; jump to its minimizer when that keeps every sign. Slow CD
    // on a nearly collinear active set otherwise needs thousands of sweeps.
    auto newton_on_active = [&](const std::vector<Index>& act) {
        const Index a = Index(act.size());
        Matrix Gaa(a, a);
        Vector rhs(a);
        for (Index r = 0; r < a; ++r) {
            const Index j = act[std::size_t(r)];
            for (Index q = 0; q < a; ++q) Gaa(r, q) = G(j, act[std::size_t(q)]);
            const double s = res.beta(j) > 0.0 ? 1.0 : -1.0;
            rhs(r) = sys.xty(j) - pen.lambda * pen.weights(j) * s;
        }
        Eigen::LLT<Matrix> llt(Gaa);
        if (llt.info() != Eigen::Success) return false;
        const Vector x = llt.solve(rhs);
        for (Index r = 0; r < a; ++r) {
            const double old = res.beta(act[std::size_t(r)]);
            if (!std::isfinite(x(r)) || x(r) * old <= 0.0) return false;
        }
        const double before = lasso_objective(sys, res.beta, pen);
        Vector trial = res.beta;
        for (Index r = 0; r < a; ++r) trial(act[std::size_t(r)]) = x(r);
        if (!(lasso_objective(sys, trial, pen) <= before)) return false;
        res.beta = trial;
        c = sys.correlation(res.beta);
        return true;
    };
    auto record = [&] {
        ++res.iterations;
        if (opts.record_objective) res.objective_trace.push_back(lasso_objective(sys, res.beta, pen));
    };
    if (opts.record_objective) res.objective_trace.push_back(lasso_objective(sys, res.beta, pen));

    res.max_kkt_violation = kkt_from_correlation(c, res.beta, pen);
    if (res.max_kkt_violation <= opts.tol) {
        res.converged = true;
        return res;
    }

    std::vector<Index> active;
    while (res.iterations < opts.max_iter) {
        for (Index j : free_coords) update(j);
        record();

        active.clear();
        for (Index j : free_coords) {
            if (res.beta(j) != 0.0) active.push_back(j);
        }
        // Sweep the nonzero set until its own stationarity conditions settle.
        for (int inner = 0; inner < 1000 && res.iterations < opts.max_iter && !active.empty(); ++inner) {
            double moved = 0.0;
            if (inner % 25 == 24 && newton_on_active(active)) {
                moved = 1.0;
            } else {
                for (Index j : active) moved = std::max(moved, update(j));
            }
            record();
            double worst = 0.0;
            for (Index j : active) {
                const double thr = pen.lambda * pen.weights(j);
                const double v = res.beta(j) > 0.0   ? std::abs(c(j) - thr)
                                 : res.beta(j) < 0.0 ? std::abs(c(j) + thr)
                                                     : std::max(0.0, std::abs(c(j)) - thr);
                worst = std::max(worst, v);
            }
            if (worst <= 0.1 * opts.tol || moved == 0.0) break;
        }

        c = sys.correlation(res.beta);  // drop accumulated rounding
        res.max_kkt_violation = kkt_from_correlation(c, res.beta, pen);
        if (res.max_kkt_violation <= opts.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

SolverResult lasso_cd(const Matrix& X, const Vector& y, const PenaltySpec& pen,
                      const SolverOptions& opts, const Vector* warm_start) {
    return lasso_cd(GramSystem::from_data(X, y), pen, opts, warm_start);
}

double kkt_check(const GramSystem& sys, const Vector& beta, const PenaltySpec& pen) {
    pen.validate(sys.size());
    return kkt_from_correlation(sys.correlation(beta), beta, pen);
}

double kkt_check(const Matrix& X, const Vector& y, const Vector& beta, const PenaltySpec& pen) {
    pen.validate(X.cols());
    const Vector c = X.transpose() * (y - X * beta) / double(X.rows());
    return kkt_from_correlation(c, beta, pen);
}

double lambda_max(const GramSystem& sys, const Vector& weights) {
    if (weights.size() != sys.size()) throw DimensionMismatch("lambda_max: weights length");
    double best = 0.0;
    bool any_finite = false;
    for (Index j = 0; j < weights.size(); ++j) {
        const double w = weights(j);
        if (std::isinf(w)) continue;
        if (!(w > 0.0)) throw InvalidArgument("lambda_max: weights must be > 0");
        any_finite = true;
        best = std::max(best, std::abs(sys.xty(j)) / w);
    }
    if (!any_finite) throw AllWeightsInfinite("lambda_max: every coordinate is excluded");
    return best;
}

double lambda_max(const Matrix& X, const Vector& y, const Vector& weights) {
    return lambda_max(GramSystem::from_data(X, y), weights);
}

std::vector<double> lambda_grid(double lmax, int n_lambda, double ratio) {
    if (n_lambda < 2) throw InvalidArgument("lambda_grid: n_lambda must be >= 2");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("lambda_grid: ratio must be in (0,1)");
    std::vector<double> grid(static_cast<std::size_t>(n_lambda));
    const double step = std::log(ratio) / double(n_lambda - 1);
    for (int i = 0; i < n_lambda; ++i) grid[std::size_t(i)] = lmax * std::exp(step * double(i));
    grid.front() = lmax;
    return grid;
}

std::vector<PathPoint> lasso_path(const GramSystem& sys, const Vector& weights, int n_lambda,
                                  double ratio, const SolverOptions& opts) {
    const std::vector<double> grid = lambda_grid(lambda_max(sys, weights), n_lambda, ratio);
    std::vector<PathPoint> path;
    path.reserve(grid.size());
    Vector warm = Vector::Zero(sys.size());
    for (double lam : grid) {
        PenaltySpec pen{lam, weights};
        SolverResult r = lasso_cd(sys, pen, opts, &warm);
        warm = r.beta;
        path.push_back({lam, std::move(r)});
    }
    return path;
}

std::vector<PathPoint> lasso_path(const Matrix& X, const Vector& y, const Vector& weights,
                                  int n_lambda, double ratio, const SolverOptions& opts) {
    return lasso_path(GramSystem::from_data(X, y), weights, n_lambda, ratio, opts);
}

RidgeResult ridge(const Matrix& X, const Vector& y, double lambda) {
    if (!(lambda > 0.0)) throw InvalidArgument("ridge: lambda must be > 0");
    if (X.rows() != y.size()) throw DimensionMismatch("ridge: rows(X) != len(y)");
    const Index m = X.cols();
    const Matrix xtx = X.transpose() * X;
    Matrix A = xtx;
    A.diagonal().array() += lambda;
    A = 0.5 * (A + A.transpose());
    Matrix rhs(m, m + 1);
    rhs.leftCols(m) = xtx;
    rhs.col(m) = X.transpose() * y;
    const Matrix sol = cholesky_solve(A, rhs);
    return {sol.col(m), sol.leftCols(m).trace()};
}

}  // namespace varlasso
