#include "varlasso/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "varlasso/rng.hpp"

namespace varlasso {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ln(double x) { return std::log(x); }

void require_positive(Index v, const char* what) {
    if (v < 1) throw InvalidArgument(std::string(what) + " must be >= 1");
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

double lambda_theorem1(Index T, Index k, Index p, double sigma_T) {
    require_positive(T, "T");
    require_positive(k, "k");
    require_positive(p, "p");
    if (!(sigma_T >= 0.0)) throw InvalidArgument("sigma_T must be >= 0");
    const double t = double(T), kk = double(k), pp = double(p);
    const double v = 8.0 * std::pow(ln(1 + t), 5) * std::pow(ln(1 + kk), 4) * std::pow(ln(1 + pp), 2) *
                     ln(kk * kk * pp) * std::pow(sigma_T, 4) / t;
    return std::sqrt(std::max(v, 0.0));
}

double lambda_oracle_ols(Index T, Index s, double sigma_T) {
    require_positive(T, "T");
    require_positive(s, "s");
    if (!(sigma_T >= 0.0)) throw InvalidArgument("sigma_T must be >= 0");
    const double t = double(T), ss = double(s);
    const double v = 8.0 * std::pow(ln(1 + t), 5) * std::pow(ln(1 + ss), 2) * ln(ss) * std::pow(sigma_T, 4) / t;
    return std::sqrt(std::max(v, 0.0));
}

double k_T(Index T, Index k, Index p, double sigma_T) {
    require_positive(T, "T");
    require_positive(k, "k");
    require_positive(p, "p");
    return std::pow(ln(1.0 + double(k)), 2) * std::pow(ln(1.0 + double(p)), 2) * ln(double(T)) * sigma_T * sigma_T;
}

double thm1_probability_bound(Index T, Index k, Index p, double A) {
    require_positive(T, "T");
    if (!(A > 0.0)) throw InvalidArgument("A must be > 0");
    const double k2p = double(k) * double(k) * double(p);
    return 1.0 - 2.0 * std::pow(k2p, 1.0 - ln(1.0 + double(T))) - 2.0 * std::pow(1.0 + double(T), -1.0 / A);
}

double re_perturbation_bound(double kappa_A_sq, Index s, double delta) {
    if (kappa_A_sq < 0.0 || s < 0 || delta < 0.0) throw InvalidArgument("re_perturbation_bound: negative input");
    return std::max(0.0, kappa_A_sq - 16.0 * double(s) * delta);
}

// ---------------------------------------------------------------------------
// Restricted eigenvalue

namespace {

// Euclidean projection onto {x : ||x||_1 <= radius} (Duchi et al. 2008).
Vector project_l1(const Vector& x, double radius) {
    if (radius <= 0.0) return Vector::Zero(x.size());
    if (x.lpNorm<1>() <= radius) return x;
    std::vector<double> a(static_cast<std::size_t>(x.size()));
    for (Index j = 0; j < x.size(); ++j) a[std::size_t(j)] = std::abs(x(j));
    std::sort(a.begin(), a.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        cum += a[j];
        const double t = (cum - radius) / double(j + 1);
        if (a[j] - t > 0.0) theta = t;
    }
    Vector out(x.size());
    for (Index j = 0; j < x.size(); ++j) out(j) = sign_of(x(j)) * std::max(std::abs(x(j)) - theta, 0.0);
    return out;
}

struct SubsetProblem {
    Matrix A;  // psi_RR
    Matrix B;  // psi_R,Rc
    Matrix C;  // psi_RcRc
    double lipschitz = 0.0;  // of v -> 2 B'u + 2 C v

    SubsetProblem(const Matrix& psi, const std::vector<Index>& R) {
        const Index m = psi.rows();
        std::vector<char> in(static_cast<std::size_t>(m), 0);
        for (Index j : R) in[std::size_t(j)] = 1;
        std::vector<Index> Rc;
        for (Index j = 0; j < m; ++j) {
            if (!in[std::size_t(j)]) Rc.push_back(j);
        }
        A = sub_matrix(psi, R, R);
        B = sub_matrix(psi, R, Rc);
        C = sub_matrix(psi, Rc, Rc);
        if (C.size() > 0) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(C, Eigen::EigenvaluesOnly);
            lipschitz = 2.0 * std::max(es.eigenvalues().maxCoeff(), 0.0);
        }
    }

    double value(const Vector& u, const Vector& v) const {
        double f = u.dot(A * u);
        if (v.size() > 0) f += 2.0 * u.dot(B * v) + v.dot(C * v);
        return f;
    }

    // FISTA on v over the l1 ball of radius 3 ||u||_1, warm-started from v.
    double inner(const Vector& u, Vector& v, int max_iter, double tol) const {
        if (C.size() == 0) return value(u, v);
        const double radius = 3.0 * u.lpNorm<1>();
        const Vector lin = 2.0 * B.transpose() * u;
        v = project_l1(v, radius);
        if (!(lipschitz > 0.0)) {
            // C = 0: objective linear in v, minimized at a vertex of the ball.
            Index j;
            lin.cwiseAbs().maxCoeff(&j);
            v.setZero();
            if (lin(j) != 0.0) v(j) = -sign_of(lin(j)) * radius;
            return value(u, v);
        }
        const double step = 1.0 / lipschitz;
        Vector y = v, v_prev = v;
        double t = 1.0;
        for (int it = 0; it < max_iter; ++it) {
            const Vector grad = lin + 2.0 * (C * y);
            const Vector next = project_l1(y - step * grad, radius);
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = next + ((t - 1.0) / t_next) * (next - v_prev);
            const double moved = (next - v_prev).lpNorm<Eigen::Infinity>();
            v_prev = next;
            t = t_next;
            if (moved <= tol * std::max(1.0, radius)) break;
        }
        v = v_prev;
        return value(u, v);
    }

    // Riemannian gradient of u -> min_v f(u, v) on the unit sphere.
    Vector sphere_gradient(const Vector& u, const Vector& v) const {
        Vector g = 2.0 * (A * u);
        if (v.size() > 0) {
            g += 2.0 * (B * v);
            const double radius = 3.0 * u.lpNorm<1>();
            if (v.lpNorm<1>() >= radius * (1.0 - 1e-9) && radius > 0.0) {
                const double mu = (2.0 * B.transpose() * u + 2.0 * C * v).lpNorm<Eigen::Infinity>();
                for (Index j = 0; j < u.size(); ++j) g(j) -= 3.0 * mu * sign_of(u(j));
            }
        }
        g -= g.dot(u) * u;
        return g;
    }
};

std::uint64_t subset_seed(std::uint64_t base, const std::vector<Index>& R) {
    std::uint64_t h = 1469598103934665603ull ^ base;
    for (Index j : R) {
        h ^= std::uint64_t(j) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
    }
    return h;
}

double evaluate_subset(const Matrix& psi, const std::vector<Index>& R, const ReBudget& budget) {
    const SubsetProblem prob(psi, R);
    const Index r = Index(R.size());
    const Index n_rest = psi.rows() - r;

    std::vector<Vector> starts;
    Eigen::SelfAdjointEigenSolver<Matrix> es(prob.A);
    for (Index c = 0; c < r; ++c) starts.emplace_back(es.eigenvectors().col(c));
    NormalStream normals(subset_seed(budget.seed, R));
    for (int s = 0; s < budget.n_random_starts && r > 1; ++s) {
        Vector u(r);
        for (Index j = 0; j < r; ++j) u(j) = normals.next();
        if (u.norm() > 0.0) starts.push_back(u.normalized());
    }

    double best = kInf;
    for (const Vector& start : starts) {
        Vector u = start;
        Vector v = Vector::Zero(n_rest);
        double f = prob.inner(u, v, budget.inner_iter, 1e-10);
        double eta = 0.1 / std::max(1e-12, prob.A.diagonal().maxCoeff());
        for (int it = 0; it < budget.outer_iter && r > 1; ++it) {
            const Vector g = prob.sphere_gradient(u, v);
            if (g.norm() < 1e-12) break;
            bool accepted = false;
            for (int tries = 0; tries < 30; ++tries) {
                Vector cand = u - eta * g;
                const double nc = cand.norm();
                if (nc == 0.0) {
                    eta *= 0.5;
                    continue;
                }
                cand /= nc;
                Vector vc = v;
                const double fc = prob.inner(cand, vc, budget.inner_iter, 1e-10);
                if (fc < f) {
                    u = cand;
                    v = vc;
                    f = fc;
                    eta *= 1.5;
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            if (!accepted) break;
        }
        // Polish the inner solution at the final u; any feasible v still
        // gives an upper estimate.
        f = std::min(f, prob.inner(u, v, 20 * budget.inner_iter, 1e-14));
        best = std::min(best, f);
    }
    return best;
}

double binomial(Index n, Index r) {
    double c = 1.0;
    for (Index i = 1; i <= r; ++i) c = c * double(n - r + i) / double(i);
    return c;
}

template <class F>
void for_each_subset(Index m, Index size, F&& visit) {
    std::vector<Index> idx(static_cast<std::size_t>(size));
    std::iota(idx.begin(), idx.end(), Index(0));
    while (true) {
        visit(idx);
        Index pos = size - 1;
        while (pos >= 0 && idx[std::size_t(pos)] == m - size + pos) --pos;
        if (pos < 0) return;
        ++idx[std::size_t(pos)];
        for (Index q = pos + 1; q < size; ++q) idx[std::size_t(q)] = idx[std::size_t(q - 1)] + 1;
    }
}

}  // namespace

double re_inner_min(const Matrix& psi, const std::vector<Index>& R, const Vector& u, Vector& v, int max_iter,
                    double tol) {
    const SubsetProblem prob(psi, R);
    if (v.size() != psi.rows() - Index(R.size())) v = Vector::Zero(psi.rows() - Index(R.size()));
    return prob.inner(u, v, max_iter, tol);
}

ReEstimate restricted_eigenvalue(const Matrix& psi, Index r, const ReBudget& budget) {
    if (psi.rows() != psi.cols()) throw DimensionMismatch("restricted_eigenvalue: psi must be square");
    const Index m = psi.rows();
    if (r < 1 || r > m) throw InvalidArgument("restricted_eigenvalue: need 1 <= r <= m");
    if (max_abs(psi - psi.transpose()) > 1e-10 * std::max(1.0, max_abs(psi))) {
        throw InvalidArgument("restricted_eigenvalue: psi not symmetric");
    }

    ReEstimate est;
    est.value = kInf;
    auto consider = [&](const std::vector<Index>& R) {
        const double v = evaluate_subset(psi, R, budget);
        ++est.subsets_evaluated;
        if (v < est.value) {
            est.value = v;
            est.argmin_set = R;
        }
    };

    double total = 0.0;
    for (Index s = 1; s <= r; ++s) total += binomial(m, s);
    for (Index s = 1; s <= r; ++s) {
        if (total <= double(budget.enumeration_cap) || binomial(m, s) <= double(budget.n_samples)) {
            for_each_subset(m, s, consider);
            continue;
        }
        est.enumerated = false;
        // Samples depend only on (seed, s), so the set for r contains the set for r - 1.
        Philox4x32 gen(budget.seed * 0x9e3779b97f4a7c15ull + std::uint64_t(s));
        std::vector<Index> perm(static_cast<std::size_t>(m));
        for (std::size_t draw = 0; draw < budget.n_samples; ++draw) {
            std::iota(perm.begin(), perm.end(), Index(0));
            for (Index q = 0; q < s; ++q) {
                const auto span = std::uint64_t(m - q);
                const Index pick = q + Index(gen.next_u64() % span);
                std::swap(perm[std::size_t(q)], perm[std::size_t(pick)]);
            }
            std::vector<Index> R(perm.begin(), perm.begin() + s);
            std::sort(R.begin(), R.end());
            consider(R);
        }
    }
    return est;
}

double f_norm_sum(const VarModel& model, Index T) {
    const CompanionForm cf = companion(model);
    if (cf.rho >= 1.0 - 1e-8) throw NotStationary("f_norm_sum: model not stationary");
    const Matrix gamma = lyapunov_doubling(cf.F, cf.omega);
    const Index n = cf.F.rows();
    Matrix power = Matrix::Identity(n, n);
    double sum = 0.0;
    for (Index i = 0; i <= T; ++i) {
        const double term = operator_norm(power);
        if (term < 1e-12) break;
        sum += term;
        power = power * cf.F;
    }
    return operator_norm(gamma) * sum;
}

void TheoryParams::validate() const {
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("TheoryParams: q must be in (0,1)");
    if (!(A_const > 0.0)) throw InvalidArgument("TheoryParams: A must be > 0");
    for (double kp : kappa_gamma_sq) {
        if (!(kp >= 0.0)) throw InvalidArgument("TheoryParams: kappa must be >= 0");
    }
}

TheoryParams make_theory_params(const VarModel& model, const SparsityInfo& truth, Index T, double q, double A,
                                const ReBudget& budget) {
    TheoryParams params;
    params.q = q;
    params.A_const = A;
    const Matrix gamma = population_gamma(model);
    const Index m = gamma.rows();
    std::map<Index, double> cache;
    auto kappa = [&](Index s) {
        const Index r = std::clamp<Index>(s, 1, m);
        auto it = cache.find(r);
        if (it == cache.end()) it = cache.emplace(r, restricted_eigenvalue(gamma, r, budget).value).first;
        return it->second;
    };
    for (Index s : truth.s) params.kappa_gamma_sq.push_back(kappa(s));
    params.kappa_gamma_sq_sbar = kappa(truth.s_bar);
    params.f_norm_sum = f_norm_sum(model, T);
    params.sigma_T = sigma_T(model);
    params.lambda = lambda_theorem1(T, model.k(), model.p(), params.sigma_T);
    params.validate();
    return params;
}

EventFlags event_flags(const Dataset& data, const VarModel& model, const SparsityInfo& truth,
                       const TheoryParams& params) {
    if (!data.innovations) throw MissingInnovations("event_flags: dataset has no innovations");
    params.validate();
    const RegressionProblem prob = stack(data);
    const double T = double(data.T);
    const Matrix gamma = population_gamma(model);

    EventFlags ev;
    ev.max_cross = max_abs((prob.X.transpose() * *data.innovations) / T);
    ev.max_cov_dev = max_abs(prob.psi - gamma);
    ev.max_yy = max_abs(prob.psi);

    const double sbar = double(std::max<Index>(truth.s_bar, 1));
    ev.b_threshold = params.lambda / 2.0;
    ev.c_threshold = (1.0 - params.q) * params.kappa_gamma_sq_sbar / (16.0 * sbar);
    ev.d_threshold = k_T(data.T, model.k(), model.p(), params.sigma_T);
    ev.b_t = ev.max_cross < ev.b_threshold;
    ev.c_t = ev.max_cov_dev <= ev.c_threshold;
    ev.d_t = ev.max_yy < ev.d_threshold;
    return ev;
}

Thm1Report thm1_rhs_check(const RegressionProblem& problem, const Vector& beta_hat, const Vector& beta_star,
                          double lambda) {
    if (beta_hat.size() != problem.n_regressors() || beta_star.size() != beta_hat.size()) {
        throw DimensionMismatch("thm1_rhs_check: coefficient length");
    }
    const Vector diff = beta_hat - beta_star;
    const double pred = (problem.X * diff).squaredNorm() / double(problem.T());
    const double l1 = diff.lpNorm<1>();
    double diff_J = 0.0, diff_Jc = 0.0, star_J = 0.0;
    for (Index j = 0; j < diff.size(); ++j) {
        if (beta_star(j) != 0.0) {
            diff_J += std::abs(diff(j));
            star_J += std::abs(beta_star(j));
        } else {
            diff_Jc += std::abs(diff(j));
        }
    }
    Thm1Report rep;
    rep.iq1 = {pred + lambda * l1, 2.0 * lambda * (l1 + beta_star.lpNorm<1>() - beta_hat.lpNorm<1>())};
    rep.iq2 = {pred + lambda * l1, 4.0 * lambda * std::min(diff_J, star_J)};
    rep.iq3 = {diff_Jc, 3.0 * diff_J};
    return rep;
}

Thm3Bounds thm3_bounds(Index s, double lambda, double kappa_sq, double q) {
    if (!(kappa_sq > 0.0)) throw ZeroKappa("thm3_bounds: kappa^2 must be > 0");
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("thm3_bounds: q must be in (0,1)");
    const double c = 16.0 / (q * kappa_sq) * double(s);
    return {c * lambda * lambda, c * lambda};
}

double oracle_ols_bound(Index s, double lambda_tilde, double phi_min, double q) {
    if (!(phi_min > 0.0)) throw InvalidArgument("oracle_ols_bound: phi_min must be > 0");
    return lambda_tilde / (2.0 * q * phi_min) * double(s);
}

double zeta(double q, double kappa_sq, double f_norm_sum) {
    if (!(f_norm_sum > 0.0)) throw InvalidArgument("zeta: f_norm_sum must be > 0");
    return (1.0 - q) * (1.0 - q) * kappa_sq * kappa_sq / (4.0 * 16.0 * 16.0 * 16.0 * f_norm_sum * f_norm_sum);
}

double pi_q(Index s, Index k, Index p, Index T, double zeta_value) {
    require_positive(s, "s");
    require_positive(k, "k");
    require_positive(p, "p");
    if (T < 2) throw InvalidArgument("pi_q: T must be >= 2");
    const double kp2 = double(k) * double(k) * double(p) * double(p);
    const double lT = ln(double(T));
    const double expo = -zeta_value * double(T) / (double(s) * double(s) * lT * (ln(kp2) + 1.0));
    return 4.0 * kp2 * std::exp(expo) + 2.0 * std::pow(kp2, 1.0 - lT);
}

double system_bound(const std::vector<double>& est_bounds) {
    return std::accumulate(est_bounds.begin(), est_bounds.end(), 0.0);
}

SignRecoveryReport sign_recovery_conditions(const RegressionProblem& problem, Index i, const Vector& eps,
                                            const Vector& stage1, const Vector& beta_star, double lambda,
                                            double K_T, double phi_min_gamma, double q) {
    const Index m = problem.n_regressors();
    if (stage1.size() != m || beta_star.size() != m || eps.size() != problem.T()) {
        throw DimensionMismatch("sign_recovery_conditions: inconsistent lengths");
    }
    if (i < 0 || i >= problem.n_equations()) throw InvalidArgument("sign_recovery_conditions: bad equation");
    const double T = double(problem.T());

    std::vector<Index> J, Jc;
    for (Index j = 0; j < m; ++j) (beta_star(j) != 0.0 ? J : Jc).push_back(j);
    const Index s = Index(J.size());
    double beta_min = kInf;
    for (Index j : J) beta_min = std::min(beta_min, std::abs(beta_star(j)));

    SignRecoveryReport rep;
    rep.l1_error = (stage1 - beta_star).lpNorm<1>();
    rep.beta_min_premise = beta_min >= 2.0 * rep.l1_error;
    const double qphi = q * phi_min_gamma;
    const double inv_bmin = std::isinf(beta_min) ? 0.0 : 1.0 / beta_min;
    rep.adalasso1 = {double(s) * K_T / qphi * (0.5 + 2.0 * inv_bmin) * rep.l1_error + rep.l1_error / 2.0, 1.0};
    rep.adalasso2 = {std::sqrt(double(s)) / qphi * (lambda / 2.0 + 2.0 * lambda * inv_bmin), beta_min};

    Vector w(m);
    for (Index j = 0; j < m; ++j) w(j) = stage1(j) != 0.0 ? 1.0 / std::abs(stage1(j)) : kInf;
    rep.support_retained = std::all_of(J.begin(), J.end(), [&](Index j) { return stage1(j) != 0.0; });

    const Vector xe = problem.X.transpose() * eps / T;
    Vector a = Vector::Zero(s);
    if (s > 0 && rep.support_retained) {
        Vector rhs(s);
        for (Index c = 0; c < s; ++c) {
            const Index j = J[std::size_t(c)];
            rhs(c) = xe(j) - lambda * sign_of(beta_star(j)) * w(j);
        }
        try {
            a = cholesky_solve(sub_matrix(problem.psi, J, J), rhs);
        } catch (const Error& e) {
            throw SingularSubGram(std::string("sign_recovery_conditions: ") + e.what());
        }
    }

    rep.foc2_margin = kInf;
    if (rep.support_retained) {
        for (Index c = 0; c < s; ++c) {
            const Index j = J[std::size_t(c)];
            rep.foc2_margin = std::min(rep.foc2_margin, sign_of(beta_star(j)) * (beta_star(j) + a(c)));
        }
    } else {
        rep.foc2_margin = -kInf;
    }
    rep.foc2 = rep.foc2_margin > 0.0;

    rep.foc1_margin = kInf;
    for (Index j : Jc) {
        if (std::isinf(w(j))) continue;  // excluded by the first stage
        double lhs = -xe(j);
        for (Index c = 0; c < s && rep.support_retained; ++c) lhs += problem.psi(j, J[std::size_t(c)]) * a(c);
        rep.foc1_margin = std::min(rep.foc1_margin, lambda * w(j) - std::abs(lhs));
    }
    rep.foc1 = rep.foc1_margin >= 0.0;
    return rep;
}

}  // namespace varlasso
