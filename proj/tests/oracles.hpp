#pragma once
// Reference computations used by the tests. They deliberately avoid the
// library's own kernels so that agreement means something.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix random_spd(std::mt19937_64& gen, int m, double ridge = 0.1) {
    std::normal_distribution<double> n01;
    Matrix A(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) A(i, j) = n01(gen);
    Matrix S = A * A.transpose() / double(m);
    S.diagonal().array() += ridge;
    return S;
}

inline Matrix random_matrix(std::mt19937_64& gen, int r, int c) {
    std::normal_distribution<double> n01;
    Matrix A(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) A(i, j) = n01(gen);
    return A;
}

// Normal equations solved by full-pivot LU, no QR and no Cholesky.
inline Vector ols(const Matrix& X, const Vector& y) {
    return (X.transpose() * X).fullPivLu().solve(X.transpose() * y);
}

// Gamma = sum_i F^i Omega F^i' summed until the terms vanish.
inline Matrix lyapunov_series(const Matrix& F, const Matrix& Omega) {
    Matrix gamma = Omega;
    Matrix P = F;
    for (int i = 0; i < 100000; ++i) {
        const Matrix term = P * Omega * P.transpose();
        gamma += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
        P = P * F;
    }
    return gamma;
}

// min over the face structure of the cross-polytope ||v||_1 <= c of the convex
// quadratic v'Qv + 2 g'v. Every face {v_S = s * t, sum_S s_j v_j = c} and the
// interior are tried; the best feasible stationary point is exact.
inline double l1_ball_qp(const Matrix& Q, const Vector& g, double c) {
    const int n = int(g.size());
    if (n == 0) return 0.0;
    auto value = [&](const Vector& v) { return v.dot(Q * v) + 2.0 * g.dot(v); };
    double best = 0.0;  // v = 0
    {
        Eigen::FullPivLU<Matrix> lu(Q);
        if (lu.isInvertible()) {
            const Vector v = lu.solve(-g);
            if (v.lpNorm<1>() <= c) best = std::min(best, value(v));
        }
    }
    // Each coordinate is -1, 0 or +1 on the face; base-3 enumeration.
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (int code = 1; code < total; ++code) {
        std::vector<int> S;
        std::vector<double> sign;
        int rem = code;
        for (int i = 0; i < n; ++i) {
            const int d = rem % 3;
            rem /= 3;
            if (d != 0) {
                S.push_back(i);
                sign.push_back(d == 1 ? 1.0 : -1.0);
            }
        }
        const int a = int(S.size());
        // KKT of min over the hyperplane s'v_S = c: [2Q_SS s; s' 0][v; mu] = [-2g_S; c].
        Matrix K = Matrix::Zero(a + 1, a + 1);
        Vector rhs(a + 1);
        for (int r = 0; r < a; ++r) {
            for (int q = 0; q < a; ++q) K(r, q) = 2.0 * Q(S[r], S[q]);
            K(r, a) = sign[r];
            K(a, r) = sign[r];
            rhs(r) = -2.0 * g(S[r]);
        }
        rhs(a) = c;
        Eigen::FullPivLU<Matrix> lu(K);
        if (!lu.isInvertible()) continue;
        const Vector sol = lu.solve(rhs);
        Vector v = Vector::Zero(n);
        bool ok = true;
        for (int r = 0; r < a; ++r) {
            if (sol(r) * sign[r] < -1e-14) ok = false;
            v(S[r]) = sol(r);
        }
        if (ok) best = std::min(best, value(v));
    }
    return best;
}

// Cone ratio at u on R, minimised over v = d_Rc exactly.
inline double cone_ratio(const Matrix& psi, const std::vector<int>& R, const Vector& u) {
    const int m = int(psi.rows());
    std::vector<int> Rc;
    for (int j = 0; j < m; ++j) {
        bool in = false;
        for (int r : R) in = in || r == j;
        if (!in) Rc.push_back(j);
    }
    Matrix Q(Rc.size(), Rc.size());
    Vector g(Rc.size());
    for (std::size_t a = 0; a < Rc.size(); ++a) {
        for (std::size_t b = 0; b < Rc.size(); ++b) Q(a, b) = psi(Rc[a], Rc[b]);
        double s = 0.0;
        for (std::size_t r = 0; r < R.size(); ++r) s += psi(Rc[a], R[r]) * u(r);
        g(a) = s;
    }
    double quad = 0.0;
    for (std::size_t a = 0; a < R.size(); ++a)
        for (std::size_t b = 0; b < R.size(); ++b) quad += u(a) * psi(R[a], R[b]) * u(b);
    return quad + l1_ball_qp(Q, g, 3.0 * u.lpNorm<1>());
}

// Brute-force kappa^2(r) for r <= 2: every subset, a fine angular grid on the
// unit circle for |R| = 2 followed by local grid refinement.
inline double re_brute_force(const Matrix& psi, int r) {
    const int m = int(psi.rows());
    double best = 1e300;
    for (int i = 0; i < m; ++i) {
        Vector u(1);
        u << 1.0;
        best = std::min(best, cone_ratio(psi, {i}, u));
    }
    if (r < 2) return best;
    const double pi = std::acos(-1.0);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            auto at = [&](double th) {
                Vector u(2);
                u << std::cos(th), std::sin(th);
                return cone_ratio(psi, {i, j}, u);
            };
            const int n = 720;
            double th_best = 0.0, f_best = 1e300;
            for (int s = 0; s < n; ++s) {
                const double th = pi * s / n;
                const double f = at(th);
                if (f < f_best) {
                    f_best = f;
                    th_best = th;
                }
            }
            double width = pi / n;
            for (int level = 0; level < 6; ++level) {
                const double lo = th_best - width;
                for (int s = 0; s <= 40; ++s) {
                    const double th = lo + 2.0 * width * s / 40;
                    const double f = at(th);
                    if (f < f_best) {
                        f_best = f;
                        th_best = th;
                    }
                }
                width /= 20.0;
            }
            best = std::min(best, f_best);
        }
    }
    return best;
}

// Lasso objective of the library, written out directly.
inline double lasso_objective(const Matrix& X, const Vector& y, const Vector& b, double lambda,
                              const Vector& w) {
    double pen = 0.0;
    for (int j = 0; j < b.size(); ++j) pen += w(j) * std::abs(b(j));
    return (y - X * b).squaredNorm() / double(X.rows()) + 2.0 * lambda * pen;
}

// Two-coordinate lasso minimised by repeated zooming grid search.
inline Vector lasso_grid_2d(const Matrix& X, const Vector& y, double lambda, const Vector& w) {
    const double T = double(X.rows());
    const Matrix G = X.transpose() * X / T;
    const Vector xy = X.transpose() * y / T;
    const double yy = y.squaredNorm() / T;
    auto f_at = [&](const Vector& b) {
        return yy - 2.0 * xy.dot(b) + b.dot(G * b) +
               2.0 * lambda * (w(0) * std::abs(b(0)) + w(1) * std::abs(b(1)));
    };
    Vector center = ols(X, y);
    double half = 2.0 * center.cwiseAbs().maxCoeff() + 1.0;
    Vector best = center;
    double f_best = f_at(best);
    const int n = 100;
    for (int level = 0; level < 12; ++level) {
        for (int a = -n; a <= n; ++a) {
            for (int b = -n; b <= n; ++b) {
                Vector v(2);
                v << center(0) + half * a / n, center(1) + half * b / n;
                // Exact zeros are candidates too; the grid may straddle them.
                for (int z = 0; z < 4; ++z) {
                    Vector c = v;
                    if (z & 1) c(0) = 0.0;
                    if (z & 2) c(1) = 0.0;
                    const double f = f_at(c);
                    if (f < f_best) {
                        f_best = f;
                        best = c;
                    }
                }
            }
        }
        center = best;
        half *= 4.0 / n;
    }
    return best;
}

}  // namespace oracle
