#pragma once

// Dense kernels shared by the rest of the library. Everything here is a free
// function templated on the Eigen expression type, so fixed-size, mapped and
// dynamic matrices of any real scalar are accepted.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "varlasso/errors.hpp"

namespace varlasso {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;
using Index = Eigen::Index;

/// Largest absolute entry; 0 for empty input.
template <class Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& a) {
    if (a.size() == 0) return typename Derived::Scalar(0);
    return a.cwiseAbs().maxCoeff();
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
    return a.allFinite();
}

/// Solves A X = B for symmetric positive-definite A.
///
/// A must be symmetric to `sym_tol` relative to its largest entry. A pivot
/// (squared Cholesky diagonal) at or below `pivot_tol` times the largest
/// diagonal entry of A raises NotPositiveDefinite.
template <class DerivedA, class DerivedB>
Mat<typename DerivedA::Scalar> cholesky_solve(const Eigen::MatrixBase<DerivedA>& A,
                                              const Eigen::MatrixBase<DerivedB>& B,
                                              typename DerivedA::Scalar sym_tol = 1e-10,
                                              typename DerivedA::Scalar pivot_tol = 1e-12) {
    using Scalar = typename DerivedA::Scalar;
    if (A.rows() != A.cols() || A.rows() != B.rows()) {
        throw DimensionMismatch("cholesky_solve: A must be square with rows(A) == rows(B)");
    }
    const Scalar scale = max_abs(A);
    if (max_abs(A - A.transpose()) > sym_tol * scale) {
        throw InvalidArgument("cholesky_solve: matrix is not symmetric");
    }
    const Index n = A.rows();
    if (n == 0) return Mat<Scalar>(0, B.cols());

    Eigen::LLT<Mat<Scalar>> llt(A.derived());
    if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("cholesky_solve: factorization failed");
    }
    const Scalar max_diag = A.diagonal().maxCoeff();
    const auto L = llt.matrixL();
    Mat<Scalar> Lm = L;
    const Scalar min_pivot = Lm.diagonal().array().square().minCoeff();
    if (!(max_diag > Scalar(0)) || min_pivot <= pivot_tol * max_diag) {
        throw NotPositiveDefinite("cholesky_solve: pivot " + std::to_string(double(min_pivot)) +
                                  " below threshold");
    }
    return llt.solve(B.derived());
}

/// argmin ||y - X b||^2 via column-pivoted Householder QR.
///
/// Raises SingularDesign when the design is rank deficient, i.e. the smallest
/// squared R pivot is below `pivot_tol` times the largest (equivalently the
/// pivots of X'X).
template <class DerivedX, class DerivedY>
Vec<typename DerivedX::Scalar> least_squares(const Eigen::MatrixBase<DerivedX>& X,
                                             const Eigen::MatrixBase<DerivedY>& y,
                                             typename DerivedX::Scalar pivot_tol = 1e-10) {
    using Scalar = typename DerivedX::Scalar;
    if (X.rows() != y.rows()) throw DimensionMismatch("least_squares: rows(X) != len(y)");
    const Index m = X.cols();
    if (m == 0) return Vec<Scalar>(0);
    if (X.rows() < m) throw SingularDesign("least_squares: fewer rows than columns");

    Eigen::ColPivHouseholderQR<Mat<Scalar>> qr(X.derived());
    const auto R = qr.matrixQR().diagonal().cwiseAbs();
    const Scalar rmax = R.maxCoeff();
    const Scalar rmin = R.minCoeff();
    if (!(rmax > Scalar(0)) || rmin * rmin <= pivot_tol * rmax * rmax) {
        throw SingularDesign("least_squares: design is rank deficient");
    }
    return qr.solve(y.derived());
}

/// Operator 2-norm by power iteration on A'A.
template <class Derived>
typename Derived::Scalar operator_norm(const Eigen::MatrixBase<Derived>& A,
                                       typename Derived::Scalar tol = 1e-12,
                                       int max_iter = 500) {
    using Scalar = typename Derived::Scalar;
    const Index n = A.cols();
    if (A.size() == 0) return Scalar(0);
    const Mat<Scalar> AtA = A.transpose() * A;
    // Deterministic start that is not orthogonal to a coordinate-aligned
    // dominant singular vector.
    Vec<Scalar> v(n);
    for (Index j = 0; j < n; ++j) v(j) = Scalar(1) + Scalar(j + 1) / Scalar(n + 1);
    v.normalize();
    Scalar mu = Scalar(0);
    for (int it = 0; it < max_iter; ++it) {
        Vec<Scalar> w = AtA * v;
        const Scalar nw = w.norm();
        if (nw == Scalar(0)) return Scalar(0);
        const Scalar next = v.dot(w);
        w /= nw;
        v = w;
        if (std::abs(next - mu) <= tol * std::abs(next)) {
            mu = next;
            break;
        }
        mu = next;
    }
    return std::sqrt(std::max(mu, Scalar(0)));
}

/// Spectral radius by norm doubling: rho ~ ||F^(2^m)||^(1/2^m).
///
/// The powers are renormalised after each squaring and the scale is carried
/// in log space, so the iteration neither overflows nor underflows for any
/// finite input. Stops when successive estimates differ by less than `tol`
/// on two consecutive doublings; NonConvergence after `max_doublings`.
template <class Derived>
typename Derived::Scalar spectral_radius(const Eigen::MatrixBase<Derived>& F,
                                         typename Derived::Scalar tol = 1e-6,
                                         int max_doublings = 60) {
    using Scalar = typename Derived::Scalar;
    if (F.rows() != F.cols()) throw DimensionMismatch("spectral_radius: matrix must be square");
    if (F.size() == 0) return Scalar(0);
    if (!F.allFinite()) throw Overflow("spectral_radius: non-finite input");

    Mat<Scalar> B = F;
    Scalar log_scale = Scalar(0);  // log of the factor removed from F^(2^m)
    Scalar power = Scalar(1);      // 2^m
    auto estimate = [&](const Mat<Scalar>& M) -> Scalar {
        const Scalar nrm = operator_norm(M);
        if (nrm == Scalar(0)) return Scalar(0);
        return std::exp((log_scale + std::log(nrm)) / power);
    };
    {
        const Scalar f = B.stableNorm();
        if (f == Scalar(0)) return Scalar(0);
        B /= f;
        log_scale = std::log(f);
    }
    Scalar prev = estimate(B);
    // A single small step can be a coincidence (nilpotent parts), so two in
    // a row are required.
    int settled = 0;
    for (int m = 1; m <= max_doublings; ++m) {
        B = (B * B).eval();
        log_scale *= Scalar(2);
        power *= Scalar(2);
        const Scalar f = B.stableNorm();
        if (!std::isfinite(f)) throw Overflow("spectral_radius: power norm not representable");
        if (f == Scalar(0)) return Scalar(0);  // nilpotent
        B /= f;
        log_scale += std::log(f);
        const Scalar cur = estimate(B);
        if (!std::isfinite(cur)) throw Overflow("spectral_radius: estimate not representable");
        settled = std::abs(cur - prev) < tol ? settled + 1 : 0;
        if (settled == 2) return cur;
        prev = cur;
    }
    throw NonConvergence("spectral_radius: no convergence after " + std::to_string(max_doublings) +
                         " doublings");
}

/// Solves Gamma = F Gamma F' + Omega by the doubling iteration
/// Gamma <- Gamma + A Gamma A', A <- A^2 starting from (Omega, F).
template <class DerivedF, class DerivedO>
Mat<typename DerivedF::Scalar> lyapunov_doubling(const Eigen::MatrixBase<DerivedF>& F,
                                                 const Eigen::MatrixBase<DerivedO>& Omega,
                                                 typename DerivedF::Scalar tol = 1e-13,
                                                 int max_iter = 100) {
    using Scalar = typename DerivedF::Scalar;
    if (F.rows() != F.cols() || Omega.rows() != F.rows() || Omega.cols() != F.cols()) {
        throw DimensionMismatch("lyapunov_doubling: F and Omega must be square of equal size");
    }
    if (F.size() == 0) return Mat<Scalar>(0, 0);
    const Scalar rho = spectral_radius(F);
    if (rho >= Scalar(1) - Scalar(1e-8)) {
        throw NotStationary("lyapunov_doubling: spectral radius " + std::to_string(double(rho)));
    }
    Mat<Scalar> gamma = Omega;
    Mat<Scalar> A = F;
    for (int it = 0; it < max_iter; ++it) {
        const Mat<Scalar> inc = A * gamma * A.transpose();
        gamma += inc;
        if (max_abs(inc) < tol) {
            return Scalar(0.5) * (gamma + gamma.transpose());
        }
        A = (A * A).eval();
    }
    throw NonConvergence("lyapunov_doubling: increments did not fall below tolerance");
}

/// Smallest eigenvalue of a symmetric matrix.
template <class Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& S) {
    using Scalar = typename Derived::Scalar;
    if (S.size() == 0) return std::numeric_limits<Scalar>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(S.derived(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Gathers rows/columns of a symmetric matrix indexed by `idx`.
template <class Derived, class IndexRange>
Mat<typename Derived::Scalar> sub_matrix(const Eigen::MatrixBase<Derived>& M, const IndexRange& rows,
                                         const IndexRange& cols) {
    Mat<typename Derived::Scalar> out(Index(rows.size()), Index(cols.size()));
    Index r = 0;
    for (auto i : rows) {
        Index c = 0;
        for (auto j : cols) out(r, c++) = M(Index(i), Index(j));
        ++r;
    }
    return out;
}

}  // namespace varlasso
