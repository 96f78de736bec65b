#pragma once

// Thin wrappers over LAPACK Hermitian eigensolvers plus a Lanczos propagator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#ifndef LAPACK_COMPLEX_CUSTOM
#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include "dwsim/error.hpp"

namespace dwsim {

using cplx = std::complex<double>;

struct Eigensystem {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXcd vectors; // columns, orthonormal
};

namespace detail {

inline void check_info(lapack_int info, const char* routine)
{
    if (info != 0)
        throw NumericalError(std::string(routine) + " failed, info = " + std::to_string(info));
}

/// Cheap a-posteriori check of an eigensystem with random probe vectors:
/// H (V x) = V (L x) and V^H V x = x, both in O(n^2). Some optimised BLAS
/// builds return wrong eigenvectors on some CPUs; this catches that.
inline bool eigensystem_ok(const Eigen::MatrixXcd& h, const Eigensystem& es)
{
    const auto m = es.vectors.cols();
    if (m == 0)
        return true;
    // fixed probe so results stay deterministic
    Eigen::VectorXcd x(m);
    for (Eigen::Index k = 0; k < m; ++k)
        x(k) = cplx(std::cos(1.7 * static_cast<double>(k) + 0.3), std::sin(2.3 * static_cast<double>(k) + 1.1));
    const Eigen::VectorXcd vx = es.vectors * x;
    const Eigen::VectorXcd lx = es.values.cast<cplx>().cwiseProduct(x);
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff() * static_cast<double>(h.rows()));
    const double resid = (h.selfadjointView<Eigen::Lower>() * vx - es.vectors * lx).norm();
    const double ortho = (es.vectors.adjoint() * vx - x).norm();
    return resid <= 1e-9 * scale * x.norm() && ortho <= 1e-9 * x.norm();
}

inline Eigensystem eigen_fallback(const Eigen::MatrixXcd& h, int count)
{
    const Eigen::MatrixXcd full = h.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(full);
    if (solver.info() != Eigen::Success)
        throw NumericalError("Hermitian eigensolver failed");
    Eigensystem es;
    es.values = solver.eigenvalues().head(count);
    es.vectors = solver.eigenvectors().leftCols(count);
    return es;
}

/// MRRR eigenpairs il..iu (1-based) or all when all = true.
inline Eigensystem zheevr(Eigen::MatrixXcd h, int count, bool all)
{
    const auto n = static_cast<lapack_int>(h.rows());
    Eigen::VectorXd w(n);
    Eigen::MatrixXcd z(n, count);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    lapack_int found = 0;
    check_info(LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', all ? 'A' : 'I', 'L', n, h.data(), n, 0.0, 0.0, 1,
                              count, 0.0, &found, w.data(), z.data(), n, support.data()),
               "zheevr");
    if (found != count)
        throw NumericalError("zheevr returned fewer eigenpairs than requested");
    Eigensystem es;
    es.values = w.head(count);
    es.vectors = std::move(z);
    return es;
}

}  // namespace detail

/// Lowest `count` eigenpairs of h (only the lower triangle is read), verified
/// by probe residuals with a fallback to Eigen's solver.
inline Eigensystem hermitian_lowest(const Eigen::MatrixXcd& h, int count)
{
    const auto n = static_cast<int>(h.rows());
    count = std::clamp(count, 1, n);
    Eigensystem es = detail::zheevr(h, count, count == n);
    if (!detail::eigensystem_ok(h, es))
        es = detail::eigen_fallback(h, count);
    return es;
}

/// Full eigendecomposition.
inline Eigensystem hermitian_eigensystem(const Eigen::MatrixXcd& h)
{
    return hermitian_lowest(h, static_cast<int>(h.rows()));
}

/// Eigenvalues of a banded Hermitian matrix with `kd` sub-diagonals.
/// Storage follows LAPACK lower band layout: band(i - j, j) = h(i, j) for 0 <= i - j <= kd.
inline Eigen::VectorXd banded_eigenvalues(Eigen::MatrixXcd band, int kd)
{
    const auto n = static_cast<lapack_int>(band.cols());
    Eigen::VectorXd w(n);
    cplx dummy{};
    detail::check_info(LAPACKE_zhbevd(LAPACK_COL_MAJOR, 'N', 'L', n, kd, band.data(), kd + 1,
                                      w.data(), &dummy, 1),
                       "zhbevd");
    return w;
}

inline Eigen::MatrixXcd to_lower_band(const Eigen::MatrixXcd& h, int kd)
{
    const auto n = h.rows();
    Eigen::MatrixXcd band = Eigen::MatrixXcd::Zero(kd + 1, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < std::min<Eigen::Index>(n, j + kd + 1); ++i)
            band(i - j, j) = h(i, j);
    return band;
}

/// exp(-i H tau) psi by Lanczos with full reorthogonalisation. The small
/// tridiagonal exponential is evaluated through its eigendecomposition, so the
/// result has exactly the norm of psi up to rounding. `apply(v)` must return H v.
template <class ApplyH>
Eigen::VectorXcd krylov_expm(ApplyH&& apply, const Eigen::VectorXcd& psi, double tau,
                             double tol = 1e-13, int max_dim = 80)
{
    const double beta0 = psi.norm();
    if (beta0 == 0.0 || tau == 0.0)
        return psi;

    const auto n = psi.size();
    max_dim = static_cast<int>(std::min<Eigen::Index>(max_dim, n));
    Eigen::MatrixXcd basis(n, max_dim + 1);
    std::vector<double> alpha;
    std::vector<double> beta;
    basis.col(0) = psi / beta0;

    Eigen::VectorXcd coeffs;
    int dim = 0;
    for (int j = 0; j < max_dim; ++j) {
        Eigen::VectorXcd w = apply(basis.col(j));
        alpha.push_back(basis.col(j).dot(w).real());
        // two passes of classical Gram-Schmidt against the whole basis
        for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXcd proj = basis.leftCols(j + 1).adjoint() * w;
            w -= basis.leftCols(j + 1) * proj;
        }
        const double b = w.norm();
        dim = j + 1;

        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dim, dim);
        for (int k = 0; k < dim; ++k) {
            t(k, k) = alpha[k];
            if (k + 1 < dim)
                t(k, k + 1) = t(k + 1, k) = beta[k];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
        const Eigen::VectorXd first_row = small.eigenvectors().row(0).transpose();
        Eigen::VectorXcd phases(dim);
        for (int k = 0; k < dim; ++k)
            phases(k) = std::exp(cplx(0.0, -small.eigenvalues()(k) * tau)) * first_row(k);
        coeffs = small.eigenvectors().cast<cplx>() * phases;

        const bool invariant = b <= 1e-14 * std::max(1.0, std::abs(alpha[j]));
        if (invariant || b * std::abs(coeffs(dim - 1)) < tol)
            break;
        if (j + 1 == max_dim) {
            // subspace too small for this step: split it
            const Eigen::VectorXcd half = krylov_expm(apply, psi, 0.5 * tau, tol, max_dim);
            return krylov_expm(apply, half, 0.5 * tau, tol, max_dim);
        }
        beta.push_back(b);
        basis.col(j + 1) = w / b;
    }
    return beta0 * (basis.leftCols(dim) * coeffs);
}

}  // namespace dwsim
