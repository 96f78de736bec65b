#pragma once

// Reference computations that share no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace oracle {

using cplx = std::complex<double>;

struct Lattice {
    double u1_er = 84.0;
    double theta_deg = 80.0;
    double bx_mg = 85.0;
    double bz_mg = 0.0;
    bool quadrature = true;  // fictitious term ~ sin(2x), else cos(2x)
};

inline constexpr double hbar = 1.05457181765e-34;
inline constexpr double mu_b = 9.27401007830e-24;
inline constexpr double amu = 1.66053906660e-27;
inline constexpr double cs_mass = 132.905451961 * amu;
inline constexpr double wavelength = 852.35e-9;
inline constexpr double g_f = 0.25;

inline double recoil_j()
{
    const double k = 2.0 * std::numbers::pi / wavelength;
    return hbar * hbar * k * k / (2.0 * cs_mass);
}

inline double recoil_hz() { return recoil_j() / (2.0 * std::numbers::pi * hbar); }

/// g_F mu_B B / E_R for B in mG.
inline double zeeman_er(double b_mg) { return g_f * mu_b * b_mg * 1e-7 / recoil_j(); }

/// F = 4 spin matrices from the m-basis matrix elements, m ascending.
struct Spin {
    Eigen::MatrixXcd fx = Eigen::MatrixXcd::Zero(9, 9);
    Eigen::MatrixXcd fz = Eigen::MatrixXcd::Zero(9, 9);
    Spin()
    {
        for (int i = 0; i < 9; ++i) {
            const double m = i - 4.0;
            fz(i, i) = m;
            if (i + 1 < 9) {
                const double c = 0.5 * std::sqrt(4.0 * 5.0 - m * (m + 1.0));
                fx(i + 1, i) = c;
                fx(i, i + 1) = c;
            }
        }
    }
};

/// 9x9 light-shift plus Zeeman potential at x = k_L z, in E_R.
inline Eigen::MatrixXcd potential(const Lattice& p, double x)
{
    static const Spin s;
    const double th = p.theta_deg * std::numbers::pi / 180.0;
    const double scalar = 4.0 * p.u1_er / 3.0 * (1.0 + std::cos(th) * std::cos(2.0 * x));
    const double wave = p.quadrature ? std::sin(2.0 * x) : std::cos(2.0 * x);
    const double bfict = -g_f * 2.0 * p.u1_er / 3.0 * std::sin(th) * wave;
    Eigen::MatrixXcd u = scalar * Eigen::MatrixXcd::Identity(9, 9);
    u += (bfict + zeeman_er(p.bz_mg)) * s.fz;
    u += zeeman_er(p.bx_mg) * s.fx;
    return u;
}

/// Lowest `count` Bloch energies at quasimomentum q (units of k_L) from a
/// second-order finite-difference grid over one period with twisted boundary
/// psi(x + pi) = exp(i q pi) psi(x). Shift-invert subspace iteration.
inline Eigen::VectorXd fd_bands(const Lattice& p, double q, int count, int points = 2048)
{
    const int n = points;
    const int d = 9;
    const int dim = n * d;
    const double h = std::numbers::pi / n;
    const double kin = 1.0 / (h * h);
    const cplx twist = std::polar(1.0, q * std::numbers::pi);

    std::vector<Eigen::Triplet<cplx>> trips;
    double floor = 1e300;
    for (int j = 0; j < n; ++j) {
        const Eigen::MatrixXcd u = potential(p, j * h);
        floor = std::min(floor, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(u).eigenvalues()(0));
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b)
                if (std::abs(u(a, b)) > 0.0)
                    trips.emplace_back(j * d + a, j * d + b, u(a, b) + (a == b ? 2.0 * kin : 0.0));
            const int right = (j + 1) % n;
            const cplx w = j + 1 == n ? twist : cplx(1.0);
            trips.emplace_back(j * d + a, right * d + a, -kin * w);
            trips.emplace_back(right * d + a, j * d + a, -kin * std::conj(w));
        }
    }
    Eigen::SparseMatrix<cplx> hm(dim, dim);
    hm.setFromTriplets(trips.begin(), trips.end());

    // kinetic energy is non-negative, so floor - 1 lies below the spectrum
    const double sigma = floor - 1.0;
    Eigen::SparseMatrix<cplx> shifted = hm;
    for (int i = 0; i < dim; ++i)
        shifted.coeffRef(i, i) -= sigma;
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(shifted);

    const int block = count + 6;
    Eigen::MatrixXcd v(dim, block);
    for (int i = 0; i < dim; ++i)
        for (int c = 0; c < block; ++c)
            v(i, c) = cplx(std::cos(0.37 * i + 1.3 * c), std::sin(0.11 * i * (c + 1)));
    Eigen::VectorXd ritz = Eigen::VectorXd::Zero(count);
    for (int it = 0; it < 300; ++it) {
        Eigen::MatrixXcd w = lu.solve(v);
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(w);
        v = qr.householderQ() * Eigen::MatrixXcd::Identity(dim, block);
        const Eigen::MatrixXcd small = v.adjoint() * (hm * v);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (small + small.adjoint()));
        v = v * es.eigenvectors();
        const Eigen::VectorXd next = es.eigenvalues().head(count);
        const double change = (next - ritz).cwiseAbs().maxCoeff();
        ritz = next;
        if (it > 2 && change < 1e-11 * (1.0 + ritz.cwiseAbs().maxCoeff()))
            break;
    }
    return ritz;
}

/// Frequency of the largest peak of the mean-removed discrete spectrum,
/// refined on a fine grid (t in us, result in Hz).
inline double dominant_frequency_hz(const std::vector<double>& t_us, const std::vector<double>& y,
                                    double f_max_hz)
{
    double mean = 0.0;
    for (double v : y)
        mean += v;
    mean /= static_cast<double>(y.size());
    auto power = [&](double f) {
        cplx s = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k)
            s += (y[k] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * f * t_us[k] * 1e-6);
        return std::norm(s);
    };
    const double span = (t_us.back() - t_us.front()) * 1e-6;
    double df = 0.05 / span;
    double best = df;
    double best_p = -1.0;
    for (double f = df; f < f_max_hz; f += df) {
        const double pw = power(f);
        if (pw > best_p) {
            best_p = pw;
            best = f;
        }
    }
    for (int round = 0; round < 4; ++round) {
        const double lo = best - df;
        df /= 20.0;
        for (double f = lo; f <= lo + 40.0 * df; f += df) {
            const double pw = power(f);
            if (pw > best_p) {
                best_p = pw;
                best = f;
            }
        }
    }
    return best;
}

/// P_R(t) of a two-level system with tunneling splitting eps and detuning delta (Hz).
inline double two_level_pr(double eps_hz, double delta_hz, double t_us)
{
    const double om = std::hypot(eps_hz, delta_hz);
    const double s = std::sin(std::numbers::pi * om * t_us * 1e-6);
    return eps_hz * eps_hz / (om * om) * s * s;
}

}  // namespace oracle
