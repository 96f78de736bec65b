#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dwsim/bands.hpp"
#include "dwsim/linalg.hpp"
#include "oracles.hpp"

using namespace dwsim;

TEST(Linalg, LowestEigenpairsMatchReference)
{
    std::mt19937 rng(7);
    std::normal_distribution<double> g;
    for (int n : {5, 60, 441}) {
        Eigen::MatrixXcd a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                a(i, j) = cplx(g(rng), g(rng));
        a = (a + a.adjoint()).eval();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ref(a);
        const auto es = hermitian_lowest(a, std::min(n, 6));
        for (Eigen::Index k = 0; k < es.values.size(); ++k)
            EXPECT_NEAR(es.values(k), ref.eigenvalues()(k), 1e-9 * n);
        const Eigen::MatrixXcd r = a * es.vectors - es.vectors * es.values.asDiagonal();
        EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-9 * n);

        const auto full = hermitian_eigensystem(a);
        const Eigen::MatrixXcd gram = full.vectors.adjoint() * full.vectors;
        EXPECT_LT((gram - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10) << n;
    }
}

TEST(Linalg, BandedMatchesDense)
{
    const BlochHamiltonian h(LatticeConfig::canonical());
    const Eigen::MatrixXcd dense = h.dense(0.3);
    const Eigen::VectorXd band = banded_eigenvalues(to_lower_band(dense, 9), 9);
    const auto ref = hermitian_eigensystem(dense);
    EXPECT_LT((band - ref.values).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Bands, HamiltonianStructure)
{
    const auto cfg = LatticeConfig::canonical();
    const BlochHamiltonian h(cfg);
    EXPECT_EQ(h.dimension(), 49 * 9);
    const Eigen::MatrixXcd m = h.dense(0.4);
    EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-13);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (std::abs(i - j) > 9)
                EXPECT_EQ(m(i, j), cplx(0.0));
    EXPECT_LT((Eigen::MatrixXcd(h.sparse(0.4)) - m).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Bands, ReciprocalLatticePeriodicity)
{
    const auto cfg = LatticeConfig::canonical();
    // shifting q by 2 k_L relabels plane waves; compare away from the basis edge
    const auto a = bloch_spectrum(cfg, -0.3, 6);
    const auto b = bloch_spectrum(cfg, 1.7, 6);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Bands, MatchFiniteDifferenceOracle)
{
    const auto cfg = LatticeConfig::canonical();
    for (double q : {0.0, 0.5}) {
        const auto pw = bloch_spectrum(cfg, q, 4);
        const auto fd = oracle::fd_bands(oracle::Lattice{}, q, 4);
        for (int b = 0; b < 4; ++b)
            EXPECT_LT(std::abs(pw(b) - fd(b)) / std::abs(fd(b)), 1e-4) << "q " << q << " band " << b;
    }
}

TEST(Bands, SolutionInvariants)
{
    auto cfg = LatticeConfig::canonical();
    cfg.n_q = 9;
    const auto sol = solve_bands(cfg, 6);
    ASSERT_EQ(sol.energies.rows(), 9);
    ASSERT_EQ(sol.energies.cols(), 6);
    for (Eigen::Index i = 0; i < sol.energies.rows(); ++i)
        for (Eigen::Index b = 1; b < 6; ++b)
            EXPECT_LE(sol.energies(i, b - 1), sol.energies(i, b));
    EXPECT_LT(sol.certification_drift, 1e-3);
    EXPECT_NEAR(sol.q_grid.front(), -1.0, 1e-12);
    EXPECT_LT(sol.q_grid.back(), 1.0);
    ASSERT_EQ(sol.spinors.size(), 9u);
    for (const auto& s : sol.spinors) {
        const Eigen::MatrixXcd gram = s.adjoint() * s;
        EXPECT_LT((gram - Eigen::MatrixXcd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Bands, DoubletIsFlatAndIsolated)
{
    auto cfg = LatticeConfig::canonical();
    cfg.n_q = 9;
    const auto sol = solve_bands(cfg, 3);
    const auto d = doublet_splitting(sol);
    EXPECT_FALSE(d.dubious);
    EXPECT_GT(d.epsilon_hz, 1000.0);
    EXPECT_LT(d.epsilon_hz, 10000.0);
    const double gap3 = (sol.energies.col(2) - sol.energies.col(1)).mean();
    EXPECT_LT(d.epsilon_er, 0.2 * gap3);
}

TEST(Bands, DoubletIsEvenInBz)
{
    auto cfg = LatticeConfig::canonical();
    cfg.n_q = 5;
    BandOptions bo;
    bo.with_spinors = false;
    cfg.bz_mg = 7.0;
    const double up = doublet_splitting(solve_bands(cfg, 2, bo)).epsilon_hz;
    cfg.bz_mg = -7.0;
    const double down = doublet_splitting(solve_bands(cfg, 2, bo)).epsilon_hz;
    EXPECT_LT(std::abs(up - down) / up, 1e-6);
}

TEST(Bands, RejectsHugeBasis)
{
    auto cfg = LatticeConfig::canonical();
    cfg.n_planewaves = 1000;
    EXPECT_THROW(BlochHamiltonian{cfg}, ConfigError);
}

TEST(Wannier, LocalizedPairGeometry)
{
    const auto w = wannier_doublet(LatticeConfig::canonical());
    EXPECT_NEAR(w.coeff_l.norm(), 1.0, 1e-12);
    EXPECT_NEAR(w.coeff_r.norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(w.coeff_l.dot(w.coeff_r)), 1e-12);
    EXPECT_LT(w.centroid_l_nm, w.centroid_r_nm);
    EXPECT_GT(w.separation_nm(), 105.0);
    EXPECT_LT(w.separation_nm(), 195.0);
    EXPECT_NEAR(wavefunction_norm(w.psi_l), 1.0, 1e-6);
    EXPECT_NEAR(wavefunction_norm(w.psi_s), 1.0, 1e-6);
    const double fl = localized_observables(w.psi_l).fz_mean;
    const double fr = localized_observables(w.psi_r).fz_mean;
    EXPECT_GT(std::abs(fl), 1.0);
    EXPECT_NEAR(fl, -fr, 1e-6);
}

TEST(Wannier, SymmetricStatesSpanDoublet)
{
    const auto cfg = LatticeConfig::canonical();
    const auto w = wannier_doublet(cfg);
    const BlochHamiltonian h(cfg);
    const Eigen::MatrixXcd m = h.dense(0.0);
    EXPECT_LT((m * w.coeff_s - w.energy_s * w.coeff_s).norm(), 1e-8);
    EXPECT_LT((m * w.coeff_a - w.energy_a * w.coeff_a).norm(), 1e-8);
    EXPECT_GT(w.energy_a, w.energy_s);
}
