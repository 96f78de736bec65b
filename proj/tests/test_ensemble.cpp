#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "dwsim/ensemble.hpp"

using namespace dwsim;

TEST(Ensemble, SamplesArePureFunctionsOfSeedAndIndex)
{
    EnsembleSpec spec;
    spec.n_samples = 50;
    const auto a = sample_u1_list(spec);
    const auto b = sample_u1_list(spec);
    EXPECT_EQ(a, b);
    EXPECT_EQ(sample_u1(spec, 17), a[17]);
    spec.seed = 2;
    EXPECT_NE(sample_u1_list(spec), a);
}

TEST(Ensemble, GaussianIsTruncated)
{
    EnsembleSpec spec;
    spec.n_samples = 4000;
    spec.u1_relative_spread = 0.1;
    const auto u = sample_u1_list(spec);
    double mean = 0.0;
    double var = 0.0;
    for (double v : u) {
        const double xi = (v / spec.base.u1_er - 1.0) / 0.1;
        EXPECT_LE(std::abs(xi), 3.0);
        mean += xi;
        var += xi * xi;
    }
    mean /= u.size();
    var = var / u.size() - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(var, 0.973, 0.06);
}

TEST(Ensemble, UniformSpreadMatchesStandardDeviation)
{
    EnsembleSpec spec;
    spec.n_samples = 4000;
    spec.distribution = SpreadDistribution::uniform;
    const auto u = sample_u1_list(spec);
    double var = 0.0;
    for (double v : u) {
        const double xi = (v / spec.base.u1_er - 1.0) / spec.u1_relative_spread;
        EXPECT_LE(std::abs(xi), std::sqrt(3.0) + 1e-12);
        var += xi * xi;
    }
    EXPECT_NEAR(var / u.size(), 1.0, 0.06);
}

TEST(Ensemble, ZeroSpreadEqualsSingleRun)
{
    EnsembleSpec spec;
    spec.u1_relative_spread = 0.0;
    spec.n_samples = 2;
    const auto t = time_grid(300, 10);
    const auto e = ensemble_magnetization(spec, t);
    const auto [single, eps] = single_rabi_magnetization(spec.base, t, spec.flatness_q_points);
    ASSERT_EQ(e.n_used, 2);
    for (std::size_t k = 0; k < t.size(); ++k)
        EXPECT_NEAR(e.mean_fz[k], single[k], 1e-12);
    EXPECT_NEAR(e.samples[0].epsilon_hz, eps, 1e-9);
}

TEST(Ensemble, ReducedSolveMatchesFullPropagation)
{
    const auto cfg = LatticeConfig::canonical();
    const auto t = time_grid(600, 20);
    const auto [reduced, eps] = single_rabi_magnetization(cfg, t, 4);
    const auto full = rabi_from_left(cfg, t);
    for (std::size_t k = 0; k < t.size(); ++k)
        EXPECT_NEAR(reduced[k], full.series.fz[k], 1e-6);
}

TEST(Ensemble, WorkerCountDoesNotChangeResult)
{
    EnsembleSpec spec;
    spec.n_samples = 6;
    const auto t = time_grid(200, 10);
    const auto one = ensemble_magnetization(spec, t, 1);
    const auto many = ensemble_magnetization(spec, t, 3);
    EXPECT_EQ(one.mean_fz, many.mean_fz);
}

TEST(Ensemble, RejectsBadSpec)
{
    EnsembleSpec spec;
    spec.u1_relative_spread = 0.7;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec = {};
    spec.n_samples = 0;
    EXPECT_THROW(spec.validate(), ConfigError);
    EXPECT_THROW(distribution_from_string("cauchy"), ConfigError);
    EXPECT_THROW(ensemble_magnetization(EnsembleSpec{}, {}), ConfigError);
}
