#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dwsim/bands.hpp"
#include "dwsim/dynamics.hpp"
#include "dwsim/error.hpp"
#include "dwsim/parallel.hpp"

namespace dwsim {

enum class SpreadDistribution { gaussian, uniform };

inline std::string to_string(SpreadDistribution d)
{
    return d == SpreadDistribution::gaussian ? "gaussian" : "uniform";
}

inline SpreadDistribution distribution_from_string(const std::string& s)
{
    if (s == "gaussian")
        return SpreadDistribution::gaussian;
    if (s == "uniform")
        return SpreadDistribution::uniform;
    throw ConfigError("distribution must be gaussian or uniform, got '" + s + "'");
}

/// Static per-atom inhomogeneity of the lattice depth U_1.
struct EnsembleSpec {
    LatticeConfig base = LatticeConfig::canonical();
    double u1_relative_spread = 0.05;
    int n_samples = 200;
    std::uint64_t seed = 1;
    SpreadDistribution distribution = SpreadDistribution::gaussian;
    /// quasimomentum points of the per-sample flatness check
    int flatness_q_points = 4;

    void validate() const
    {
        base.validate();
        if (!(u1_relative_spread >= 0.0 && u1_relative_spread < 0.5))
            throw ConfigError("u1_relative_spread must lie in [0, 0.5), got " +
                              std::to_string(u1_relative_spread));
        if (n_samples < 1)
            throw ConfigError("n_samples must be >= 1");
        if (flatness_q_points < 1)
            throw ConfigError("flatness_q_points must be >= 1");
    }
};

/// U_1 of sample i, a pure function of (seed, i). Gaussian draws are
/// truncated at 3 sigma by rejection; uniform has the same standard deviation.
inline double sample_u1(const EnsembleSpec& spec, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    double xi = 0.0;
    if (spec.distribution == SpreadDistribution::gaussian) {
        std::normal_distribution<double> normal;
        do {
            xi = normal(rng);
        } while (std::abs(xi) > 3.0);
    } else {
        std::uniform_real_distribution<double> uni(-std::sqrt(3.0), std::sqrt(3.0));
        xi = uni(rng);
    }
    return spec.base.u1_er * (1.0 + spec.u1_relative_spread * xi);
}

inline std::vector<double> sample_u1_list(const EnsembleSpec& spec)
{
    std::vector<double> u(static_cast<std::size_t>(spec.n_samples));
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = sample_u1(spec, i);
    return u;
}

struct EnsembleSample {
    double u1_er = 0.0;
    double epsilon_hz = 0.0;
    bool skipped = false;
    std::string diagnostic;
};

struct EnsembleResult {
    std::vector<double> t_us;
    std::vector<double> mean_fz;
    std::vector<EnsembleSample> samples;
    int n_used = 0;
};

/// <F_z>(t) of one Rabi run from |L> for the given lattice, plus its splitting.
inline std::pair<std::vector<double>, double> single_rabi_magnetization(const LatticeConfig& cfg,
                                                                        const std::vector<double>& t_us,
                                                                        int flatness_q_points)
{
    LatticeConfig band_cfg = cfg;
    band_cfg.n_q = flatness_q_points;
    BandOptions bo;
    bo.with_spinors = false;
    const auto split = doublet_splitting(solve_bands(band_cfg, 3, bo));

    const StaticPropagator prop(cfg, 2);
    const auto& es = prop.eigensystem();
    const auto doublet = wannier_from_q0(cfg, prop.hamiltonian().basis(), es.vectors.col(0),
                                         es.vectors.col(1), es.values(0), es.values(1), split);
    const auto series = prop.run(doublet, doublet.coeff_l, t_us);
    return {series.fz, split.epsilon_hz};
}

inline EnsembleResult ensemble_magnetization(const EnsembleSpec& spec, const std::vector<double>& t_us,
                                             int jobs = 1)
{
    spec.validate();
    if (t_us.empty())
        throw ConfigError("ensemble time grid is empty");
    const auto n = static_cast<std::size_t>(spec.n_samples);
    EnsembleResult res;
    res.t_us = t_us;
    res.samples.resize(n);
    std::vector<std::vector<double>> fz(n);

    parallel_for(n, jobs, [&](std::size_t i) {
        auto& s = res.samples[i];
        s.u1_er = sample_u1(spec, i);
        LatticeConfig cfg = spec.base;
        cfg.u1_er = s.u1_er;
        try {
            auto [series, eps] = single_rabi_magnetization(cfg, t_us, spec.flatness_q_points);
            fz[i] = std::move(series);
            s.epsilon_hz = eps;
        } catch (const NumericalError& e) {
            s.skipped = true;
            s.diagnostic = e.what();
        }
    });

    std::size_t skipped = 0;
    res.mean_fz.assign(t_us.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (res.samples[i].skipped) {
            ++skipped;
            continue;
        }
        for (std::size_t k = 0; k < t_us.size(); ++k)
            res.mean_fz[k] += fz[i][k];
    }
    if (10 * skipped > n)
        throw NumericalError(std::to_string(skipped) + " of " + std::to_string(n) +
                             " ensemble samples failed (limit 10%); first: " + [&] {
                                 for (const auto& s : res.samples)
                                     if (s.skipped)
                                         return s.diagnostic;
                                 return std::string();
                             }());
    res.n_used = static_cast<int>(n - skipped);
    for (double& v : res.mean_fz)
        v /= res.n_used;
    return res;
}

}  // namespace dwsim
