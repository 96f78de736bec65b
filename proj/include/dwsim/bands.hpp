#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dwsim/error.hpp"
#include "dwsim/lattice.hpp"
#include "dwsim/linalg.hpp"
#include "dwsim/parallel.hpp"

namespace dwsim {

/// Plane waves e^{i(q + 2n)k_L z}, n = -N..N, times the 2F+1 spin states.
/// Index = (n + N) * spin_dim + m_index.
struct BlochBasis {
    int n_half = 24;
    int spin_dim = 9;

    int plane_waves() const { return 2 * n_half + 1; }
    int dimension() const { return plane_waves() * spin_dim; }
    int index(int n, int m_index) const { return (n + n_half) * spin_dim + m_index; }
    int wave_number(int idx) const { return idx / spin_dim - n_half; }
    int m_index(int idx) const { return idx % spin_dim; }

    bool operator==(const BlochBasis&) const = default;
};

inline constexpr int kMaxBlochDimension = 10000;

/// Builds Bloch Hamiltonians H(q) for one lattice realisation, q in units of k_L.
class BlochHamiltonian {
public:
    explicit BlochHamiltonian(const LatticeConfig& cfg) : BlochHamiltonian(cfg, cfg.n_planewaves) {}

    BlochHamiltonian(const LatticeConfig& cfg, int n_half)
        : model_(cfg), basis_{n_half, cfg.species.spin_dimension()}
    {
        if (n_half < 0 || basis_.dimension() > kMaxBlochDimension)
            throw ConfigError("Bloch basis dimension " + std::to_string(basis_.dimension()) +
                              " exceeds the limit of " + std::to_string(kMaxBlochDimension));
        const int d = basis_.spin_dim;
        const auto& s = model_.spin();
        onsite_ = model_.scalar_offset() * Eigen::MatrixXcd::Identity(d, d) +
                  model_.zeeman_x() * s.fx + model_.zeeman_z() * s.fz;
        hop_ = model_.harmonic_plus();
    }

    const BlochBasis& basis() const { return basis_; }
    const LatticeModel& model() const { return model_; }
    int dimension() const { return basis_.dimension(); }
    int bandwidth() const { return basis_.spin_dim; }

    Eigen::MatrixXcd dense(double q) const
    {
        const int d = basis_.spin_dim;
        const int dim = basis_.dimension();
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
        for (int n = -basis_.n_half; n <= basis_.n_half; ++n) {
            const int row = basis_.index(n, 0);
            const double k = q + 2.0 * n;
            h.block(row, row, d, d) = onsite_;
            h.block(row, row, d, d).diagonal().array() += k * k;
            if (n < basis_.n_half) {
                // <n+1|V|n> is the e^{+2ix} harmonic
                const int up = basis_.index(n + 1, 0);
                h.block(up, row, d, d) = hop_;
                h.block(row, up, d, d) = hop_.adjoint();
            }
        }
        return h;
    }

    Eigen::SparseMatrix<cplx> sparse(double q) const
    {
        const Eigen::MatrixXcd h = dense(q);
        return h.sparseView(0.0, 0.0);
    }

    Eigen::MatrixXcd lower_band(double q) const { return to_lower_band(dense(q), bandwidth()); }

    /// d H / d(bx, bz) pieces: the external Zeeman operators on the full basis, in E_R per mG.
    Eigen::SparseMatrix<cplx> spin_operator(const Eigen::MatrixXcd& op) const
    {
        const int d = basis_.spin_dim;
        std::vector<Eigen::Triplet<cplx>> trips;
        for (int n = -basis_.n_half; n <= basis_.n_half; ++n) {
            const int row = basis_.index(n, 0);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    if (op(i, j) != cplx(0.0))
                        trips.emplace_back(row + i, row + j, op(i, j));
        }
        Eigen::SparseMatrix<cplx> m(basis_.dimension(), basis_.dimension());
        m.setFromTriplets(trips.begin(), trips.end());
        return m;
    }

private:
    LatticeModel model_;
    BlochBasis basis_;
    Eigen::MatrixXcd onsite_;
    Eigen::MatrixXcd hop_;
};

/// Dense Bloch Hamiltonian, E_R units, q in units of k_L.
inline Eigen::MatrixXcd assemble_bloch_hamiltonian(const LatticeConfig& cfg, double q)
{
    if (std::abs(q) > 1.0 + 1e-12)
        throw ConfigError("quasimomentum must satisfy |q| <= k_L");
    return BlochHamiltonian(cfg).dense(q);
}

struct BandSolution {
    BlochBasis basis;
    std::vector<double> q_grid;                   // units of k_L, spans [-1, 1)
    Eigen::MatrixXd energies;                     // (n_q, n_bands), ascending per row, E_R
    std::vector<Eigen::MatrixXcd> spinors;        // per q: (D, n_bands); empty when not requested
    std::vector<double> flatness;                 // per band: width / mean doublet gap
    double certification_drift = 0.0;             // max relative change at N + 8
    double recoil_hz = 0.0;

    int n_bands() const { return static_cast<int>(energies.cols()); }
};

struct BandOptions {
    int jobs = 1;
    bool with_spinors = true;
    bool certify = true;
    int certify_extra_waves = 8;
    double certify_tolerance = 1e-3;
};

inline std::vector<double> quasimomentum_grid(int n_q)
{
    std::vector<double> q(static_cast<std::size_t>(n_q));
    for (int i = 0; i < n_q; ++i)
        q[static_cast<std::size_t>(i)] = -1.0 + 2.0 * i / n_q;
    return q;
}

/// Lowest `count` eigenvalues at quasimomentum q using the banded solver.
inline Eigen::VectorXd bloch_spectrum(const BlochHamiltonian& h, double q, int count)
{
    return banded_eigenvalues(h.lower_band(q), h.bandwidth()).head(count);
}

inline Eigen::VectorXd bloch_spectrum(const LatticeConfig& cfg, double q, int count)
{
    return bloch_spectrum(BlochHamiltonian(cfg), q, count);
}

inline std::vector<double> band_flatness(const Eigen::MatrixXd& energies)
{
    const auto nb = energies.cols();
    std::vector<double> flat(static_cast<std::size_t>(nb), std::numeric_limits<double>::quiet_NaN());
    if (nb < 2)
        return flat;
    const double gap = (energies.col(1) - energies.col(0)).mean();
    for (Eigen::Index b = 0; b < nb; ++b) {
        const double width = energies.col(b).maxCoeff() - energies.col(b).minCoeff();
        flat[static_cast<std::size_t>(b)] =
            gap > 1e-12 ? width / gap : std::numeric_limits<double>::infinity();
    }
    return flat;
}

inline BandSolution solve_bands(const LatticeConfig& cfg, int n_bands, const BandOptions& opt = {})
{
    const BlochHamiltonian ham(cfg);
    if (n_bands < 1 || n_bands > ham.dimension())
        throw ConfigError("n_bands must lie in [1, " + std::to_string(ham.dimension()) + "]");

    BandSolution sol;
    sol.basis = ham.basis();
    sol.q_grid = quasimomentum_grid(cfg.n_q);
    sol.recoil_hz = ham.model().units().recoil_hz();
    const auto nq = sol.q_grid.size();
    sol.energies.resize(static_cast<Eigen::Index>(nq), n_bands);
    if (opt.with_spinors)
        sol.spinors.resize(nq);
    std::vector<double> drift(nq, 0.0);

    std::optional<BlochHamiltonian> bigger;
    if (opt.certify)
        bigger.emplace(cfg, cfg.n_planewaves + opt.certify_extra_waves);

    parallel_for(nq, opt.jobs, [&](std::size_t i) {
        const double q = sol.q_grid[i];
        Eigen::VectorXd e;
        if (opt.with_spinors) {
            Eigensystem es = hermitian_lowest(ham.dense(q), n_bands);
            e = es.values;
            sol.spinors[i] = std::move(es.vectors);
        } else {
            e = bloch_spectrum(ham, q, n_bands);
        }
        sol.energies.row(static_cast<Eigen::Index>(i)) = e.transpose();

        if (bigger) {
            const Eigen::VectorXd ref = bloch_spectrum(*bigger, q, n_bands);
            double worst = 0.0;
            for (int b = 0; b < n_bands; ++b) {
                const double rel = std::abs(ref(b) - e(b)) / std::max(1.0, std::abs(e(b)));
                if (rel > opt.certify_tolerance)
                    throw NumericalError(
                        "band " + std::to_string(b + 1) + " not converged at q = " +
                        std::to_string(q) + ": E(N=" + std::to_string(cfg.n_planewaves) +
                        ") = " + std::to_string(e(b)) + ", E(N=" +
                        std::to_string(cfg.n_planewaves + opt.certify_extra_waves) +
                        ") = " + std::to_string(ref(b)));
                worst = std::max(worst, rel);
            }
            drift[i] = worst;
        }
    });

    sol.certification_drift = *std::max_element(drift.begin(), drift.end());
    sol.flatness = band_flatness(sol.energies);
    return sol;
}

struct DoubletSplitting {
    double epsilon_er = 0.0;
    double epsilon_hz = 0.0;
    double flatness_lower = 0.0;
    double flatness_upper = 0.0;
    /// flatness above 0.2: the two-level reduction is questionable
    bool dubious = false;
};

inline constexpr double kFlatnessLimit = 0.2;

inline DoubletSplitting doublet_splitting(const BandSolution& sol)
{
    if (sol.n_bands() < 2)
        throw ConfigError("doublet splitting needs at least two solved bands");
    DoubletSplitting d;
    d.epsilon_er = (sol.energies.col(1) - sol.energies.col(0)).mean();
    d.epsilon_hz = d.epsilon_er * sol.recoil_hz;
    d.flatness_lower = sol.flatness[0];
    d.flatness_upper = sol.flatness[1];
    d.dubious = !(d.flatness_lower <= kFlatnessLimit && d.flatness_upper <= kFlatnessLimit);
    return d;
}

/// Spinor wavefunction psi_m(z) on a uniform grid over one period,
/// normalised as sum_m int |psi_m|^2 dz = 1 (z in nm).
struct SpinorWavefunction {
    std::vector<double> z_nm;
    double dz_nm = 0.0;
    int two_f = 8;
    Eigen::MatrixXcd amplitude;  // (z points, 2F+1)

    double m_value(int m_index) const { return m_index - 0.5 * two_f; }
};

struct LocalizedObservables {
    std::vector<double> density;      // per z, nm^-1
    std::vector<double> populations;  // per m_F, ascending m
    double fz_mean = 0.0;
    double centroid_nm = 0.0;
};

inline double wavefunction_norm(const SpinorWavefunction& psi)
{
    return psi.amplitude.cwiseAbs2().sum() * psi.dz_nm;
}

inline LocalizedObservables localized_observables(const SpinorWavefunction& psi)
{
    const double norm = wavefunction_norm(psi);
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-6)
        throw ConfigError("localized_observables expects a normalised state, norm^2 = " +
                          std::to_string(norm));
    LocalizedObservables obs;
    const Eigen::MatrixXd prob = psi.amplitude.cwiseAbs2();
    const Eigen::VectorXd rho = prob.rowwise().sum();
    obs.density.assign(rho.data(), rho.data() + rho.size());
    for (Eigen::Index m = 0; m < prob.cols(); ++m) {
        const double p = prob.col(m).sum() * psi.dz_nm;
        obs.populations.push_back(p);
        obs.fz_mean += psi.m_value(static_cast<int>(m)) * p;
    }
    for (std::size_t i = 0; i < psi.z_nm.size(); ++i)
        obs.centroid_nm += psi.z_nm[i] * obs.density[i] * psi.dz_nm;
    return obs;
}

/// Magnetic populations straight from Bloch coefficients (Parseval).
inline std::vector<double> magnetic_populations(const BlochBasis& basis, const Eigen::VectorXcd& c)
{
    std::vector<double> p(static_cast<std::size_t>(basis.spin_dim), 0.0);
    for (int i = 0; i < basis.dimension(); ++i)
        p[static_cast<std::size_t>(basis.m_index(i))] += std::norm(c(i));
    return p;
}

/// psi_m(z) = sum_n c_{n,m} e^{i(q + 2n)k_L z} / sqrt(period) on the given grid.
inline SpinorWavefunction to_spatial(const BlochBasis& basis, const Eigen::VectorXcd& c,
                                     const UnitContext& units, const std::vector<double>& z_nm,
                                     double q = 0.0)
{
    SpinorWavefunction psi;
    psi.z_nm = z_nm;
    psi.two_f = basis.spin_dim - 1;
    psi.dz_nm = z_nm.size() > 1 ? z_nm[1] - z_nm[0] : units.period_nm();
    psi.amplitude = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(z_nm.size()), basis.spin_dim);
    const double scale = 1.0 / std::sqrt(units.period_nm());
    for (std::size_t i = 0; i < z_nm.size(); ++i) {
        const double x = units.nm_to_phase(z_nm[i]);
        for (int n = -basis.n_half; n <= basis.n_half; ++n) {
            const cplx wave = std::polar(scale, (q + 2.0 * n) * x);
            for (int m = 0; m < basis.spin_dim; ++m)
                psi.amplitude(static_cast<Eigen::Index>(i), m) += c(basis.index(n, m)) * wave;
        }
    }
    return psi;
}

struct WannierDoublet {
    LatticeConfig cfg;
    BlochBasis basis;
    // q = 0 Bloch coefficients
    Eigen::VectorXcd coeff_s;
    Eigen::VectorXcd coeff_a;
    Eigen::VectorXcd coeff_l;
    Eigen::VectorXcd coeff_r;
    SpinorWavefunction psi_s;
    SpinorWavefunction psi_a;
    SpinorWavefunction psi_l;
    SpinorWavefunction psi_r;
    double energy_s = 0.0;  // q = 0 eigenvalues, E_R
    double energy_a = 0.0;
    double epsilon_er = 0.0;  // zone-averaged splitting
    double epsilon_hz = 0.0;
    double flatness = 0.0;    // max over the two doublet bands
    double cell_start_nm = 0.0;
    double well_center_nm = 0.0;  // sigma+ well
    double midpoint_nm = 0.0;
    double centroid_l_nm = 0.0;
    double centroid_r_nm = 0.0;
    double overlap = 0.0;  // int sqrt(rho_L rho_R) dz
    std::vector<std::string> notes;

    double separation_nm() const { return std::abs(centroid_r_nm - centroid_l_nm); }
};

/// Geometry of the lowest adiabatic potential over one period.
struct DoubleWellGeometry {
    double cell_start_nm = 0.0;             // global maximum of the lowest curve
    std::vector<double> minima_nm;          // inside [cell_start, cell_start + period)
    std::vector<double> minima_fz;
    double sigma_plus_center_nm = 0.0;
    double midpoint_nm = 0.0;
};

inline DoubleWellGeometry double_well_geometry(const LatticeConfig& cfg, int points)
{
    const LatticeModel model(cfg);
    const double period = model.units().period_nm();
    const auto z = period_grid(cfg, points);
    std::vector<double> lowest(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        lowest[i] = lowest_adiabatic_point(model, z[i]).first;

    DoubleWellGeometry g;
    const auto top = std::max_element(lowest.begin(), lowest.end()) - lowest.begin();
    g.cell_start_nm = z[static_cast<std::size_t>(top)];
    for (auto i : periodic_local_minima(lowest)) {
        double zm = z[i];
        if (zm < g.cell_start_nm)
            zm += period;
        g.minima_nm.push_back(zm);
        g.minima_fz.push_back(lowest_adiabatic_point(model, zm).second);
    }
    // order minima left to right
    std::vector<std::size_t> order(g.minima_nm.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return g.minima_nm[a] < g.minima_nm[b]; });
    std::vector<double> mz;
    std::vector<double> mf;
    for (auto k : order) {
        mz.push_back(g.minima_nm[k]);
        mf.push_back(g.minima_fz[k]);
    }
    g.minima_nm = mz;
    g.minima_fz = mf;

    g.midpoint_nm = g.minima_nm.size() == 2 ? 0.5 * (g.minima_nm[0] + g.minima_nm[1])
                                            : g.cell_start_nm + 0.5 * period;
    g.sigma_plus_center_nm = g.midpoint_nm;
    if (!g.minima_nm.empty()) {
        const auto best = std::max_element(g.minima_fz.begin(), g.minima_fz.end()) -
                          g.minima_fz.begin();
        g.sigma_plus_center_nm = g.minima_nm[static_cast<std::size_t>(best)];
    }
    return g;
}

namespace detail {

/// Rotate a state so its largest component at grid row `row` is real positive.
/// Falls back to the globally largest component when that one is tiny.
inline cplx fixing_phase(const SpinorWavefunction& psi, Eigen::Index row,
                         std::vector<std::string>& notes, const char* label)
{
    Eigen::Index col = 0;
    const double local = psi.amplitude.row(row).cwiseAbs().maxCoeff(&col);
    cplx ref = psi.amplitude(row, col);
    const double global = psi.amplitude.cwiseAbs().maxCoeff();
    if (local < 1e-6 * global) {
        Eigen::Index r = 0;
        Eigen::Index c = 0;
        psi.amplitude.cwiseAbs().maxCoeff(&r, &c);
        ref = psi.amplitude(r, c);
        notes.push_back(std::string(label) +
                        ": phase reference at the sigma+ well is degenerate, used global maximum");
    }
    return std::conj(ref) / std::abs(ref);
}

inline double centroid(const SpinorWavefunction& psi)
{
    const Eigen::VectorXd rho = psi.amplitude.cwiseAbs2().rowwise().sum();
    double c = 0.0;
    for (std::size_t i = 0; i < psi.z_nm.size(); ++i)
        c += psi.z_nm[i] * rho(static_cast<Eigen::Index>(i));
    return c * psi.dz_nm;
}

}  // namespace detail

/// Builds |S>, |A>, |L>, |R> from given q = 0 doublet eigenvectors.
inline WannierDoublet wannier_from_q0(const LatticeConfig& cfg, const BlochBasis& basis,
                                      const Eigen::VectorXcd& lower, const Eigen::VectorXcd& upper,
                                      double e_lower, double e_upper, const DoubletSplitting& split)
{
    if (split.dubious)
        throw NumericalError("ground doublet bands are not flat (flatness " +
                             std::to_string(std::max(split.flatness_lower, split.flatness_upper)) +
                             " > 0.2); Wannier reduction invalid");

    WannierDoublet w;
    w.cfg = cfg;
    w.basis = basis;
    w.energy_s = e_lower;
    w.energy_a = e_upper;
    w.epsilon_er = split.epsilon_er;
    w.epsilon_hz = split.epsilon_hz;
    w.flatness = std::max(split.flatness_lower, split.flatness_upper);

    const UnitContext units(cfg.species, cfg.constants);
    const auto geo = double_well_geometry(cfg, cfg.z_points);
    w.cell_start_nm = geo.cell_start_nm;
    w.midpoint_nm = geo.midpoint_nm;
    w.well_center_nm = geo.sigma_plus_center_nm;
    const auto grid = period_grid(cfg, cfg.z_points, geo.cell_start_nm);

    auto nearest_row = [&](double z) {
        const double dz = grid[1] - grid[0];
        auto r = static_cast<Eigen::Index>(std::llround((z - grid[0]) / dz));
        return std::clamp<Eigen::Index>(r, 0, static_cast<Eigen::Index>(grid.size()) - 1);
    };
    const Eigen::Index center = nearest_row(geo.sigma_plus_center_nm);

    w.coeff_s = lower;
    w.coeff_a = upper;
    w.psi_s = to_spatial(basis, w.coeff_s, units, grid);
    w.psi_a = to_spatial(basis, w.coeff_a, units, grid);
    const cplx ps = detail::fixing_phase(w.psi_s, center, w.notes, "S");
    const cplx pa = detail::fixing_phase(w.psi_a, center, w.notes, "A");
    w.coeff_s *= ps;
    w.psi_s.amplitude *= ps;
    w.coeff_a *= pa;
    w.psi_a.amplitude *= pa;

    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    auto combine = [&](double sign) {
        SpinorWavefunction out = w.psi_s;
        out.amplitude = inv_sqrt2 * (w.psi_s.amplitude + sign * w.psi_a.amplitude);
        return out;
    };
    if (detail::centroid(combine(1.0)) > w.midpoint_nm) {
        w.coeff_a = -w.coeff_a;
        w.psi_a.amplitude = -w.psi_a.amplitude;
    }
    w.coeff_l = inv_sqrt2 * (w.coeff_s + w.coeff_a);
    w.coeff_r = inv_sqrt2 * (w.coeff_s - w.coeff_a);
    w.psi_l = combine(1.0);
    w.psi_r = combine(-1.0);

    w.centroid_l_nm = detail::centroid(w.psi_l);
    w.centroid_r_nm = detail::centroid(w.psi_r);
    const Eigen::VectorXd rl = w.psi_l.amplitude.cwiseAbs2().rowwise().sum();
    const Eigen::VectorXd rr = w.psi_r.amplitude.cwiseAbs2().rowwise().sum();
    w.overlap = (rl.array() * rr.array()).sqrt().sum() * w.psi_l.dz_nm;
    return w;
}

struct WannierOptions {
    int jobs = 1;
    /// quasimomentum samples for the flatness guard; 0 means cfg.n_q
    int flatness_q_points = 0;
};

inline WannierDoublet wannier_doublet(const LatticeConfig& cfg, const WannierOptions& opt = {})
{
    LatticeConfig band_cfg = cfg;
    if (opt.flatness_q_points > 0)
        band_cfg.n_q = opt.flatness_q_points;
    BandOptions bo;
    bo.jobs = opt.jobs;
    bo.with_spinors = false;
    const auto sol = solve_bands(band_cfg, 3, bo);
    const auto split = doublet_splitting(sol);

    const BlochHamiltonian ham(cfg);
    const auto es = hermitian_lowest(ham.dense(0.0), 2);
    return wannier_from_q0(cfg, ham.basis(), es.vectors.col(0), es.vectors.col(1), es.values(0),
                           es.values(1), split);
}

struct TwoLevelModel {
    double epsilon_hz = 0.0;  // splitting at Bz = 0
    double delta_hz = 0.0;    // asymmetry, signed like Bz
    double omega_hz = 0.0;    // generalised splitting nu = sqrt(eps^2 + delta^2)
    std::vector<std::string> warnings;

    /// Rabi period T = 1 / nu, in microseconds.
    double period_us() const { return 1e6 / omega_hz; }
};

inline TwoLevelModel two_level_model(const LatticeConfig& cfg, const BandOptions& opt = {})
{
    BandOptions bo = opt;
    bo.with_spinors = false;
    LatticeConfig sym = cfg;
    sym.bz_mg = 0.0;
    TwoLevelModel t;
    const auto base = doublet_splitting(solve_bands(sym, 2, bo));
    t.epsilon_hz = base.epsilon_hz;
    if (cfg.bz_mg == 0.0) {
        t.omega_hz = t.epsilon_hz;
        return t;
    }
    const auto tilted = doublet_splitting(solve_bands(cfg, 2, bo));
    t.omega_hz = tilted.epsilon_hz;
    const double excess = t.omega_hz * t.omega_hz - t.epsilon_hz * t.epsilon_hz;
    if (excess < 0.0) {
        t.warnings.push_back("nu(Bz) < epsilon; delta clamped to 0");
        t.delta_hz = 0.0;
    } else {
        t.delta_hz = std::copysign(std::sqrt(excess), cfg.bz_mg);
    }
    return t;
}

}  // namespace dwsim
