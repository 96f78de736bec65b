#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dwsim/error.hpp"
#include "dwsim/spin.hpp"
#include "dwsim/units.hpp"

namespace dwsim {

/// Spatial dependence of the fictitious (vector light shift) field.
/// paper_cos: in phase with the scalar lattice, as Eq. (1) is printed.
/// quadrature_sin: shifted by a quarter period, as the sigma+/sigma- decomposition gives.
enum class FictitiousPhase { paper_cos, quadrature_sin };

inline std::string_view to_string(FictitiousPhase p)
{
    return p == FictitiousPhase::paper_cos ? "paper_cos" : "quadrature_sin";
}

inline FictitiousPhase phase_from_string(std::string_view s)
{
    if (s == "paper_cos")
        return FictitiousPhase::paper_cos;
    if (s == "quadrature_sin")
        return FictitiousPhase::quadrature_sin;
    throw ConfigError("fictitious_phase must be paper_cos or quadrature_sin, got '" +
                      std::string(s) + "'");
}

/// One lattice realisation. Energies in E_R, fields in mG, angle in degrees.
struct LatticeConfig {
    double u1_er = 84.0;
    double theta_deg = 80.0;
    double bx_mg = 85.0;
    double bz_mg = 0.0;
    SpeciesConstants species = SpeciesConstants::cesium_f4();
    PhysicalConstants constants{};
    FictitiousPhase phase = FictitiousPhase::quadrature_sin;
    int n_planewaves = 24;
    int n_q = 33;
    int z_points = 512;

    static LatticeConfig canonical() { return {}; }

    void validate() const
    {
        species.validate();
        if (!(u1_er > 0.0) || !std::isfinite(u1_er))
            throw ConfigError("u1_er must be > 0");
        if (!(theta_deg >= 0.0 && theta_deg <= 180.0))
            throw ConfigError("theta_deg out of range [0, 180]");
        if (!std::isfinite(bx_mg) || !std::isfinite(bz_mg))
            throw ConfigError("magnetic field components must be finite");
        if (n_planewaves < 8)
            throw ConfigError("n_planewaves must be >= 8");
        if (z_points < 64)
            throw ConfigError("z_points must be >= 64");
        if (n_q < 1)
            throw ConfigError("n_q must be >= 1");
    }
};

/// Precomputed pieces of U(z): the scalar lattice, the fictitious field and
/// the external Zeeman terms, all in E_R. Cheap to copy, immutable.
class LatticeModel {
public:
    explicit LatticeModel(const LatticeConfig& cfg)
        : cfg_(cfg), units_((cfg.validate(), cfg.species), cfg.constants),
          spin_(make_spin_operators_2f(cfg.species.two_f))
    {
        const double theta = cfg.theta_deg * std::numbers::pi / 180.0;
        scalar_offset_ = 4.0 * cfg.u1_er / 3.0;
        scalar_amplitude_ = scalar_offset_ * std::cos(theta);
        fictitious_amplitude_ = -cfg.species.g_f * (2.0 * cfg.u1_er / 3.0) * std::sin(theta);
        zeeman_x_ = units_.mg_to_er(cfg.bx_mg);
        zeeman_z_ = units_.mg_to_er(cfg.bz_mg);
    }

    const LatticeConfig& config() const { return cfg_; }
    const UnitContext& units() const { return units_; }
    const SpinOperators& spin() const { return spin_; }
    int spin_dimension() const { return spin_.dimension(); }

    /// U_J at x = k_L z.
    double scalar(double x) const { return scalar_offset_ + scalar_amplitude_ * std::cos(2.0 * x); }

    /// Coefficient of F_z from the fictitious field at x = k_L z.
    double fictitious(double x) const
    {
        const double wave =
            cfg_.phase == FictitiousPhase::paper_cos ? std::cos(2.0 * x) : std::sin(2.0 * x);
        return fictitious_amplitude_ * wave;
    }

    double scalar_offset() const { return scalar_offset_; }
    double scalar_amplitude() const { return scalar_amplitude_; }
    double fictitious_amplitude() const { return fictitious_amplitude_; }
    double zeeman_x() const { return zeeman_x_; }
    double zeeman_z() const { return zeeman_z_; }

    /// Full (2F+1)x(2F+1) potential at x = k_L z.
    Eigen::MatrixXcd at_phase(double x) const
    {
        const int d = spin_.dimension();
        Eigen::MatrixXcd u = scalar(x) * Eigen::MatrixXcd::Identity(d, d);
        u += (fictitious(x) + zeeman_z_) * spin_.fz;
        u += zeeman_x_ * spin_.fx;
        return u;
    }

    Eigen::MatrixXcd at(double z_nm) const { return at_phase(units_.nm_to_phase(z_nm)); }

    /// Fourier component of the spin-dependent potential multiplying e^{+2ix}.
    Eigen::MatrixXcd harmonic_plus() const
    {
        const int d = spin_.dimension();
        Eigen::MatrixXcd v = 0.5 * scalar_amplitude_ * Eigen::MatrixXcd::Identity(d, d);
        if (cfg_.phase == FictitiousPhase::paper_cos)
            v += 0.5 * fictitious_amplitude_ * spin_.fz;
        else  // sin(2x) = (e^{2ix} - e^{-2ix}) / 2i
            v += cplx(0.0, -0.5) * fictitious_amplitude_ * spin_.fz;
        return v;
    }

private:
    LatticeConfig cfg_;
    UnitContext units_;
    SpinOperators spin_;
    double scalar_offset_ = 0.0;
    double scalar_amplitude_ = 0.0;
    double fictitious_amplitude_ = 0.0;
    double zeeman_x_ = 0.0;
    double zeeman_z_ = 0.0;
};

/// U(z) in E_R, z in nm.
inline Eigen::MatrixXcd potential_matrix(const LatticeConfig& cfg, double z_nm)
{
    return LatticeModel(cfg).at(z_nm);
}

/// Uniform grid over one lattice period [z0, z0 + lambda/2), in nm.
inline std::vector<double> period_grid(const LatticeConfig& cfg, int points, double z0_nm = 0.0)
{
    const double period = 0.5 * cfg.species.wavelength_m * 1e9;
    std::vector<double> z(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        z[static_cast<std::size_t>(i)] = z0_nm + period * i / points;
    return z;
}

struct PotentialCurves {
    std::vector<double> z_nm;
    /// diabatic[m_index][i] = <m|U(z_i)|m>, m_index 0 <-> m_F = -F
    std::vector<std::vector<double>> diabatic;
    /// adiabatic[k][i], continuity sorted, k = 0 lowest
    std::vector<std::vector<double>> adiabatic;
};

inline std::vector<std::vector<double>> diabatic_curves(const LatticeConfig& cfg,
                                                        const std::vector<double>& z_nm)
{
    const LatticeModel model(cfg);
    const int d = model.spin_dimension();
    std::vector<std::vector<double>> curves(static_cast<std::size_t>(d),
                                            std::vector<double>(z_nm.size()));
    for (std::size_t i = 0; i < z_nm.size(); ++i) {
        const Eigen::MatrixXcd u = model.at(z_nm[i]);
        for (int m = 0; m < d; ++m)
            curves[static_cast<std::size_t>(m)][i] = u(m, m).real();
    }
    return curves;
}

/// Pointwise eigenvalues of U(z), joined into curves by maximum eigenvector
/// overlap between neighbouring grid points. Inside exactly degenerate
/// clusters the eigenvectors are arbitrary, so tracking restarts in energy
/// order there.
inline std::vector<std::vector<double>> adiabatic_curves(const LatticeConfig& cfg,
                                                         const std::vector<double>& z_nm)
{
    const LatticeModel model(cfg);
    const int d = model.spin_dimension();
    const auto npts = z_nm.size();
    std::vector<std::vector<double>> curves(static_cast<std::size_t>(d),
                                            std::vector<double>(npts));
    if (npts == 0)
        return curves;

    auto degenerate = [](const Eigen::VectorXd& e, int k) {
        const double tol = 1e-9 * (1.0 + e.cwiseAbs().maxCoeff());
        return (k > 0 && e(k) - e(k - 1) < tol) || (k + 1 < e.size() && e(k + 1) - e(k) < tol);
    };

    Eigen::MatrixXcd prev_vecs;
    Eigen::VectorXd prev_vals;
    for (std::size_t i = 0; i < npts; ++i) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(model.at(z_nm[i]));
        const Eigen::VectorXd vals = es.eigenvalues();
        const Eigen::MatrixXcd vecs = es.eigenvectors();

        std::vector<int> curve_of_state(static_cast<std::size_t>(d));
        bool reset = i == 0;
        if (!reset) {
            for (int k = 0; k < d; ++k)
                if (degenerate(vals, k) || degenerate(prev_vals, k))
                    reset = true;
        }
        if (reset) {
            for (int k = 0; k < d; ++k)
                curve_of_state[static_cast<std::size_t>(k)] = k;
        } else {
            // prev_vecs columns are already stored in curve order
            const Eigen::MatrixXd overlap = (prev_vecs.adjoint() * vecs).cwiseAbs2();
            std::vector<bool> curve_used(static_cast<std::size_t>(d), false);
            std::vector<bool> state_used(static_cast<std::size_t>(d), false);
            for (int pass = 0; pass < d; ++pass) {
                double best = -1.0;
                int bc = -1;
                int bs = -1;
                for (int c = 0; c < d; ++c) {
                    if (curve_used[static_cast<std::size_t>(c)])
                        continue;
                    for (int s = 0; s < d; ++s) {
                        if (!state_used[static_cast<std::size_t>(s)] && overlap(c, s) > best) {
                            best = overlap(c, s);
                            bc = c;
                            bs = s;
                        }
                    }
                }
                if (best < 0.5)
                    throw NumericalError("adiabatic continuity sort ambiguous between z = " +
                                         std::to_string(z_nm[i - 1]) + " nm and z = " +
                                         std::to_string(z_nm[i]) + " nm; refine the grid");
                curve_used[static_cast<std::size_t>(bc)] = true;
                state_used[static_cast<std::size_t>(bs)] = true;
                curve_of_state[static_cast<std::size_t>(bs)] = bc;
            }
        }

        prev_vecs.resize(d, d);
        prev_vals.resize(d);
        for (int s = 0; s < d; ++s) {
            const int c = curve_of_state[static_cast<std::size_t>(s)];
            curves[static_cast<std::size_t>(c)][i] = vals(s);
            prev_vecs.col(c) = vecs.col(s);
        }
        prev_vals = vals;
    }

    // lowest curve first, by mean value
    std::sort(curves.begin(), curves.end(), [](const auto& a, const auto& b) {
        double sa = 0.0;
        double sb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            sa += a[i];
            sb += b[i];
        }
        return sa < sb;
    });
    return curves;
}

inline PotentialCurves potential_curves(const LatticeConfig& cfg, std::optional<int> points = {})
{
    PotentialCurves pc;
    pc.z_nm = period_grid(cfg, points.value_or(cfg.z_points));
    pc.diabatic = diabatic_curves(cfg, pc.z_nm);
    pc.adiabatic = adiabatic_curves(cfg, pc.z_nm);
    return pc;
}

/// Indices of strict local minima of a periodic sampled curve.
inline std::vector<std::size_t> periodic_local_minima(const std::vector<double>& curve)
{
    std::vector<std::size_t> minima;
    const auto n = curve.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double left = curve[(i + n - 1) % n];
        const double right = curve[(i + 1) % n];
        if (curve[i] < left && curve[i] <= right)
            minima.push_back(i);
    }
    return minima;
}

/// Lowest pointwise eigenvalue of U(z) and the <F_z> of its eigenvector.
inline std::pair<double, double> lowest_adiabatic_point(const LatticeModel& model, double z_nm)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(model.at(z_nm));
    const Eigen::VectorXcd v = es.eigenvectors().col(0);
    const double fz = v.dot(model.spin().fz * v).real();
    return {es.eigenvalues()(0), fz};
}

}  // namespace dwsim
