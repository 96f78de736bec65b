#pragma once

#include <cmath>
#include <numbers>

#include "dwsim/error.hpp"

namespace dwsim {

/// CODATA 2018 values, 12 significant digits.
struct PhysicalConstants {
    double hbar = 1.05457181765e-34;      // J s
    double mu_b = 9.27401007830e-24;      // J/T
    double amu = 1.66053906660e-27;       // kg

    double planck() const { return 2.0 * std::numbers::pi * hbar; }
};

/// One atomic species in one hyperfine manifold, together with the lattice wavelength.
struct SpeciesConstants {
    double mass_kg = 132.905451961 * 1.66053906660e-27;
    double wavelength_m = 852.35e-9;
    double g_f = 0.25;
    int two_f = 8;  // 2F, so half-integer F is representable

    static SpeciesConstants cesium_f4() { return {}; }

    double spin() const { return 0.5 * two_f; }
    int spin_dimension() const { return two_f + 1; }
    double k_l() const { return 2.0 * std::numbers::pi / wavelength_m; }

    double recoil_energy_j(const PhysicalConstants& c = {}) const
    {
        const double k = k_l();
        return c.hbar * c.hbar * k * k / (2.0 * mass_kg);
    }

    void validate() const
    {
        if (!(mass_kg > 0.0) || !std::isfinite(mass_kg))
            throw ConfigError("species mass must be positive");
        if (!(wavelength_m > 0.0) || !std::isfinite(wavelength_m))
            throw ConfigError("lattice wavelength must be positive");
        if (two_f < 1)
            throw ConfigError("total spin F must be >= 1/2");
        if (!std::isfinite(g_f))
            throw ConfigError("g_F must be finite");
    }
};

/// E_R / h in Hz.
inline double recoil_energy(const SpeciesConstants& species,
                            const PhysicalConstants& c = {})
{
    species.validate();
    return species.recoil_energy_j(c) / c.planck();
}

/// Conversions between lab units and the natural units of the lattice problem:
/// energies in E_R, time in hbar/E_R, length in 1/k_L.
class UnitContext {
public:
    explicit UnitContext(const SpeciesConstants& species, const PhysicalConstants& c = {})
        : species_(species), constants_(c)
    {
        species_.validate();
        er_j_ = species_.recoil_energy_j(constants_);
        er_hz_ = er_j_ / constants_.planck();
        natural_time_s_ = constants_.hbar / er_j_;
        // g_F mu_B per milligauss (1 mG = 1e-7 T), in E_R
        zeeman_er_per_mg_ = species_.g_f * constants_.mu_b * 1e-7 / er_j_;
    }

    const SpeciesConstants& species() const { return species_; }
    const PhysicalConstants& constants() const { return constants_; }

    double recoil_hz() const { return er_hz_; }
    double recoil_j() const { return er_j_; }

    double er_to_hz(double e) const { return e * er_hz_; }
    double hz_to_er(double f) const { return f / er_hz_; }
    double er_to_j(double e) const { return e * er_j_; }
    double j_to_er(double e) const { return e / er_j_; }

    /// g_F mu_B B in E_R for B in mG.
    double mg_to_er(double b_mg) const { return b_mg * zeeman_er_per_mg_; }
    double er_to_mg(double e) const { return e / zeeman_er_per_mg_; }

    double us_to_natural(double t_us) const { return t_us * 1e-6 / natural_time_s_; }
    double natural_to_us(double t) const { return t * natural_time_s_ * 1e6; }

    /// Length conversions, z in nm <-> x = k_L z.
    double nm_to_phase(double z_nm) const { return z_nm * 1e-9 * species_.k_l(); }
    double phase_to_nm(double x) const { return x / species_.k_l() * 1e9; }
    double period_nm() const { return 0.5 * species_.wavelength_m * 1e9; }

private:
    SpeciesConstants species_;
    PhysicalConstants constants_;
    double er_j_ = 0.0;
    double er_hz_ = 0.0;
    double natural_time_s_ = 0.0;
    double zeeman_er_per_mg_ = 0.0;
};

/// g_F mu_B B in units of E_R (energy per unit m_F).
inline double zeeman_energy(double b_mg, const SpeciesConstants& species,
                            const PhysicalConstants& c = {})
{
    return UnitContext(species, c).mg_to_er(b_mg);
}

}  // namespace dwsim
