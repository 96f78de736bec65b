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

#include "dwsim/bands.hpp"
#include "dwsim/error.hpp"
#include "dwsim/linalg.hpp"

namespace dwsim {

/// Time-indexed observables of a propagated q = 0 spinor state.
struct TimeSeries {
    int two_f = 8;
    std::vector<double> t_us;
    std::vector<double> p_l;
    std::vector<double> p_r;
    std::vector<double> leakage;  // 1 - P_L - P_R
    std::vector<double> fz;
    std::vector<double> norm;
    std::vector<double> energy;  // <H>, E_R
    std::vector<std::vector<double>> p_m;  // [m_index][sample]

    std::size_t size() const { return t_us.size(); }
};

/// Projections and moments of one state, accumulated into a TimeSeries.
class ObservableRecorder {
public:
    ObservableRecorder(const WannierDoublet& doublet, TimeSeries& out)
        : doublet_(doublet), out_(out)
    {
        out_.two_f = doublet.basis.spin_dim - 1;
        out_.p_m.assign(static_cast<std::size_t>(doublet.basis.spin_dim), {});
    }

    void record(double t_us, const Eigen::VectorXcd& psi, double energy)
    {
        const auto& basis = doublet_.basis;
        const double pl = std::norm(doublet_.coeff_l.dot(psi));
        const double pr = std::norm(doublet_.coeff_r.dot(psi));
        const auto pm = magnetic_populations(basis, psi);
        double fz = 0.0;
        for (int m = 0; m < basis.spin_dim; ++m) {
            fz += (m - 0.5 * (basis.spin_dim - 1)) * pm[static_cast<std::size_t>(m)];
            out_.p_m[static_cast<std::size_t>(m)].push_back(pm[static_cast<std::size_t>(m)]);
        }
        out_.t_us.push_back(t_us);
        out_.p_l.push_back(pl);
        out_.p_r.push_back(pr);
        out_.leakage.push_back(1.0 - pl - pr);
        out_.fz.push_back(fz);
        out_.norm.push_back(psi.norm());
        out_.energy.push_back(energy);
    }

private:
    const WannierDoublet& doublet_;
    TimeSeries& out_;
};

inline void check_basis(const WannierDoublet& doublet, const Eigen::VectorXcd& psi)
{
    if (psi.size() != doublet.basis.dimension())
        throw ConfigError("state has dimension " + std::to_string(psi.size()) +
                          " but the q = 0 Bloch basis has " +
                          std::to_string(doublet.basis.dimension()));
}

/// Project a spatial spinor wavefunction onto the q = 0 plane-wave basis.
inline Eigen::VectorXcd from_spatial(const BlochBasis& basis, const SpinorWavefunction& psi,
                                     const UnitContext& units)
{
    if (psi.amplitude.cols() != basis.spin_dim)
        throw ConfigError("spinor wavefunction has the wrong spin dimension");
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(basis.dimension());
    const double scale = psi.dz_nm / std::sqrt(units.period_nm());
    for (std::size_t i = 0; i < psi.z_nm.size(); ++i) {
        const double x = units.nm_to_phase(psi.z_nm[i]);
        for (int n = -basis.n_half; n <= basis.n_half; ++n) {
            const cplx wave = std::polar(scale, -2.0 * n * x);
            for (int m = 0; m < basis.spin_dim; ++m)
                c(basis.index(n, m)) += psi.amplitude(static_cast<Eigen::Index>(i), m) * wave;
        }
    }
    const double lost = wavefunction_norm(psi) - c.squaredNorm();
    if (std::abs(lost) > 1e-6)
        throw ConfigError("spatial state is not representable in the Bloch basis (norm lost " +
                          std::to_string(lost) + ")");
    return c;
}

/// exp(-iHt) for the static q = 0 Bloch Hamiltonian via its eigendecomposition.
/// With levels > 0 only the lowest `levels` eigenpairs are kept, and initial
/// states must lie inside their span.
class StaticPropagator {
public:
    explicit StaticPropagator(const LatticeConfig& cfg, int levels = 0)
        : ham_(cfg),
          es_(levels > 0 ? hermitian_lowest(ham_.dense(0.0), levels)
                         : hermitian_eigensystem(ham_.dense(0.0))),
          h_(ham_.sparse(0.0))
    {
    }

    const BlochHamiltonian& hamiltonian() const { return ham_; }
    const Eigensystem& eigensystem() const { return es_; }

    /// Components of psi0 in the eigenbasis with |c_k| above this are kept;
    /// the discarded weight is below D * 1e-30.
    static constexpr double kRetain = 1e-15;

    TimeSeries run(const WannierDoublet& doublet, const Eigen::VectorXcd& psi0,
                   const std::vector<double>& t_us) const
    {
        check_basis(doublet, psi0);
        if (!(doublet.basis == ham_.basis()))
            throw ConfigError("doublet and propagator use different Bloch bases");
        const auto& units = ham_.model().units();
        const Eigen::VectorXcd c = project(psi0);

        std::vector<Eigen::Index> keep;
        for (Eigen::Index k = 0; k < c.size(); ++k)
            if (std::abs(c(k)) > kRetain)
                keep.push_back(k);
        const auto nk = static_cast<Eigen::Index>(keep.size());
        Eigen::MatrixXcd vk(es_.vectors.rows(), nk);
        Eigen::VectorXcd ck(nk);
        Eigen::VectorXd ek(nk);
        for (Eigen::Index j = 0; j < nk; ++j) {
            vk.col(j) = es_.vectors.col(keep[static_cast<std::size_t>(j)]);
            ck(j) = c(keep[static_cast<std::size_t>(j)]);
            ek(j) = es_.values(keep[static_cast<std::size_t>(j)]);
        }

        TimeSeries series;
        ObservableRecorder rec(doublet, series);
        Eigen::VectorXcd phased(nk);
        for (double t : t_us) {
            const double tn = units.us_to_natural(t);
            for (Eigen::Index j = 0; j < nk; ++j)
                phased(j) = std::polar(1.0, -ek(j) * tn) * ck(j);
            const Eigen::VectorXcd psi = vk * phased;
            const Eigen::VectorXcd hpsi = h_ * psi;
            rec.record(t, psi, psi.dot(hpsi).real());
        }
        return series;
    }

    Eigen::VectorXcd evolve(const Eigen::VectorXcd& psi0, double t_us) const
    {
        const double tn = ham_.model().units().us_to_natural(t_us);
        Eigen::VectorXcd c = project(psi0);
        for (Eigen::Index k = 0; k < c.size(); ++k)
            c(k) *= std::polar(1.0, -es_.values(k) * tn);
        return es_.vectors * c;
    }

private:
    Eigen::VectorXcd project(const Eigen::VectorXcd& psi0) const
    {
        if (psi0.size() != es_.vectors.rows())
            throw ConfigError("state dimension does not match the Bloch basis");
        Eigen::VectorXcd c = es_.vectors.adjoint() * psi0;
        const double outside = psi0.squaredNorm() - c.squaredNorm();
        if (outside > 1e-12)
            throw NumericalError("initial state has weight " + std::to_string(outside) +
                                 " outside the retained eigenvectors");
        return c;
    }

    BlochHamiltonian ham_;
    Eigensystem es_;
    Eigen::SparseMatrix<cplx> h_;
};

inline TimeSeries propagate_static(const LatticeConfig& cfg, const WannierDoublet& doublet,
                                   const Eigen::VectorXcd& psi0, const std::vector<double>& t_us)
{
    return StaticPropagator(cfg).run(doublet, psi0, t_us);
}

struct RabiRun {
    WannierDoublet doublet;  // built at Bz = 0
    TimeSeries series;
};

/// Rabi oscillation from |L> of the symmetric (Bz = 0) double well, evolved
/// under the full Hamiltonian of cfg including its Bz.
inline RabiRun rabi_from_left(const LatticeConfig& cfg, const std::vector<double>& t_us,
                              const WannierOptions& opt = {})
{
    LatticeConfig sym = cfg;
    sym.bz_mg = 0.0;
    RabiRun run{wannier_doublet(sym, opt), {}};
    run.series = StaticPropagator(cfg).run(run.doublet, run.doublet.coeff_l, t_us);
    return run;
}

inline std::vector<double> time_grid(double t_max_us, double dt_us)
{
    if (!(dt_us > 0.0) || !(t_max_us >= 0.0))
        throw ConfigError("time grid needs dt > 0 and t_max >= 0");
    const auto n = static_cast<std::size_t>(std::floor(t_max_us / dt_us + 1e-9));
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        t[i] = dt_us * static_cast<double>(i);
    return t;
}

/// Linear field ramp; everything else in the LatticeConfig stays fixed.
struct RampSegment {
    double duration_us = 0.0;
    double bx_start_mg = 0.0;
    double bx_end_mg = 0.0;
    double bz_start_mg = 0.0;
    double bz_end_mg = 0.0;

    double bx_at(double s) const { return bx_start_mg + s * (bx_end_mg - bx_start_mg); }
    double bz_at(double s) const { return bz_start_mg + s * (bz_end_mg - bz_start_mg); }
};

struct RampSchedule {
    std::vector<RampSegment> segments;

    double total_us() const
    {
        double t = 0.0;
        for (const auto& s : segments)
            t += s.duration_us;
        return t;
    }

    void validate() const
    {
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const auto& s = segments[i];
            if (!(s.duration_us > 0.0))
                throw ConfigError("ramp segment " + std::to_string(i) + " has non-positive duration");
            if (i > 0) {
                const auto& p = segments[i - 1];
                if (std::abs(p.bx_end_mg - s.bx_start_mg) > 1e-9 ||
                    std::abs(p.bz_end_mg - s.bz_start_mg) > 1e-9)
                    throw ConfigError("ramp fields are discontinuous at segment " +
                                      std::to_string(i));
            }
        }
    }

    /// Bx: 0 -> target with Bz held, then Bz: hold -> target with Bx fixed.
    static RampSchedule two_stage(double bx_target_mg, double bz_target_mg, double bz_hold_mg,
                                  double bx_ramp_us = 250.0, double bz_ramp_us = 70.0)
    {
        RampSchedule r;
        r.segments.push_back({bx_ramp_us, 0.0, bx_target_mg, bz_hold_mg, bz_hold_mg});
        r.segments.push_back({bz_ramp_us, bx_target_mg, bx_target_mg, bz_hold_mg, bz_target_mg});
        return r;
    }
};

/// H(bx, bz) = H0 + bx * Zx + bz * Zz on the q = 0 basis, fields in mG.
class FieldDependentHamiltonian {
public:
    explicit FieldDependentHamiltonian(const LatticeConfig& cfg)
        : ham_(without_fields(cfg)), h0_(ham_.sparse(0.0))
    {
        const auto& model = ham_.model();
        const double per_mg = model.units().mg_to_er(1.0);
        zx_ = per_mg * ham_.spin_operator(model.spin().fx);
        zz_ = per_mg * ham_.spin_operator(model.spin().fz);
    }

    const BlochHamiltonian& base() const { return ham_; }
    const UnitContext& units() const { return ham_.model().units(); }
    const Eigen::SparseMatrix<cplx>& zeeman_x() const { return zx_; }
    const Eigen::SparseMatrix<cplx>& zeeman_z() const { return zz_; }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& v, double bx, double bz) const
    {
        Eigen::VectorXcd out = h0_ * v;
        out += bx * (zx_ * v);
        out += bz * (zz_ * v);
        return out;
    }

    Eigen::MatrixXcd dense(double bx, double bz) const
    {
        return Eigen::MatrixXcd(h0_) + bx * Eigen::MatrixXcd(zx_) + bz * Eigen::MatrixXcd(zz_);
    }

private:
    static LatticeConfig without_fields(LatticeConfig cfg)
    {
        cfg.bx_mg = 0.0;
        cfg.bz_mg = 0.0;
        return cfg;
    }

    BlochHamiltonian ham_;
    Eigen::SparseMatrix<cplx> h0_;
    Eigen::SparseMatrix<cplx> zx_;
    Eigen::SparseMatrix<cplx> zz_;
};

struct RampOptions {
    double dt_us = 0.5;
    bool certify = true;
    double certify_infidelity = 1e-6;
    int max_halvings = 6;
    /// spacing of recorded samples; <= 0 records every step
    double sample_us = 1.0;
};

struct RampResult {
    TimeSeries series;
    Eigen::VectorXcd final_state;
    double dt_us = 0.0;                  // step actually used
    double certification_infidelity = 0.0;
    std::vector<std::string> notes;
};

namespace detail {

inline RampResult run_ramp(const FieldDependentHamiltonian& h, const RampSchedule& schedule,
                           const Eigen::VectorXcd& psi0, const WannierDoublet& doublet, double dt,
                           double sample_us)
{
    RampResult res;
    res.dt_us = dt;
    ObservableRecorder rec(doublet, res.series);
    Eigen::VectorXcd psi = psi0;
    const auto& units = h.units();
    auto energy = [&](double bx, double bz) { return psi.dot(h.apply(psi, bx, bz)).real(); };

    double t = 0.0;
    double next_sample = 0.0;
    const double bx0 = schedule.segments.empty() ? 0.0 : schedule.segments.front().bx_start_mg;
    const double bz0 = schedule.segments.empty() ? 0.0 : schedule.segments.front().bz_start_mg;
    rec.record(t, psi, energy(bx0, bz0));
    next_sample += sample_us;

    for (std::size_t si = 0; si < schedule.segments.size(); ++si) {
        const auto& seg = schedule.segments[si];
        const auto steps = std::max<long>(1, static_cast<long>(std::ceil(seg.duration_us / dt - 1e-9)));
        const double h_us = seg.duration_us / static_cast<double>(steps);
        const double tau = units.us_to_natural(h_us);
        for (long k = 0; k < steps; ++k) {
            const double s = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
            const double bx = seg.bx_at(s);
            const double bz = seg.bz_at(s);
            psi = krylov_expm([&](const Eigen::VectorXcd& v) { return h.apply(v, bx, bz); }, psi,
                              tau);
            t += h_us;
            const bool last = si + 1 == schedule.segments.size() && k + 1 == steps;
            if (sample_us <= 0.0 || t + 1e-9 >= next_sample || last) {
                const double se = static_cast<double>(k + 1) / static_cast<double>(steps);
                rec.record(t, psi, energy(seg.bx_at(se), seg.bz_at(se)));
                while (next_sample <= t + 1e-9)
                    next_sample += sample_us > 0.0 ? sample_us : h_us;
            }
        }
    }
    res.final_state = psi;
    return res;
}

}  // namespace detail

/// Piecewise-frozen propagation: each step applies exp(-i H(t_mid) dt) to the
/// state. Certified by step doubling; dt is halved until the final states of
/// dt and dt/2 agree to the requested infidelity.
inline RampResult propagate_ramp(const LatticeConfig& cfg, const RampSchedule& schedule,
                                 const Eigen::VectorXcd& psi0, const WannierDoublet& doublet,
                                 const RampOptions& opt = {})
{
    schedule.validate();
    check_basis(doublet, psi0);
    if (!(opt.dt_us > 0.0))
        throw ConfigError("ramp dt must be positive");
    const FieldDependentHamiltonian h(cfg);
    if (!(doublet.basis == h.base().basis()))
        throw ConfigError("doublet and ramp use different Bloch bases");

    if (schedule.segments.empty()) {
        RampResult res = detail::run_ramp(h, schedule, psi0, doublet, opt.dt_us, opt.sample_us);
        return res;
    }

    // dt must resolve the energy spread actually carried by psi0
    double dt = opt.dt_us;
    std::vector<std::string> notes;
    {
        const auto& first = schedule.segments.front();
        const auto es = hermitian_eigensystem(h.dense(first.bx_start_mg, first.bz_start_mg));
        const Eigen::VectorXd weight = (es.vectors.adjoint() * psi0).cwiseAbs2();
        double lo = 0.0;
        double hi = 0.0;
        bool any = false;
        for (Eigen::Index k = 0; k < weight.size(); ++k) {
            if (weight(k) < 1e-8)
                continue;
            lo = any ? std::min(lo, es.values(k)) : es.values(k);
            hi = any ? std::max(hi, es.values(k)) : es.values(k);
            any = true;
        }
        const double span = hi - lo;
        if (span > 0.0) {
            const double bound_us = h.units().natural_to_us(0.05 * 2.0 * std::numbers::pi / span);
            if (dt > bound_us) {
                notes.push_back("dt reduced from " + std::to_string(dt) + " us to " +
                                std::to_string(bound_us) + " us to resolve the initial energy spread");
                dt = bound_us;
            }
        }
    }

    RampResult coarse = detail::run_ramp(h, schedule, psi0, doublet, dt, opt.sample_us);
    if (!opt.certify) {
        coarse.notes = notes;
        return coarse;
    }
    for (int halving = 0;; ++halving) {
        RampResult fine = detail::run_ramp(h, schedule, psi0, doublet, 0.5 * dt, opt.sample_us);
        const double infidelity = 1.0 - std::norm(coarse.final_state.dot(fine.final_state));
        if (infidelity < opt.certify_infidelity) {
            fine.certification_infidelity = infidelity;
            fine.notes = notes;
            return fine;
        }
        if (halving >= opt.max_halvings)
            throw NumericalError("ramp step doubling did not converge: dt = " +
                                 std::to_string(dt) + " us vs " + std::to_string(0.5 * dt) +
                                 " us differ by infidelity " + std::to_string(infidelity));
        dt *= 0.5;
        coarse = std::move(fine);
    }
}

struct SegmentAdiabaticity {
    double duration_us = 0.0;
    double min_excitation_gap_er = 0.0;   // occupied state to nearest non-doublet level
    double excited_figure_of_merit = 0.0; // max |<0|dH/dt|j>| / (E_j - E_0)^2, j outside doublet
    double doublet_figure_of_merit = 0.0; // same, j = doublet partner
    double min_doublet_splitting_hz = 0.0;
    double duration_times_splitting = 0.0;
    std::string doublet_regime;   // sudden | adiabatic | intermediate
    std::string excited_regime;   // adiabatic | non-adiabatic
};

struct AdiabaticityReport {
    std::vector<SegmentAdiabaticity> segments;
    double min_gap_er = 0.0;
    double endpoint_gap_er = 0.0;
    double endpoint_splitting_er = 0.0;
    // classification thresholds, recorded with the output
    double sudden_threshold = 0.5;
    double adiabatic_threshold = 0.1;
    int points_per_segment = 60;
};

/// Instantaneous q = 0 spectra along the schedule. The doublet partner of the
/// occupied (lowest) level is the one with the largest weight on |R>.
inline AdiabaticityReport adiabaticity_report(const RampSchedule& schedule, const LatticeConfig& cfg,
                                              const WannierDoublet& doublet, int points = 60,
                                              int levels = 8)
{
    schedule.validate();
    if (points < 2)
        throw ConfigError("adiabaticity report needs at least two points per segment");
    const FieldDependentHamiltonian h(cfg);
    const auto& units = h.units();
    AdiabaticityReport rep;
    rep.points_per_segment = points;
    rep.min_gap_er = std::numeric_limits<double>::infinity();

    for (const auto& seg : schedule.segments) {
        SegmentAdiabaticity sa;
        sa.duration_us = seg.duration_us;
        sa.min_excitation_gap_er = std::numeric_limits<double>::infinity();
        double min_split = std::numeric_limits<double>::infinity();
        const double span_nat = units.us_to_natural(seg.duration_us);
        const double dbx = (seg.bx_end_mg - seg.bx_start_mg) / span_nat;
        const double dbz = (seg.bz_end_mg - seg.bz_start_mg) / span_nat;
        const Eigen::SparseMatrix<cplx> hdot = dbx * h.zeeman_x() + dbz * h.zeeman_z();

        for (int p = 0; p < points; ++p) {
            const double s = static_cast<double>(p) / (points - 1);
            const auto es = hermitian_lowest(h.dense(seg.bx_at(s), seg.bz_at(s)), levels);
            const Eigen::VectorXd overlap_r =
                (es.vectors.adjoint() * doublet.coeff_r).cwiseAbs2();
            Eigen::Index partner = 1;
            overlap_r.tail(levels - 1).maxCoeff(&partner);
            partner += 1;
            const Eigen::VectorXcd hdot_ground = hdot * es.vectors.col(0);
            for (Eigen::Index j = 1; j < levels; ++j) {
                const double gap = es.values(j) - es.values(0);
                const double coupling = std::abs(es.vectors.col(j).dot(hdot_ground));
                const double fom = gap > 0.0 ? coupling / (gap * gap)
                                             : (coupling > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
                if (j == partner) {
                    sa.doublet_figure_of_merit = std::max(sa.doublet_figure_of_merit, fom);
                    min_split = std::min(min_split, gap);
                } else {
                    sa.excited_figure_of_merit = std::max(sa.excited_figure_of_merit, fom);
                    sa.min_excitation_gap_er = std::min(sa.min_excitation_gap_er, gap);
                }
            }
            if (&seg == &schedule.segments.back() && p == points - 1) {
                rep.endpoint_splitting_er = es.values(partner) - es.values(0);
                double g = std::numeric_limits<double>::infinity();
                for (Eigen::Index j = 1; j < levels; ++j)
                    if (j != partner)
                        g = std::min(g, es.values(j) - es.values(0));
                rep.endpoint_gap_er = g;
            }
        }
        sa.min_doublet_splitting_hz = units.er_to_hz(min_split);
        sa.duration_times_splitting = seg.duration_us * 1e-6 * sa.min_doublet_splitting_hz;
        if (sa.duration_times_splitting < rep.sudden_threshold)
            sa.doublet_regime = "sudden";
        else if (sa.doublet_figure_of_merit < rep.adiabatic_threshold)
            sa.doublet_regime = "adiabatic";
        else
            sa.doublet_regime = "intermediate";
        sa.excited_regime =
            sa.excited_figure_of_merit < rep.adiabatic_threshold ? "adiabatic" : "non-adiabatic";
        rep.min_gap_er = std::min(rep.min_gap_er, sa.min_excitation_gap_er);
        rep.segments.push_back(sa);
    }
    return rep;
}

struct PrepResult {
    Eigen::VectorXcd final_state;
    double fidelity_l = 0.0;
    double fidelity_r = 0.0;
    double doublet_population = 0.0;
    double initial_ground_overlap = 0.0;
    RampResult ramp;
    AdiabaticityReport report;
};

/// Lowest q = 0 state of the m_F = +F diabatic potential at the given fields.
inline Eigen::VectorXcd stretched_ground_state(const LatticeConfig& cfg, double bx_mg, double bz_mg,
                                               double* ground_overlap = nullptr)
{
    const FieldDependentHamiltonian h(cfg);
    const auto& basis = h.base().basis();
    const Eigen::MatrixXcd full = h.dense(bx_mg, bz_mg);
    const int top = basis.spin_dim - 1;
    const int nw = basis.plane_waves();
    Eigen::MatrixXcd block(nw, nw);
    for (int a = 0; a < nw; ++a)
        for (int b = 0; b < nw; ++b)
            block(a, b) = full(a * basis.spin_dim + top, b * basis.spin_dim + top);
    const auto es = hermitian_lowest(block, 1);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis.dimension());
    for (int a = 0; a < nw; ++a)
        psi(a * basis.spin_dim + top) = es.vectors(a, 0);

    const auto ground = hermitian_lowest(full, 1);
    const double overlap = std::norm(ground.vectors.col(0).dot(psi));
    if (ground_overlap)
        *ground_overlap = overlap;
    if (overlap < 0.9)
        throw NumericalError("lowest band at the starting fields is not m_F = +F dominated "
                             "(overlap " + std::to_string(overlap) + " < 0.9)");
    return psi;
}

inline PrepResult prepare_ground_L(const LatticeConfig& cfg, const RampSchedule& schedule,
                                   const WannierDoublet& doublet, const RampOptions& opt = {},
                                   int report_points = 60)
{
    schedule.validate();
    if (schedule.segments.empty())
        throw ConfigError("preparation needs at least one ramp segment");
    const auto& last = schedule.segments.back();
    if (std::abs(last.bx_end_mg - cfg.bx_mg) > 1e-9 || std::abs(last.bz_end_mg - cfg.bz_mg) > 1e-9)
        throw ConfigError("schedule must end at the target fields of the lattice config");

    PrepResult res;
    const auto& first = schedule.segments.front();
    const Eigen::VectorXcd psi0 =
        stretched_ground_state(cfg, first.bx_start_mg, first.bz_start_mg, &res.initial_ground_overlap);
    res.ramp = propagate_ramp(cfg, schedule, psi0, doublet, opt);
    res.final_state = res.ramp.final_state;
    res.fidelity_l = std::norm(doublet.coeff_l.dot(res.final_state));
    res.fidelity_r = std::norm(doublet.coeff_r.dot(res.final_state));
    res.doublet_population = res.fidelity_l + res.fidelity_r;
    res.report = adiabaticity_report(schedule, cfg, doublet, report_points);
    return res;
}

}  // namespace dwsim
