#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dwsim/bands.hpp"
#include "dwsim/config.hpp"
#include "dwsim/dynamics.hpp"
#include "dwsim/ensemble.hpp"
#include "dwsim/fit.hpp"
#include "dwsim/lattice.hpp"
#include "dwsim/output.hpp"
#include "dwsim/parallel.hpp"

namespace dwsim {

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"potentials", "bands",  "wannier",  "rabi",
                                                "prepare",    "sweep",  "ensemble", "fit"};
    return names;
}

namespace detail {

inline std::string m_label(int m_index, int two_f)
{
    const int twice = 2 * m_index - two_f;
    if (twice % 2 == 0)
        return fmt::format("{:+d}", twice / 2);
    return fmt::format("{:+d}/2", twice);
}

inline json fit_json(const DampedSinusoidFit& f)
{
    json j;
    j["model"] = "A*exp(-t/tau)*cos(2*pi*nu*t + phi) + C, t in us";
    j["amplitude"] = f.amplitude;
    j["frequency_khz"] = f.frequency_khz;
    j["tau_us"] = std::isfinite(f.tau_us()) ? json(f.tau_us()) : json("inf");
    j["decay_rate_per_us"] = f.decay_rate_per_us;
    j["phase_rad"] = f.phase;
    j["offset"] = f.offset;
    j["residual_rms"] = f.residual_rms;
    j["iterations"] = f.iterations;
    j["std_error"] = {{"amplitude", f.std_error[0]},
                      {"frequency_khz", f.std_error[1]},
                      {"decay_rate_per_us", f.std_error[2]},
                      {"phase_rad", f.std_error[3]},
                      {"offset", f.std_error[4]}};
    json cov = json::array();
    for (int r = 0; r < 5; ++r) {
        json row = json::array();
        for (int c = 0; c < 5; ++c)
            row.push_back(f.covariance(r, c));
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["covariance_order"] = {"amplitude", "frequency_khz", "decay_rate_per_us", "phase_rad", "offset"};
    j["warnings"] = f.warnings;
    return j;
}

inline void require(bool present, const char* block, const char* command)
{
    if (!present)
        throw ConfigError(std::string("command '") + command + "' needs a [" + block +
                          "] section in the config");
}

}  // namespace detail

inline OutputBundle run_potentials(const RunConfig& rc, int /*jobs*/ = 1)
{
    const auto& cfg = rc.lattice;
    const auto pc = potential_curves(cfg);
    const int d = cfg.species.spin_dimension();
    std::vector<std::string> header{"z_nm"};
    for (int k = 0; k < d; ++k)
        header.push_back(fmt::format("adiabatic_{}", k + 1));
    for (int m = 0; m < d; ++m)
        header.push_back("diabatic_m" + detail::m_label(m, cfg.species.two_f));
    CsvTable t(header);
    const int p = rc.output.precision;
    for (std::size_t i = 0; i < pc.z_nm.size(); ++i) {
        std::vector<double> row{pc.z_nm[i]};
        for (const auto& c : pc.adiabatic)
            row.push_back(c[i]);
        for (const auto& c : pc.diabatic)
            row.push_back(c[i]);
        t.add_numbers(row, p);
    }
    OutputBundle b("potentials", rc);
    b.add_csv("potentials.csv", t);
    const auto minima = periodic_local_minima(pc.adiabatic.front());
    b.summary()["lowest_adiabatic_minima_per_period"] = minima.size();
    return b;
}

inline OutputBundle run_bands(const RunConfig& rc, int jobs = 1)
{
    const auto& cfg = rc.lattice;
    BandOptions opt;
    opt.jobs = jobs;
    opt.with_spinors = false;
    const int nb = 6;
    const auto sol = solve_bands(cfg, nb, opt);
    std::vector<std::string> header{"q_over_kL"};
    for (int b = 0; b < nb; ++b)
        header.push_back(fmt::format("E{}", b + 1));
    CsvTable t(header);
    for (std::size_t i = 0; i < sol.q_grid.size(); ++i) {
        std::vector<double> row{sol.q_grid[i]};
        for (int b = 0; b < nb; ++b)
            row.push_back(sol.energies(static_cast<Eigen::Index>(i), b));
        t.add_numbers(row, rc.output.precision);
    }
    OutputBundle out("bands", rc);
    out.add_csv("bands.csv", t);
    const auto split = doublet_splitting(sol);
    auto& s = out.summary();
    s["epsilon_hz"] = split.epsilon_hz;
    s["epsilon_er"] = split.epsilon_er;
    s["flatness"] = sol.flatness;
    s["flatness_dubious"] = split.dubious;
    s["certification_max_relative_drift"] = sol.certification_drift;
    if (split.dubious)
        out.note("doublet flatness above 0.2: two-level reduction questionable");
    return out;
}

inline OutputBundle run_wannier(const RunConfig& rc, int jobs = 1)
{
    const auto& cfg = rc.lattice;
    WannierOptions opt;
    opt.jobs = jobs;
    const auto w = wannier_doublet(cfg, opt);
    const int d = w.basis.spin_dim;
    std::vector<std::string> header{"z_nm"};
    for (const char* name : {"S", "A", "L", "R"})
        for (int m = 0; m < d; ++m)
            header.push_back(fmt::format("{}_m{}", name, detail::m_label(m, d - 1)));
    CsvTable t(header);
    const std::array<const SpinorWavefunction*, 4> states{&w.psi_s, &w.psi_a, &w.psi_l, &w.psi_r};
    for (std::size_t i = 0; i < w.psi_s.z_nm.size(); ++i) {
        std::vector<double> row{w.psi_s.z_nm[i]};
        for (const auto* psi : states)
            for (int m = 0; m < d; ++m)
                row.push_back(std::norm(psi->amplitude(static_cast<Eigen::Index>(i), m)));
        t.add_numbers(row, rc.output.precision);
    }
    const auto obs_l = localized_observables(w.psi_l);
    const auto obs_r = localized_observables(w.psi_r);
    json j;
    j["epsilon_hz"] = w.epsilon_hz;
    j["epsilon_er"] = w.epsilon_er;
    j["energy_s_er"] = w.energy_s;
    j["energy_a_er"] = w.energy_a;
    j["flatness"] = w.flatness;
    j["cell_start_nm"] = w.cell_start_nm;
    j["well_center_nm"] = w.well_center_nm;
    j["midpoint_nm"] = w.midpoint_nm;
    j["centroid_l_nm"] = w.centroid_l_nm;
    j["centroid_r_nm"] = w.centroid_r_nm;
    j["separation_nm"] = w.separation_nm();
    j["overlap"] = w.overlap;
    j["fz_l"] = obs_l.fz_mean;
    j["fz_r"] = obs_r.fz_mean;
    j["populations_l"] = obs_l.populations;
    j["populations_r"] = obs_r.populations;
    j["notes"] = w.notes;
    OutputBundle out("wannier", rc);
    out.add_csv("wannier.csv", t);
    out.add_json("doublet.json", j);
    return out;
}

inline CsvTable time_series_table(const TimeSeries& s, int precision)
{
    std::vector<std::string> header{"t_us", "pL", "pR", "leakage", "fz"};
    for (std::size_t m = 0; m < s.p_m.size(); ++m)
        header.push_back("p_m" + detail::m_label(static_cast<int>(m), s.two_f));
    CsvTable t(header);
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::vector<double> row{s.t_us[i], s.p_l[i], s.p_r[i], s.leakage[i], s.fz[i]};
        for (const auto& pm : s.p_m)
            row.push_back(pm[i]);
        t.add_numbers(row, precision);
    }
    return t;
}

inline OutputBundle run_rabi(const RunConfig& rc, int jobs = 1)
{
    detail::require(rc.rabi.has_value(), "rabi", "rabi");
    WannierOptions opt;
    opt.jobs = jobs;
    const auto run = rabi_from_left(rc.lattice, time_grid(rc.rabi->t_max_us, rc.rabi->dt_out_us), opt);
    OutputBundle out("rabi", rc);
    out.add_csv("rabi.csv", time_series_table(run.series, rc.output.precision));
    double max_leak = 0.0;
    double norm_dev = 0.0;
    for (std::size_t i = 0; i < run.series.size(); ++i) {
        max_leak = std::max(max_leak, run.series.leakage[i]);
        norm_dev = std::max(norm_dev, std::abs(run.series.norm[i] - 1.0));
    }
    auto& s = out.summary();
    s["epsilon_hz"] = run.doublet.epsilon_hz;
    s["rabi_period_us"] = 1e6 / run.doublet.epsilon_hz;
    s["max_leakage"] = max_leak;
    s["max_norm_deviation"] = norm_dev;
    return out;
}

inline OutputBundle run_prepare(const RunConfig& rc, int jobs = 1)
{
    detail::require(rc.prepare.has_value(), "prepare", "prepare");
    const auto& p = *rc.prepare;
    const auto& cfg = rc.lattice;
    WannierOptions wopt;
    wopt.jobs = jobs;
    const auto w = wannier_doublet(cfg, wopt);
    const auto schedule =
        RampSchedule::two_stage(cfg.bx_mg, cfg.bz_mg, p.bz_hold_mg, p.bx_ramp_us, p.bz_ramp_us);
    RampOptions ro;
    ro.dt_us = p.dt_us;
    ro.sample_us = p.sample_us;
    const auto res = prepare_ground_L(cfg, schedule, w, ro, p.report_points);

    json j;
    j["fidelity_l"] = res.fidelity_l;
    j["fidelity_r"] = res.fidelity_r;
    j["doublet_population"] = res.doublet_population;
    j["initial_ground_overlap"] = res.initial_ground_overlap;
    j["dt_used_us"] = res.ramp.dt_us;
    j["step_doubling_infidelity"] = res.ramp.certification_infidelity;
    json segs = json::array();
    for (std::size_t i = 0; i < schedule.segments.size(); ++i) {
        const auto& seg = schedule.segments[i];
        const auto& a = res.report.segments[i];
        segs.push_back({{"duration_us", seg.duration_us},
                        {"bx_mg", {seg.bx_start_mg, seg.bx_end_mg}},
                        {"bz_mg", {seg.bz_start_mg, seg.bz_end_mg}},
                        {"min_excitation_gap_er", a.min_excitation_gap_er},
                        {"excited_figure_of_merit", a.excited_figure_of_merit},
                        {"doublet_figure_of_merit", a.doublet_figure_of_merit},
                        {"min_doublet_splitting_hz", a.min_doublet_splitting_hz},
                        {"duration_times_splitting", a.duration_times_splitting},
                        {"doublet_regime", a.doublet_regime},
                        {"excited_regime", a.excited_regime}});
    }
    j["adiabaticity"] = {{"segments", segs},
                         {"min_gap_er", res.report.min_gap_er},
                         {"endpoint_gap_er", res.report.endpoint_gap_er},
                         {"endpoint_splitting_er", res.report.endpoint_splitting_er},
                         {"sudden_threshold", res.report.sudden_threshold},
                         {"adiabatic_threshold", res.report.adiabatic_threshold},
                         {"points_per_segment", res.report.points_per_segment}};
    j["notes"] = res.ramp.notes;
    OutputBundle out("prepare", rc);
    out.add_json("prep.json", j);
    out.add_csv("prep_series.csv", time_series_table(res.ramp.series, rc.output.precision));
    return out;
}

struct SweepRow {
    double value = 0.0;
    double nu_hz = std::numeric_limits<double>::quiet_NaN();
    double flatness = std::numeric_limits<double>::quiet_NaN();
    bool flagged = false;
    std::string diagnostic;
};

inline LatticeConfig sweep_point(const LatticeConfig& base, const SweepSpec& s, double value)
{
    LatticeConfig cfg = base;
    switch (s.axis) {
    case SweepAxis::u1: cfg.u1_er = value; break;
    case SweepAxis::bx: cfg.bx_mg = value; break;
    case SweepAxis::bz: cfg.bz_mg = value; break;
    case SweepAxis::theta: cfg.theta_deg = value; break;
    }
    cfg.u1_er *= s.u1_scale;
    return cfg;
}

/// One band solve per axis value, fanned out over `jobs` workers. Points that
/// fail are flagged and the sweep continues.
inline std::vector<SweepRow> sweep_frequency(const LatticeConfig& base, const SweepSpec& s, int jobs = 1)
{
    const auto values = s.values();
    std::vector<SweepRow> rows(values.size());
    parallel_for(values.size(), jobs, [&](std::size_t i) {
        auto& row = rows[i];
        row.value = values[i];
        try {
            BandOptions bo;
            bo.with_spinors = false;
            const auto sol = solve_bands(sweep_point(base, s, values[i]), 2, bo);
            const auto split = doublet_splitting(sol);
            row.nu_hz = split.epsilon_hz;
            row.flatness = std::max(split.flatness_lower, split.flatness_upper);
            if (split.dubious) {
                row.flagged = true;
                row.diagnostic = "flatness above 0.2";
            }
        } catch (const NumericalError& e) {
            row.flagged = true;
            row.diagnostic = e.what();
        }
    });
    return rows;
}

inline OutputBundle run_sweep(const RunConfig& rc, int jobs = 1)
{
    detail::require(rc.sweep.has_value(), "sweep", "sweep");
    const auto rows = sweep_frequency(rc.lattice, *rc.sweep, jobs);
    CsvTable t({"param_value", "nu_hz", "flatness", "flagged"});
    OutputBundle out("sweep", rc);
    for (const auto& r : rows) {
        t.add_row({format_number(r.value, rc.output.precision), format_number(r.nu_hz, rc.output.precision),
                   format_number(r.flatness, rc.output.precision), r.flagged ? "1" : "0"});
        if (r.flagged)
            out.note(fmt::format("{} = {}: {}", to_string(rc.sweep->axis), r.value, r.diagnostic));
    }
    out.add_csv("sweep.csv", t);
    out.summary()["parameter"] = to_string(rc.sweep->axis);
    out.summary()["u1_scale"] = rc.sweep->u1_scale;
    return out;
}

inline OutputBundle run_ensemble(const RunConfig& rc, int jobs = 1)
{
    detail::require(rc.ensemble.has_value(), "ensemble", "ensemble");
    const auto& e = *rc.ensemble;
    const auto res = ensemble_magnetization(e.spec, time_grid(e.t_max_us, e.dt_out_us), jobs);
    CsvTable t({"t_us", "mean_fz"});
    for (std::size_t i = 0; i < res.t_us.size(); ++i)
        t.add_numbers({res.t_us[i], res.mean_fz[i]}, rc.output.precision);
    CsvTable samples({"index", "u1_er", "epsilon_hz", "skipped"});
    OutputBundle out("ensemble", rc);
    for (std::size_t i = 0; i < res.samples.size(); ++i) {
        const auto& s = res.samples[i];
        samples.add_row({std::to_string(i), format_number(s.u1_er, rc.output.precision),
                         format_number(s.skipped ? std::nan("") : s.epsilon_hz, rc.output.precision),
                         s.skipped ? "1" : "0"});
        if (s.skipped)
            out.note(fmt::format("sample {} skipped: {}", i, s.diagnostic));
    }
    out.add_csv("ensemble.csv", t);
    out.add_csv("ensemble_samples.csv", samples);
    const auto f = fit_damped_sinusoid(res.t_us, res.mean_fz);
    out.add_json("fit.json", detail::fit_json(f));
    out.summary()["samples_used"] = res.n_used;
    return out;
}

inline OutputBundle run_fit(const RunConfig& rc, int /*jobs*/ = 1)
{
    detail::require(rc.fit.has_value(), "fit", "fit");
    const auto t = read_csv_column(rc.fit->input, rc.fit->time_column);
    const auto y = read_csv_column(rc.fit->input, rc.fit->value_column);
    const auto f = fit_damped_sinusoid(t, y);
    OutputBundle out("fit", rc);
    out.add_json("fit.json", detail::fit_json(f));
    return out;
}

inline OutputBundle run_command(const std::string& cmd, const RunConfig& rc, int jobs = 1)
{
    if (cmd == "potentials")
        return run_potentials(rc, jobs);
    if (cmd == "bands")
        return run_bands(rc, jobs);
    if (cmd == "wannier")
        return run_wannier(rc, jobs);
    if (cmd == "rabi")
        return run_rabi(rc, jobs);
    if (cmd == "prepare")
        return run_prepare(rc, jobs);
    if (cmd == "sweep")
        return run_sweep(rc, jobs);
    if (cmd == "ensemble")
        return run_ensemble(rc, jobs);
    if (cmd == "fit")
        return run_fit(rc, jobs);
    throw ConfigError("unknown command '" + cmd + "'");
}

}  // namespace dwsim
