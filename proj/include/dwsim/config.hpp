#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "dwsim/ensemble.hpp"
#include "dwsim/error.hpp"
#include "dwsim/lattice.hpp"

namespace dwsim {

enum class SweepAxis { u1, bx, bz, theta };

inline std::string to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::u1: return "u1";
    case SweepAxis::bx: return "bx";
    case SweepAxis::bz: return "bz";
    case SweepAxis::theta: return "theta";
    }
    return "?";
}

struct AxisBounds {
    double lo;
    double hi;
    double default_start;
    double default_stop;
};

inline AxisBounds axis_bounds(SweepAxis a)
{
    switch (a) {
    case SweepAxis::u1: return {10.0, 300.0, 50.0, 120.0};
    case SweepAxis::bx: return {5.0, 300.0, 40.0, 150.0};
    case SweepAxis::bz: return {-100.0, 100.0, -40.0, 40.0};
    case SweepAxis::theta: return {45.0, 90.0, 70.0, 90.0};
    }
    return {0, 0, 0, 0};
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::u1;
    double start = 50.0;
    double stop = 120.0;
    int steps = 15;
    double u1_scale = 1.0;

    std::vector<double> values() const
    {
        std::vector<double> v(static_cast<std::size_t>(steps));
        for (int i = 0; i < steps; ++i)
            v[static_cast<std::size_t>(i)] = start + (stop - start) * i / (steps - 1);
        return v;
    }
};

struct RabiSpec {
    double t_max_us = 1200.0;
    double dt_out_us = 2.0;
};

struct PrepareSpec {
    double bx_ramp_us = 250.0;
    double bz_ramp_us = 70.0;
    double bz_hold_mg = -50.0;
    double dt_us = 0.5;
    double sample_us = 1.0;
    int report_points = 60;
};

struct EnsembleRunSpec {
    EnsembleSpec spec;
    double t_max_us = 1500.0;
    double dt_out_us = 5.0;
};

struct FitFileSpec {
    std::filesystem::path input;
    std::string time_column = "t_us";
    std::string value_column = "fz";
};

struct OutputSpec {
    std::filesystem::path directory = "out";
    int precision = 12;
};

/// Fully resolved run configuration together with a record of every value
/// used (and which of them came from defaults).
struct RunConfig {
    LatticeConfig lattice;
    std::optional<SweepSpec> sweep;
    std::optional<RabiSpec> rabi;
    std::optional<PrepareSpec> prepare;
    std::optional<EnsembleRunSpec> ensemble;
    std::optional<FitFileSpec> fit;
    OutputSpec output;

    /// section -> key -> value as used
    std::map<std::string, std::map<std::string, std::string>> resolved;
    std::vector<std::string> defaults_applied;  // "section.key"
};

namespace detail {

inline std::string trim(std::string s)
{
    const auto a = s.find_first_not_of(" \t\r\n\"");
    if (a == std::string::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r\n\"");
    return s.substr(a, b - a + 1);
}

class SectionReader {
public:
    SectionReader(std::string name, const boost::property_tree::ptree* node, RunConfig& rc)
        : name_(std::move(name)), node_(node), rc_(rc)
    {
    }

    std::optional<std::string> raw(const std::string& key)
    {
        used_.insert(key);
        if (!node_)
            return {};
        const auto child = node_->get_child_optional(key);
        if (!child)
            return {};
        // inline comments: whitespace followed by ';' or '#'
        std::string v = child->data();
        for (std::size_t i = 1; i < v.size(); ++i)
            if ((v[i] == ';' || v[i] == '#') && (v[i - 1] == ' ' || v[i - 1] == '\t')) {
                v.resize(i);
                break;
            }
        return trim(v);
    }

    double number(const std::string& key, std::optional<double> def, double lo, double hi,
                  bool lo_open = false)
    {
        const auto text = raw(key);
        double v = 0.0;
        if (!text) {
            if (!def)
                missing_.push_back(key);
            v = def.value_or(0.0);
            note_default(key, fmt::format("{}", v), def.has_value());
            return v;
        }
        const char* first = text->data();
        const char* last = first + text->size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || !std::isfinite(v))
            throw ConfigError(name_ + "." + key + ": '" + *text + "' is not a number");
        if ((lo_open ? !(v > lo) : !(v >= lo)) || !(v <= hi))
            throw ConfigError(fmt::format("{}.{} = {} out of range {}{}, {}]", name_, key, v,
                                          lo_open ? "(" : "[", lo, hi));
        rc_.resolved[name_][key] = fmt::format("{}", v);
        return v;
    }

    long long integer(const std::string& key, long long def, long long lo, long long hi)
    {
        const auto text = raw(key);
        if (!text) {
            note_default(key, std::to_string(def), true);
            return def;
        }
        long long v = 0;
        const char* first = text->data();
        const char* last = first + text->size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last)
            throw ConfigError(name_ + "." + key + ": '" + *text + "' is not an integer");
        if (v < lo || v > hi)
            throw ConfigError(fmt::format("{}.{} = {} out of range [{}, {}]", name_, key, v, lo, hi));
        rc_.resolved[name_][key] = std::to_string(v);
        return v;
    }

    std::uint64_t unsigned64(const std::string& key, std::uint64_t def)
    {
        const auto text = raw(key);
        if (!text) {
            note_default(key, std::to_string(def), true);
            return def;
        }
        std::uint64_t v = 0;
        const char* first = text->data();
        const char* last = first + text->size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last)
            throw ConfigError(name_ + "." + key + ": '" + *text + "' is not an unsigned integer");
        rc_.resolved[name_][key] = std::to_string(v);
        return v;
    }

    std::string text(const std::string& key, const std::string& def)
    {
        const auto t = raw(key);
        if (!t) {
            note_default(key, def, true);
            return def;
        }
        rc_.resolved[name_][key] = *t;
        return *t;
    }

    const std::vector<std::string>& missing() const { return missing_; }

    /// Reject keys that were never asked for.
    void finish() const
    {
        if (!node_)
            return;
        for (const auto& [key, child] : *node_)
            if (!used_.count(key))
                throw ConfigError("unknown key '" + key + "' in [" + name_ + "]");
    }

private:
    void note_default(const std::string& key, const std::string& value, bool has_default)
    {
        if (!has_default)
            return;
        rc_.resolved[name_][key] = value;
        rc_.defaults_applied.push_back(name_ + "." + key);
    }

    std::string name_;
    const boost::property_tree::ptree* node_;
    RunConfig& rc_;
    std::set<std::string> used_;
    std::vector<std::string> missing_;
};

inline const std::set<std::string>& known_sections()
{
    static const std::set<std::string> s{"lattice", "constants", "sweep", "rabi",
                                         "prepare", "ensemble",  "fit",   "output"};
    return s;
}

}  // namespace detail

/// Parse INI text. Lattice keys may also appear before any section header.
/// `base_dir` resolves relative paths (fit input).
inline RunConfig parse_config_string(const std::string& text,
                                     const std::filesystem::path& base_dir = {})
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }

    // the INI reader drops sections without keys; restore them
    {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            const auto t = detail::trim(line);
            if (t.size() > 2 && t.front() == '[' && t.back() == ']') {
                const auto name = detail::trim(t.substr(1, t.size() - 2));
                if (!tree.get_child_optional(name))
                    tree.add_child(name, pt::ptree{});
            }
        }
    }

    // top-level keys (no section) are lattice keys
    pt::ptree lattice_node;
    for (const auto& [key, child] : tree) {
        if (detail::known_sections().count(key))
            continue;
        if (!child.empty())
            throw ConfigError("unknown section [" + key + "]");
        lattice_node.put_child(key, child);
    }
    if (const auto sec = tree.get_child_optional("lattice")) {
        for (const auto& [key, child] : *sec) {
            if (lattice_node.get_child_optional(key))
                throw ConfigError("lattice key '" + key + "' given twice");
            lattice_node.put_child(key, child);
        }
    }
    auto section = [&](const std::string& name) -> const pt::ptree* {
        const auto c = tree.get_child_optional(name);
        return c ? &*c : nullptr;
    };

    RunConfig rc;
    {
        detail::SectionReader r("lattice", &lattice_node, rc);
        auto& l = rc.lattice;
        l.u1_er = r.number("u1_er", {}, 0.0, 1e4, true);
        l.theta_deg = r.number("theta_deg", {}, 0.0, 180.0);
        l.bx_mg = r.number("bx_mg", {}, -1e4, 1e4);
        if (!r.missing().empty()) {
            std::string list;
            for (const auto& k : r.missing())
                list += (list.empty() ? "" : ", ") + k;
            throw ConfigError("missing required keys: " + list +
                              " (required: u1_er, theta_deg, bx_mg)");
        }
        l.bz_mg = r.number("bz_mg", 0.0, -1e4, 1e4);
        l.phase = phase_from_string(r.text("fictitious_phase", std::string(to_string(l.phase))));
        l.n_planewaves = static_cast<int>(r.integer("n_planewaves", 24, 8, 2000));
        l.n_q = static_cast<int>(r.integer("n_q", 33, 1, 100000));
        l.z_points = static_cast<int>(r.integer("z_points", 512, 64, 1 << 20));
        const double amu = 1.66053906660e-27;
        l.species.mass_kg = r.number("mass_amu", 132.905451961, 0.0, 1e6, true) * amu;
        l.species.wavelength_m = r.number("wavelength_nm", 852.35, 0.0, 1e9, true) * 1e-9;
        l.species.g_f = r.number("g_f", 0.25, -10.0, 10.0);
        const double f = r.number("spin_f", 4.0, 0.5, 50.0);
        if (std::abs(2.0 * f - std::round(2.0 * f)) > 1e-12)
            throw ConfigError("lattice.spin_f must be a multiple of 1/2");
        l.species.two_f = static_cast<int>(std::lround(2.0 * f));
        r.finish();
    }
    {
        detail::SectionReader r("constants", section("constants"), rc);
        auto& c = rc.lattice.constants;
        c.hbar = r.number("hbar", c.hbar, 0.0, 1.0, true);
        c.mu_b = r.number("mu_b", c.mu_b, 0.0, 1.0, true);
        const double amu = r.number("amu", c.amu, 0.0, 1.0, true);
        rc.lattice.species.mass_kg *= amu / c.amu;
        c.amu = amu;
        r.finish();
    }
    rc.lattice.validate();

    if (const auto* node = section("sweep")) {
        detail::SectionReader r("sweep", node, rc);
        SweepSpec s;
        const auto axis = r.text("parameter", "u1");
        if (axis == "u1")
            s.axis = SweepAxis::u1;
        else if (axis == "bx")
            s.axis = SweepAxis::bx;
        else if (axis == "bz")
            s.axis = SweepAxis::bz;
        else if (axis == "theta")
            s.axis = SweepAxis::theta;
        else
            throw ConfigError("sweep.parameter must be one of u1, bx, bz, theta; got '" + axis + "'");
        const auto b = axis_bounds(s.axis);
        s.start = r.number("start", b.default_start, b.lo, b.hi);
        s.stop = r.number("stop", b.default_stop, b.lo, b.hi);
        s.steps = static_cast<int>(r.integer("steps", 15, 2, 10000));
        s.u1_scale = r.number("u1_scale", 1.0, 0.0, 10.0, true);
        if (s.start == s.stop)
            throw ConfigError("sweep.start must differ from sweep.stop");
        r.finish();
        rc.sweep = s;
    }
    if (const auto* node = section("rabi")) {
        detail::SectionReader r("rabi", node, rc);
        RabiSpec s;
        s.t_max_us = r.number("t_max_us", s.t_max_us, 0.0, 1e6, true);
        s.dt_out_us = r.number("dt_out_us", s.dt_out_us, 0.0, 1e6, true);
        r.finish();
        rc.rabi = s;
    }
    if (const auto* node = section("prepare")) {
        detail::SectionReader r("prepare", node, rc);
        PrepareSpec s;
        s.bx_ramp_us = r.number("bx_ramp_us", s.bx_ramp_us, 0.0, 1e6, true);
        s.bz_ramp_us = r.number("bz_ramp_us", s.bz_ramp_us, 0.0, 1e6, true);
        s.bz_hold_mg = r.number("bz_hold_mg", s.bz_hold_mg, -1e4, 1e4);
        s.dt_us = r.number("dt_us", s.dt_us, 0.0, 1e3, true);
        s.sample_us = r.number("sample_us", s.sample_us, 0.0, 1e6);
        s.report_points = static_cast<int>(r.integer("report_points", s.report_points, 50, 100000));
        r.finish();
        rc.prepare = s;
    }
    if (const auto* node = section("ensemble")) {
        detail::SectionReader r("ensemble", node, rc);
        EnsembleRunSpec s;
        s.spec.base = rc.lattice;
        s.spec.u1_relative_spread = r.number("u1_relative_spread", 0.05, 0.0, 0.5);
        if (!(s.spec.u1_relative_spread < 0.5))
            throw ConfigError("ensemble.u1_relative_spread out of range [0, 0.5)");
        s.spec.n_samples = static_cast<int>(r.integer("n_samples", 200, 1, 1000000));
        s.spec.seed = r.unsigned64("seed", 1);
        s.spec.distribution = distribution_from_string(r.text("distribution", "gaussian"));
        s.spec.flatness_q_points = static_cast<int>(r.integer("flatness_q_points", 4, 1, 1000));
        s.t_max_us = r.number("t_max_us", s.t_max_us, 0.0, 1e6, true);
        s.dt_out_us = r.number("dt_out_us", s.dt_out_us, 0.0, 1e6, true);
        r.finish();
        rc.ensemble = s;
    }
    if (const auto* node = section("fit")) {
        detail::SectionReader r("fit", node, rc);
        FitFileSpec s;
        const auto input = r.text("input", "");
        if (input.empty())
            throw ConfigError("fit.input (CSV path) is required");
        s.input = std::filesystem::path(input);
        if (s.input.is_relative() && !base_dir.empty())
            s.input = base_dir / s.input;
        s.time_column = r.text("time_column", s.time_column);
        s.value_column = r.text("value_column", s.value_column);
        r.finish();
        rc.fit = s;
    }
    {
        detail::SectionReader r("output", section("output"), rc);
        rc.output.directory = r.text("directory", "out");
        rc.output.precision = static_cast<int>(r.integer("precision", 12, 1, 17));
        r.finish();
    }
    return rc;
}

inline RunConfig parse_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_string(buf.str(), path.parent_path());
}

}  // namespace dwsim
