#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dwsim/error.hpp"

namespace dwsim {

/// y(t) = A exp(-t/tau) cos(2 pi nu t + phi) + C with t in microseconds.
/// The decay is fitted as a rate gamma = 1/tau so that an undamped signal
/// (gamma ~ 0, possibly slightly negative) stays well posed.
struct DampedSinusoidFit {
    double amplitude = 0.0;
    double frequency_khz = 0.0;
    double decay_rate_per_us = 0.0;
    double phase = 0.0;
    double offset = 0.0;

    double residual_rms = 0.0;
    int iterations = 0;
    // standard errors, same order as the parameters above
    std::array<double, 5> std_error{};
    Eigen::Matrix<double, 5, 5> covariance = Eigen::Matrix<double, 5, 5>::Zero();
    std::vector<std::string> warnings;

    double tau_us() const
    {
        return decay_rate_per_us > 0.0 ? 1.0 / decay_rate_per_us
                                       : std::numeric_limits<double>::infinity();
    }
    double tau_std_error_us() const
    {
        return decay_rate_per_us > 0.0 ? std_error[2] / (decay_rate_per_us * decay_rate_per_us)
                                       : std::numeric_limits<double>::infinity();
    }
};

struct FitGuess {
    double amplitude;
    double frequency_khz;
    double decay_rate_per_us;
    double phase;
    double offset;
};

struct FitOptions {
    int max_iterations = 200;
    /// stop when every Jacobian column is this close to orthogonal to the residual
    double gradient_tolerance = 1e-10;
    /// looser bound accepted when rounding stops all further descent
    double stall_tolerance = 1e-7;
};

namespace detail {

using FitParams = Eigen::Matrix<double, 5, 1>;

inline double damped_model(const FitParams& p, double t)
{
    return p(0) * std::exp(-p(2) * t) * std::cos(2.0 * std::numbers::pi * p(1) * t + p(3)) + p(4);
}

/// |sum (y - c) e^{-2 pi i f t}|^2
inline std::complex<double> fourier_sum(std::span<const double> t, std::span<const double> y, double c,
                                        double f)
{
    std::complex<double> z{};
    for (std::size_t i = 0; i < t.size(); ++i)
        z += (y[i] - c) * std::polar(1.0, -2.0 * std::numbers::pi * f * t[i]);
    return z;
}

inline FitParams initial_guess(std::span<const double> t, std::span<const double> y)
{
    const auto n = t.size();
    double mean = 0.0;
    for (double v : y)
        mean += v;
    mean /= static_cast<double>(n);

    const double span = t.back() - t.front();
    const double dt = span / static_cast<double>(n - 1);
    const double f_max = 0.5 / dt;
    const double df = 0.1 / span;

    double best_f = df;
    double best_p = -1.0;
    for (double f = df; f <= f_max; f += df) {
        const double p = std::norm(fourier_sum(t, y, mean, f));
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    // golden-section refinement of the periodogram peak
    double a = std::max(df * 0.5, best_f - df);
    double b = best_f + df;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
        const double c1 = b - g * (b - a);
        const double c2 = a + g * (b - a);
        if (std::norm(fourier_sum(t, y, mean, c1)) > std::norm(fourier_sum(t, y, mean, c2)))
            b = c2;
        else
            a = c1;
    }
    const double freq = 0.5 * (a + b);
    const double phase = std::arg(fourier_sum(t, y, mean, freq));

    // log-envelope slope from per-period peaks
    const double period = 1.0 / freq;
    std::vector<double> tc;
    std::vector<double> logpk;
    std::size_t i = 0;
    while (i < n) {
        const double t_end = t[i] + period;
        double peak = 0.0;
        double tsum = 0.0;
        std::size_t cnt = 0;
        for (; i < n && t[i] < t_end; ++i) {
            peak = std::max(peak, std::abs(y[i] - mean));
            tsum += t[i];
            ++cnt;
        }
        if (peak > 0.0) {
            tc.push_back(tsum / static_cast<double>(cnt));
            logpk.push_back(std::log(peak));
        }
    }
    double rate = 0.0;
    double amp = 0.0;
    if (tc.size() >= 2) {
        Eigen::MatrixXd design(static_cast<Eigen::Index>(tc.size()), 2);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(tc.size()));
        for (std::size_t k = 0; k < tc.size(); ++k) {
            design(static_cast<Eigen::Index>(k), 0) = 1.0;
            design(static_cast<Eigen::Index>(k), 1) = tc[k];
            rhs(static_cast<Eigen::Index>(k)) = logpk[k];
        }
        const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
        rate = std::max(0.0, -coef(1));
        amp = std::exp(coef(0));
    } else {
        amp = logpk.empty() ? 0.0 : std::exp(logpk.front());
    }
    FitParams p;
    p << amp, freq, rate, phase, mean;
    return p;
}

}  // namespace detail

/// Levenberg-Marquardt least squares with Marquardt (diagonal) scaling.
inline DampedSinusoidFit fit_damped_sinusoid(std::span<const double> t_us, std::span<const double> y,
                                             std::optional<FitGuess> guess = {},
                                             const FitOptions& opt = {})
{
    using detail::FitParams;
    const auto n = t_us.size();
    if (n != y.size())
        throw ConfigError("time and value series differ in length");
    if (n < 6)
        throw ConfigError("damped sinusoid fit needs at least 6 samples");
    for (std::size_t i = 1; i < n; ++i)
        if (!(t_us[i] > t_us[i - 1]))
            throw ConfigError("fit times must be strictly increasing");

    double lo = y[0];
    double hi = y[0];
    for (double v : y) {
        if (!std::isfinite(v))
            throw ConfigError("fit data contains non-finite values");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo <= 1e-14 * std::max(1.0, std::max(std::abs(hi), std::abs(lo))))
        throw NumericalError("degenerate data: series is constant");

    DampedSinusoidFit fit;
    FitParams p;
    if (guess) {
        p << guess->amplitude, guess->frequency_khz * 1e-3, guess->decay_rate_per_us, guess->phase,
            guess->offset;
    } else {
        p = detail::initial_guess(t_us, y);
    }

    const double span = t_us.back() - t_us.front();
    const double dt = span / static_cast<double>(n - 1);
    if (p(1) * dt > 0.25)
        fit.warnings.push_back("fewer than 4 samples per oscillation period");
    if (p(1) * span < 2.0)
        fit.warnings.push_back("less than two oscillation periods of data");

    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::VectorXd r(ni);
    Eigen::MatrixXd jac(ni, 5);
    auto evaluate = [&](const FitParams& q, Eigen::VectorXd& res, Eigen::MatrixXd* j) {
        const double w = 2.0 * std::numbers::pi;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = t_us[i];
            const double e = std::exp(-q(2) * t);
            const double arg = w * q(1) * t + q(3);
            const double c = std::cos(arg);
            const double s = std::sin(arg);
            const auto k = static_cast<Eigen::Index>(i);
            res(k) = q(0) * e * c + q(4) - y[i];
            if (j) {
                (*j)(k, 0) = e * c;
                (*j)(k, 1) = -q(0) * e * s * w * t;
                (*j)(k, 2) = -t * q(0) * e * c;
                (*j)(k, 3) = -q(0) * e * s;
                (*j)(k, 4) = 1.0;
            }
        }
        return res.squaredNorm();
    };

    double yscale = 0.0;
    for (double v : y)
        yscale += v * v;
    yscale = std::sqrt(yscale);

    double cost = evaluate(p, r, &jac);
    double lambda = 1e-3;
    bool converged = false;
    int it = 0;
    auto orthogonality = [&] {
        const double rn = r.norm();
        if (rn <= 1e-14 * yscale)
            return 0.0;
        double worst = 0.0;
        for (int c = 0; c < 5; ++c) {
            const double cn = jac.col(c).norm();
            if (cn > 0.0)
                worst = std::max(worst, std::abs(jac.col(c).dot(r)) / (cn * rn));
        }
        return worst;
    };

    for (; it <= opt.max_iterations; ++it) {
        if (orthogonality() < opt.gradient_tolerance) {
            converged = true;
            break;
        }
        if (it == opt.max_iterations)
            break;
        const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
        const FitParams grad = jac.transpose() * r;
        bool accepted = false;
        while (lambda < 1e16) {
            Eigen::Matrix<double, 5, 5> a = jtj;
            for (int d = 0; d < 5; ++d)
                a(d, d) += lambda * std::max(jtj(d, d), 1e-300);
            const FitParams step = a.ldlt().solve(-grad);
            const FitParams trial = p + step;
            Eigen::VectorXd rt(ni);
            const double ct = evaluate(trial, rt, nullptr);
            if (std::isfinite(ct) && ct < cost) {
                p = trial;
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        cost = evaluate(p, r, &jac);
        if (!accepted) {
            // no downhill step left in floating point: accept if already near
            // stationary, or if the residual is at the noise floor of the data
            converged = orthogonality() < opt.stall_tolerance || r.norm() <= 1e-9 * yscale;
            break;
        }
    }
    if (!converged)
        throw NumericalError("damped sinusoid fit did not converge after " + std::to_string(it) +
                             " iterations: A=" + std::to_string(p(0)) +
                             " nu_kHz=" + std::to_string(p(1) * 1e3) +
                             " gamma=" + std::to_string(p(2)) + " phi=" + std::to_string(p(3)) +
                             " C=" + std::to_string(p(4)) +
                             " rms=" + std::to_string(std::sqrt(cost / static_cast<double>(n))));

    // canonical sign conventions
    if (p(1) < 0.0) {
        p(1) = -p(1);
        p(3) = -p(3);
    }
    if (p(0) < 0.0) {
        p(0) = -p(0);
        p(3) += std::numbers::pi;
    }
    p(3) = std::remainder(p(3), 2.0 * std::numbers::pi);

    evaluate(p, r, &jac);
    fit.iterations = it;
    fit.amplitude = p(0);
    fit.frequency_khz = p(1) * 1e3;
    fit.decay_rate_per_us = p(2);
    fit.phase = p(3);
    fit.offset = p(4);
    fit.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(n));
    const double sigma2 = r.squaredNorm() / std::max<double>(1.0, static_cast<double>(n) - 5.0);
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    fit.covariance = sigma2 * jtj.inverse();
    fit.covariance.row(1) *= 1e3;  // nu in kHz
    fit.covariance.col(1) *= 1e3;
    for (int d = 0; d < 5; ++d)
        fit.std_error[static_cast<std::size_t>(d)] = std::sqrt(std::max(0.0, fit.covariance(d, d)));
    return fit;
}

inline double damped_sinusoid(const DampedSinusoidFit& f, double t_us)
{
    return f.amplitude * std::exp(-f.decay_rate_per_us * t_us) *
               std::cos(2.0 * std::numbers::pi * f.frequency_khz * 1e-3 * t_us + f.phase) +
           f.offset;
}

}  // namespace dwsim
