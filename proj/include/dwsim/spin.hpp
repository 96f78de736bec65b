#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "dwsim/error.hpp"

namespace dwsim {

using cplx = std::complex<double>;

/// Dimensionless angular momentum matrices for one F manifold.
/// Basis order is m_F = -F, ..., +F (index i <-> m = i - F).
struct SpinOperators {
    int two_f = 0;
    Eigen::MatrixXcd fx;
    Eigen::MatrixXcd fy;
    Eigen::MatrixXcd fz;

    int dimension() const { return two_f + 1; }
    double spin() const { return 0.5 * two_f; }
    double m_value(int index) const { return index - 0.5 * two_f; }
};

inline SpinOperators make_spin_operators_2f(int two_f)
{
    if (two_f < 1)
        throw ConfigError("total spin F must be >= 1/2");
    const int dim = two_f + 1;
    const double f = 0.5 * two_f;

    // F+ |m> = sqrt(F(F+1) - m(m+1)) |m+1>
    Eigen::MatrixXd raise = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i + 1 < dim; ++i) {
        const double m = i - f;
        raise(i + 1, i) = std::sqrt(f * (f + 1.0) - m * (m + 1.0));
    }
    const Eigen::MatrixXd lower = raise.transpose();

    SpinOperators ops;
    ops.two_f = two_f;
    ops.fx = (0.5 * (raise + lower)).cast<cplx>();
    ops.fy = (raise - lower).cast<cplx>() * cplx(0.0, -0.5);
    ops.fz = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i)
        ops.fz(i, i) = i - f;
    return ops;
}

/// F must be a non-negative multiple of 1/2, at least 1/2.
inline SpinOperators make_spin_operators(double f)
{
    const double twice = 2.0 * f;
    const double rounded = std::round(twice);
    if (!std::isfinite(f) || std::abs(twice - rounded) > 1e-12 || rounded < 1.0)
        throw ConfigError("total spin F must be a positive multiple of 1/2");
    return make_spin_operators_2f(static_cast<int>(rounded));
}

}  // namespace dwsim
