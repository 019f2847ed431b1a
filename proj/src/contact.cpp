/*
 * Copyright (C) 2026 The kec authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kec/contact.h"
#include "kec/error.h"
#include "kec/uq.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kec
{

namespace
{

// Per-cell Gauss-Legendre rule used for the control potential.
const QuadratureRule& cell_rule()
{
    static const QuadratureRule rule = gauss_legendre(8);
    return rule;
}

void require_positive_mean(double m)
{
    if (!(m > 0.0)) {
        throw_invalid("mean number of contacts must be positive, got " + std::to_string(m));
    }
}

std::vector<double> normalize_log_density(std::vector<double> log_f, std::size_t first, const Grid1D& grid)
{
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = first; i < log_f.size(); ++i) {
        max_log = std::max(max_log, log_f[i]);
    }
    std::vector<double> f(log_f.size(), 0.0);
    for (std::size_t i = first; i < log_f.size(); ++i) {
        f[i] = std::exp(log_f[i] - max_log);
    }
    const double mass = trapezoid(f, grid);
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw_numerical("equilibrium density cannot be normalized on this grid");
    }
    for (auto& v : f) {
        v /= mass;
    }
    return f;
}

} // namespace

void ContactParams::validate() const
{
    if (!(mu > 0.0)) {
        throw_invalid("mu must be positive");
    }
    if (!(sigma2 > 0.0)) {
        throw_invalid("sigma2 must be positive");
    }
    if (!(tau > 0.0)) {
        throw_invalid("tau must be positive");
    }
    if (!(epsilon > 0.0)) {
        throw_invalid("epsilon must be positive");
    }
}

DeltaValue::DeltaValue(double delta)
    : m_delta(delta)
{
    if (!(delta >= -1.0 && delta <= 1.0)) {
        throw_invalid("delta must lie in [-1, 1], got " + std::to_string(delta));
    }
}

double exprel(double y)
{
    if (std::abs(y) < 1e-5) {
        return 1.0 + y * (0.5 + y / 6.0);
    }
    return std::expm1(y) / y;
}

double exprel2(double y)
{
    if (std::abs(y) < 1e-3) {
        return 0.5 + y * (1.0 / 6.0 + y * (1.0 / 24.0 + y / 120.0));
    }
    return (std::expm1(y) - y) / (y * y);
}

double transition_phi(const ContactParams& params, DeltaValue delta, double s)
{
    if (!(s > 0.0)) {
        throw_invalid("transition function needs s > 0");
    }
    const double log_s = std::log(s);
    const double d     = delta.near_zero() ? 0.0 : delta.value();
    // (e^u - 1)/(e^u + 1) = tanh(u/2) with u = eps (s^delta - 1)/delta
    const double u = params.epsilon * log_s * exprel(d * log_s);
    return params.mu * std::tanh(0.5 * u);
}

double scaled_phi(const ContactParams& params, DeltaValue delta, double s)
{
    if (!(s > 0.0)) {
        throw_invalid("transition function needs s > 0");
    }
    const double log_s = std::log(s);
    if (delta.near_zero()) {
        return 0.5 * params.mu * log_s;
    }
    return 0.5 * params.mu * log_s * exprel(delta.value() * log_s);
}

double kernel_B(DeltaValue delta, double x)
{
    if (!(x > 0.0)) {
        throw_invalid("interaction kernel is evaluated only at x > 0");
    }
    return std::pow(x, -delta.alpha());
}

FpCoefficients fp_coefficients(const ContactParams& params, DeltaValue delta, double m, const ControlLaw& control,
                               double x)
{
    require_positive_mean(m);
    if (x < 0.0) {
        throw_invalid("coefficients are defined for x >= 0");
    }
    const double alpha = delta.alpha();
    FpCoefficients c;
    if (x == 0.0) {
        // continuous extension at the origin
        if (!delta.near_zero()) {
            const double d = delta.value();
            c.drift = params.mu / (2.0 * d) * (std::pow(0.0, 1.0 - alpha + d) * std::pow(m, -d) - std::pow(0.0, 1.0 - alpha));
        }
    }
    else if (delta.near_zero()) {
        c.drift = 0.5 * params.mu * std::sqrt(x) * std::log(x / m);
    }
    else {
        const double log_ratio = std::log(x / m);
        c.drift = 0.5 * params.mu * std::pow(x, 1.0 - alpha) * log_ratio * exprel(delta.value() * log_ratio);
    }
    if (control.active()) {
        c.drift += params.tau / control.nu * control.s2(x) * (x - control.x_target);
    }
    c.diffusion = 0.5 * params.sigma2 * std::pow(x, 2.0 - alpha);
    return c;
}

double diffusion_derivative(const ContactParams& params, DeltaValue delta, double x)
{
    const double alpha = delta.alpha();
    return 0.5 * params.sigma2 * (2.0 - alpha) * std::pow(x, 1.0 - alpha);
}

double log_equilibrium(const ContactParams& params, DeltaValue delta, double m, double x)
{
    // a ln x - (lambda/delta^2)(x/m)^delta with a = lambda/delta - 2 + alpha, rewritten around
    // L = ln(x/m) so that the delta -> 0 limit is exact.
    const double lambda    = params.lambda();
    const double log_ratio = std::log(x / m);
    const double d         = delta.near_zero() ? 0.0 : delta.value();
    return (delta.alpha() - 2.0) * std::log(x) - lambda * log_ratio * log_ratio * exprel2(d * log_ratio);
}

namespace
{

std::vector<double> equilibrium_log_values(const ContactParams& params, DeltaValue delta, double m, const Grid1D& grid,
                                           std::size_t& first)
{
    std::vector<double> log_f(grid.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        log_f[i] = log_equilibrium(params, delta, m, grid.x(i));
    }
    first = 1;
    // exponent of x vanishing for delta > 0 leaves a finite, nonzero value at the origin
    if (!delta.near_zero() && delta.value() > 0.0) {
        const double lambda = params.lambda();
        const double d      = delta.value();
        const double a      = lambda / d - 2.0 + delta.alpha();
        if (std::abs(a) < 1e-14) {
            log_f[0] = lambda / (d * d) - lambda / d * std::log(m);
            first    = 0;
        }
    }
    return log_f;
}

void check_closed_form_mass(const ContactParams& params, DeltaValue delta, double m, const Grid1D& grid)
{
    if (delta.value() != 1.0 && delta.value() != -1.0) {
        return;
    }
    std::vector<double> closed(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        closed[i] = delta.value() > 0 ? gamma_density(params.lambda(), m, grid.x(i))
                                      : inverse_gamma_density(params.lambda(), m, grid.x(i));
    }
    const double mass = trapezoid(closed, grid);
    if (std::abs(mass - 1.0) > 1e-2) {
        throw_numerical("grid too coarse or too short to normalize the equilibrium (closed-form mass " +
                        std::to_string(mass) + ")");
    }
}

} // namespace

std::vector<double> equilibrium_density(const ContactParams& params, DeltaValue delta, double m, const Grid1D& grid)
{
    params.validate();
    require_positive_mean(m);
    check_closed_form_mass(params, delta, m, grid);
    std::size_t first = 1;
    auto log_f        = equilibrium_log_values(params, delta, m, grid, first);
    return normalize_log_density(std::move(log_f), first, grid);
}

std::vector<double> control_potential(DeltaValue delta, const ControlLaw& control, const Grid1D& grid)
{
    std::vector<double> pot(grid.size(), 0.0);
    const auto& rule   = cell_rule();
    const double alpha = delta.alpha();
    const double h     = grid.dx();
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const double mid = grid.x_half(i);
        double acc       = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double y = mid + 0.5 * h * rule.nodes[k];
            acc += rule.weights[k] * std::pow(y, alpha - 2.0) * control.s2(y) * (y - control.x_target);
        }
        pot[i + 1] = pot[i] + 0.5 * h * acc;
    }
    return pot;
}

std::vector<double> controlled_equilibrium_density(const ContactParams& params, DeltaValue delta, double m,
                                                   const ControlLaw& control, const Grid1D& grid)
{
    params.validate();
    require_positive_mean(m);
    if (!control.active()) {
        return equilibrium_density(params, delta, m, grid);
    }
    if (!(control.nu > 0.0)) {
        throw_invalid("control penalization nu must be positive");
    }
    std::size_t first = 1;
    auto log_f        = equilibrium_log_values(params, delta, m, grid, first);
    const auto pot    = control_potential(delta, control, grid);
    const double coef = 2.0 * params.tau / (params.sigma2 * control.nu);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        log_f[i] -= coef * pot[i];
    }
    return normalize_log_density(std::move(log_f), 1, grid);
}

double gamma_density(double lambda, double m, double x)
{
    if (x <= 0.0) {
        return lambda == 1.0 ? lambda / m : 0.0;
    }
    const double log_f = lambda * std::log(lambda / m) - std::lgamma(lambda) + (lambda - 1.0) * std::log(x) -
                         lambda * x / m;
    return std::exp(log_f);
}

double inverse_gamma_density(double lambda, double m, double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    const double log_f = (lambda + 1.0) * std::log(lambda * m) - std::lgamma(lambda + 1.0) -
                         (2.0 + lambda) * std::log(x) - lambda * m / x;
    return std::exp(log_f);
}

double lambda_factor(double delta, double lambda)
{
    if (!(lambda > 0.0)) {
        throw_invalid("lambda must be positive");
    }
    if (delta <= -1.0 && lambda <= 1.0) {
        throw_invalid("second moment of the inverse-Gamma equilibrium needs lambda > 1");
    }
    if (lambda + delta <= 0.0) {
        throw_invalid("lambda + delta must be positive");
    }
    return std::pow((lambda + delta) / lambda, delta);
}

} // namespace kec
