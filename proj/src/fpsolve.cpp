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

#include "kec/fpsolve.h"
#include "kec/block_tridiag.h"
#include "kec/error.h"
#include "kec/uq.h"

#include <cmath>
#include <string>

namespace kec
{

namespace
{

const QuadratureRule& cell_rule()
{
    static const QuadratureRule rule = gauss_legendre(8);
    return rule;
}

// Bernoulli function w/(e^w - 1)
double bernoulli_fn(double w)
{
    if (std::abs(w) < 1e-8) {
        return 1.0 - 0.5 * w;
    }
    return w / std::expm1(w);
}

// Flux through interface i+1/2 written as a_i f_i + b_i f_{i+1}.
struct InterfaceFlux {
    std::vector<double> a;
    std::vector<double> b;
};

InterfaceFlux central_flux(const Grid1D& grid, const ContactParams& params, DeltaValue delta, double m,
                           const ControlLaw& control)
{
    const std::size_t n = grid.size();
    const double dx     = grid.dx();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = fp_coefficients(params, delta, m, control, grid.x(i)).diffusion;
    }
    InterfaceFlux flux{std::vector<double>(n - 1), std::vector<double>(n - 1)};
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double drift = fp_coefficients(params, delta, m, control, grid.x_half(i)).drift;
        flux.a[i]          = 0.5 * drift - diff[i] / dx;
        flux.b[i]          = 0.5 * drift + diff[i + 1] / dx;
    }
    return flux;
}

// w_i = int_{x_i}^{x_{i+1}} (A + D')/D dy, so that f_{i+1}/f_i = e^{-w_i} at equilibrium.
std::vector<double> chang_cooper_exponents(const Grid1D& grid, const ContactParams& params, DeltaValue delta, double m,
                                           const ControlLaw& control)
{
    const auto& rule = cell_rule();
    const double dx  = grid.dx();
    std::vector<double> w(grid.size() - 1);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double mid = grid.x_half(i);
        double acc       = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double y = mid + 0.5 * dx * rule.nodes[k];
            const auto c   = fp_coefficients(params, delta, m, control, y);
            acc += rule.weights[k] * (c.drift + diffusion_derivative(params, delta, y)) / c.diffusion;
        }
        w[i] = 0.5 * dx * acc;
    }
    return w;
}

InterfaceFlux chang_cooper_flux(const Grid1D& grid, const ContactParams& params, DeltaValue delta, double m,
                                const ControlLaw& control)
{
    const std::size_t n = grid.size();
    const double dx     = grid.dx();
    const auto w        = chang_cooper_exponents(grid, params, delta, m, control);
    InterfaceFlux flux{std::vector<double>(n - 1), std::vector<double>(n - 1)};
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d_half = fp_coefficients(params, delta, m, control, grid.x_half(i)).diffusion;
        // C~ (lambda f_i + (1 - lambda) f_{i+1}) + D (f_{i+1} - f_i)/dx in Bernoulli-function form
        flux.a[i] = -d_half / dx * bernoulli_fn(w[i]);
        flux.b[i] = d_half / dx * bernoulli_fn(-w[i]);
    }
    return flux;
}

} // namespace

double chang_cooper_weight(double w)
{
    if (std::abs(w) < 1e-6) {
        return 0.5 - w / 12.0;
    }
    return 1.0 / w - 1.0 / std::expm1(w);
}

std::vector<double> flux_weights(std::span<const double> drift_half, std::span<const double> diffusion_half, double dx,
                                 FluxScheme scheme)
{
    if (drift_half.size() != diffusion_half.size()) {
        throw_invalid("drift and diffusion arrays differ in length");
    }
    std::vector<double> weights(drift_half.size(), 0.5);
    if (scheme == FluxScheme::Central) {
        return weights;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(diffusion_half[i] > 0.0)) {
            throw_invalid("Chang-Cooper weights need positive diffusion at interior half points");
        }
        weights[i] = chang_cooper_weight(dx * drift_half[i] / diffusion_half[i]);
    }
    return weights;
}

Moments moments(std::span<const double> f, const Grid1D& grid, double mass_floor)
{
    Moments mom;
    mom.rho = trapezoid_moment(f, grid, 0);
    if (mom.rho > mass_floor) {
        mom.mean   = trapezoid_moment(f, grid, 1) / mom.rho;
        mom.second = trapezoid_moment(f, grid, 2) / mom.rho;
    }
    return mom;
}

std::vector<double> fp_step(std::span<const double> f, const Grid1D& grid, const ContactParams& params,
                            DeltaValue delta, double m_frozen, const ControlLaw& control, double dt, FluxScheme scheme)
{
    if (f.size() != grid.size()) {
        throw_invalid("density size does not match grid");
    }
    if (!(dt > 0.0)) {
        throw_invalid("time step must be positive");
    }
    if (!(m_frozen > 0.0)) {
        throw_invalid("frozen mean must be positive");
    }
    const std::size_t n = grid.size();
    const auto flux     = scheme == FluxScheme::Central ? central_flux(grid, params, delta, m_frozen, control)
                                                        : chang_cooper_flux(grid, params, delta, m_frozen, control);

    std::vector<double> lower(n, 0.0), diag(n, 1.0), upper(n, 0.0);
    const double k_interior = dt / (params.tau * grid.dx());
    for (std::size_t i = 0; i < n; ++i) {
        const double k = (i == 0 || i + 1 == n) ? 2.0 * k_interior : k_interior;
        if (i + 1 < n) {
            diag[i] -= k * flux.a[i];
            upper[i] = -k * flux.b[i];
        }
        if (i > 0) {
            diag[i] += k * flux.b[i - 1];
            lower[i] = k * flux.a[i - 1];
        }
    }
    std::vector<double> out(f.begin(), f.end());
    solve_tridiagonal(lower, diag, upper, out);

    // Rebuild the update from the implicit fluxes so that the mass balance telescopes
    // exactly; the matrix entries can reach dt/(tau dx) times the coefficients.
    std::vector<double> flux_half(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        flux_half[i] = flux.a[i] * out[i] + flux.b[i] * out[i + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double k  = (i == 0 || i + 1 == n) ? 2.0 * k_interior : k_interior;
        const double fr = i + 1 < n ? flux_half[i] : 0.0;
        const double fl = i > 0 ? flux_half[i - 1] : 0.0;
        const double v  = f[i] + k * (fr - fl);
        // keep the solved value where the reconstruction only adds round-off below zero
        out[i] = (v < 0.0 && out[i] >= 0.0) ? out[i] : v;
    }
    return out;
}

void write_trace_header(std::ostream& os)
{
    os << "t,rho,m,m2\n";
}

std::vector<double> fp_advance(std::vector<double> f, const Grid1D& grid, const ContactParams& params,
                               DeltaValue delta, const ControlLaw& control, double dt, std::size_t n_steps,
                               const FpRunOptions& options)
{
    auto current_mean = [&](std::span<const double> g) {
        const auto mom = moments(g, grid);
        if (!mom.mean || !(*mom.mean > 0.0)) {
            throw_numerical("mean of the density is undefined or nonpositive");
        }
        return *mom.mean;
    };
    auto trace = [&](double t, std::span<const double> g) {
        if (options.trace == nullptr) {
            return;
        }
        const auto mom = moments(g, grid);
        *options.trace << t << ',' << mom.rho << ',' << mom.mean.value_or(std::nan("")) << ','
                       << mom.second.value_or(std::nan("")) << '\n';
    };

    trace(0.0, f);
    for (std::size_t step = 0; step < n_steps; ++step) {
        double m = options.fixed_mean ? *options.fixed_mean : current_mean(f);
        auto next = fp_step(f, grid, params, delta, m, control, dt, options.scheme);
        if (!options.fixed_mean && options.mean == MeanTreatment::FixedPoint) {
            // secant on h(m) = mean(step(m)) - m; plain iteration stalls when tau << dt
            double m_prev = m, h_prev = current_mean(next) - m;
            m             = m + h_prev;
            for (int it = 0; it < options.max_refine && std::abs(h_prev) > options.refine_tol * m_prev; ++it) {
                next           = fp_step(f, grid, params, delta, m, control, dt, options.scheme);
                const double h = current_mean(next) - m;
                if (std::abs(h) <= options.refine_tol * m || h == h_prev) {
                    break;
                }
                const double m_next = m - h * (m - m_prev) / (h - h_prev);
                m_prev = m, h_prev = h;
                m      = m_next > 0.0 ? m_next : 0.5 * m;
            }
        }
        f = std::move(next);
        trace(static_cast<double>(step + 1) * dt, f);
    }
    return f;
}

} // namespace kec
