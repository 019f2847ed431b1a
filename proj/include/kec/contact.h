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

#ifndef KEC_CONTACT_H
#define KEC_CONTACT_H

#include "kec/control.h"
#include "kec/grid.h"

#include <cmath>
#include <vector>

namespace kec
{

/// Contact-formation parameters. lambda = mu / sigma2.
struct ContactParams {
    double mu      = 0.5;
    double sigma2  = 0.1;
    double tau     = 1.0;
    double epsilon = 1.0;

    double lambda() const
    {
        return mu / sigma2;
    }
    void validate() const;
};

/// |delta| below this triggers the delta -> 0 limit branches.
inline constexpr double delta_zero_threshold = 1e-6;

/// Tail parameter delta in [-1, 1] and the kernel exponent alpha = (1 + delta)/2.
class DeltaValue
{
public:
    explicit DeltaValue(double delta);

    double value() const
    {
        return m_delta;
    }
    double alpha() const
    {
        return 0.5 * (1.0 + m_delta);
    }
    bool near_zero() const
    {
        return std::abs(m_delta) < delta_zero_threshold;
    }

private:
    double m_delta;
};

/// (e^y - 1)/y, equal to 1 at y = 0.
double exprel(double y);

/// (e^y - 1 - y)/y^2, equal to 1/2 at y = 0.
double exprel2(double y);

/// mu (e^{eps(s^delta-1)/delta} - 1)/(e^{eps(s^delta-1)/delta} + 1).
double transition_phi(const ContactParams& params, DeltaValue delta, double s);

/// Small-epsilon transition function (mu/2delta)(s^delta - 1); (mu/2) ln s at delta = 0.
double scaled_phi(const ContactParams& params, DeltaValue delta, double s);

/// Interaction kernel B(x) = x^{-alpha(delta)}.
double kernel_B(DeltaValue delta, double x);

struct FpCoefficients {
    double drift     = 0.0;
    double diffusion = 0.0;
};

/**
 * Drift and diffusion of the Fokker-Planck operator in flux form
 * d_x [A f + d_x (D f)], with A = (mu/2delta) x^{1-alpha} ((x/m)^delta - 1) and
 * D = (sigma2/2) x^{2-alpha}. An active control adds (tau/nu) S^2(x) (x - x_T) to A,
 * so that (1/tau) times this operator equals the contact plus control dynamics.
 */
FpCoefficients fp_coefficients(const ContactParams& params, DeltaValue delta, double m, const ControlLaw& control,
                               double x);

/// d/dx of the diffusion coefficient D(x).
double diffusion_derivative(const ContactParams& params, DeltaValue delta, double x);

/// Unnormalized log of the uncontrolled equilibrium, up to an x-independent constant. x > 0.
double log_equilibrium(const ContactParams& params, DeltaValue delta, double m, double x);

/// Generalized Gamma equilibrium normalized to unit mass on the grid (trapezoid).
std::vector<double> equilibrium_density(const ContactParams& params, DeltaValue delta, double m, const Grid1D& grid);

/// Equilibrium of the contact plus control operator, normalized to unit mass on the grid.
std::vector<double> controlled_equilibrium_density(const ContactParams& params, DeltaValue delta, double m,
                                                   const ControlLaw& control, const Grid1D& grid);

/**
 * Cumulative integral int_{dx}^{x_i} y^{alpha-2} S^2(y) (y - x_T) dy at every node (zero at
 * nodes 0 and 1), by per-cell Gauss-Legendre quadrature.
 */
std::vector<double> control_potential(DeltaValue delta, const ControlLaw& control, const Grid1D& grid);

/// Closed-form Gamma density with shape lambda and mean m.
double gamma_density(double lambda, double m, double x);

/// Closed-form inverse-Gamma density with shape lambda + 1 and scale lambda m.
double inverse_gamma_density(double lambda, double m, double x);

/// Lambda_delta = ((lambda + delta)/lambda)^delta, the ratio m2/m^2 at equilibrium for delta = +-1.
double lambda_factor(double delta, double lambda);

} // namespace kec

#endif // KEC_CONTACT_H
