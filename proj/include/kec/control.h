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

#ifndef KEC_CONTROL_H
#define KEC_CONTROL_H

#include "kec/compartment.h"
#include "kec/grid.h"

#include <span>
#include <vector>

namespace kec
{

/// Selective function S(x) of the restriction policy.
enum class Selective
{
    Off, ///< S = 0
    Uniform, ///< S = 1
    SqrtX, ///< S = sqrt(x)
};

/// Control kernel Bbar. Only the Maxwellian kernel (Bbar = 1) is supported.
enum class ControlKernel
{
    Maxwellian,
};

/// The control acting on a single compartment.
struct ControlLaw {
    Selective selective = Selective::Off;
    double x_target     = 1.0;
    double nu           = 1.0;

    bool active() const
    {
        return selective != Selective::Off;
    }
    /// S(x)^2
    double s2(double x) const;
};

/// Control settings for the four compartments.
struct ControlSpec {
    Selective selective = Selective::Off;
    PerCompartment<double> x_target{{5.0, 5.0, 5.0, 5.0}};
    double nu            = 1.0;
    ControlKernel kernel = ControlKernel::Maxwellian;

    static ControlSpec off();
    static ControlSpec shared_target(Selective s, double x_target, double nu);

    void validate() const;
    ControlLaw for_compartment(Compartment c) const;
};

/// Optimal control for the quadratic cost: -(sqrt(eps*tau) S / (penalization + eps*tau S^2)) (x - x_T).
double optimal_control(double x, double x_target, double penalization, double eps_tau, double s_at_x);

/// Post-interaction state x'' = x + sqrt(eps*tau) S u*.
double controlled_update(double x, double x_target, double penalization, double eps_tau, double s_at_x);

/**
 * Contribution of the control to dm/dt in the closed macroscopic system:
 * Uniform -> (x_T - m)/nu, SqrtX -> m (x_T - Lambda m)/nu, Off -> 0.
 */
double macro_control_G(Selective s, double nu, double x_target, double m, double lambda_factor);

/// G_nu = int (x - x_T)^2 f(x) dx (trapezoid).
double damping_index(std::span<const double> f, const Grid1D& grid, double x_target);

struct RestrictionCost {
    PerCompartment<double> per_compartment;
    double total = 0.0; ///< J_S + J_E + J_R, plus J_I when requested
};

/**
 * J_H = 1/2 int (1 + S^2(x)/nu) (x - x_T)^2 f_H(x) dx for each compartment, with f_H the
 * equilibrium density scaled to the compartment mass.
 */
RestrictionCost restriction_cost(const PerCompartment<std::vector<double>>& densities, const Grid1D& grid,
                                 const ControlSpec& spec, bool include_infected = false);

} // namespace kec

#endif // KEC_CONTROL_H
