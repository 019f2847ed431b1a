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

#include "kec/control.h"
#include "kec/error.h"

#include <cmath>

namespace kec
{

double ControlLaw::s2(double x) const
{
    switch (selective) {
    case Selective::Off:
        return 0.0;
    case Selective::Uniform:
        return 1.0;
    case Selective::SqrtX:
        return x;
    }
    return 0.0;
}

ControlSpec ControlSpec::off()
{
    return ControlSpec{};
}

ControlSpec ControlSpec::shared_target(Selective s, double x_target, double nu)
{
    ControlSpec spec;
    spec.selective = s;
    spec.x_target  = {{x_target, x_target, x_target, x_target}};
    spec.nu        = nu;
    spec.validate();
    return spec;
}

void ControlSpec::validate() const
{
    for (double xt : x_target.values) {
        if (!(xt > 0.0)) {
            throw_invalid("control targets must be positive");
        }
    }
    if (selective != Selective::Off && !(nu > 0.0)) {
        throw_invalid("control penalization nu must be positive");
    }
}

ControlLaw ControlSpec::for_compartment(Compartment c) const
{
    return ControlLaw{selective, x_target[c], nu};
}

double optimal_control(double x, double x_target, double penalization, double eps_tau, double s_at_x)
{
    if (!(penalization > 0.0)) {
        throw_invalid("penalization must be positive");
    }
    if (s_at_x < 0.0 || eps_tau < 0.0) {
        throw_invalid("selective function and eps*tau must be nonnegative");
    }
    return -std::sqrt(eps_tau) * s_at_x / (penalization + eps_tau * s_at_x * s_at_x) * (x - x_target);
}

double controlled_update(double x, double x_target, double penalization, double eps_tau, double s_at_x)
{
    return x + std::sqrt(eps_tau) * s_at_x * optimal_control(x, x_target, penalization, eps_tau, s_at_x);
}

double macro_control_G(Selective s, double nu, double x_target, double m, double lambda_factor)
{
    switch (s) {
    case Selective::Off:
        return 0.0;
    case Selective::Uniform:
        return (x_target - m) / nu;
    case Selective::SqrtX:
        return m * (x_target - lambda_factor * m) / nu;
    }
    return 0.0;
}

double damping_index(std::span<const double> f, const Grid1D& grid, double x_target)
{
    return trapezoid_weighted(f, grid, [x_target](double x) {
        return (x - x_target) * (x - x_target);
    });
}

RestrictionCost restriction_cost(const PerCompartment<std::vector<double>>& densities, const Grid1D& grid,
                                 const ControlSpec& spec, bool include_infected)
{
    RestrictionCost cost;
    for (auto c : all_compartments) {
        const auto law       = spec.for_compartment(c);
        const double inv_nu  = law.active() ? 1.0 / law.nu : 0.0;
        cost.per_compartment[c] = 0.5 * trapezoid_weighted(densities[c], grid, [&](double x) {
                                      return (1.0 + law.s2(x) * inv_nu) * (x - law.x_target) * (x - law.x_target);
                                  });
        if (c != Compartment::I || include_infected) {
            cost.total += cost.per_compartment[c];
        }
    }
    return cost;
}

} // namespace kec
