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

#ifndef KEC_MACRO_H
#define KEC_MACRO_H

#include "kec/compartment.h"
#include "kec/control.h"
#include "kec/epi.h"
#include "kec/uq.h"

#include <optional>
#include <ostream>
#include <vector>

namespace kec
{

/// Mass fractions and mean contacts of the closed macroscopic system.
struct MacroState {
    PerCompartment<double> rho{};
    PerCompartment<double> m{};
    double t = 0.0;

    double total_mass() const;
};

/// Everything the right-hand side needs besides the state.
struct MacroModel {
    EpiParams epi;
    double lambda_factor = 1.0; ///< closure m2 = Lambda m^2
    ControlSpec control  = ControlSpec::off();
    std::optional<double> clamp_mI; ///< hold m_I fixed (calibration mode)
    double mass_floor = 1e-12;

    void validate() const;
};

/// Time derivative of (rho, m). The t field of the result is unused.
MacroState macro_rhs(const MacroState& state, const MacroModel& model);

/// Upper bound on the local stiffness, used to choose RK4 substeps.
double macro_stiffness(const MacroState& state, const MacroModel& model);

struct MacroRunOptions {
    double dt      = 0.05;
    double t_final = 1.0;
    int stride     = 1; ///< record every stride steps; the final state is always recorded
};

/**
 * Classical RK4. A step whose stiffness exceeds 1/dt is split into equal substeps so that
 * every substep satisfies h * rate <= 1. Throws a numerical error on NaN.
 */
std::vector<MacroState> rk4_integrate(const MacroState& initial, const MacroModel& model,
                                      const MacroRunOptions& options);

/// One trajectory per Bernoulli atom plus the statistics over z.
struct MacroEnsemble {
    std::vector<double> deltas;
    std::vector<double> weights;
    std::vector<std::vector<MacroState>> atoms; ///< empty for zero-weight atoms
    std::vector<MacroState> mean;
    std::vector<MacroState> variance;
};

/**
 * Integrates the deterministic system for each delta atom of a Bernoulli law with
 * Lambda_delta from the equilibrium closure, and combines the atoms with their weights.
 */
MacroEnsemble run_macro_uncertain(const MacroState& initial, const EpiParams& epi, double lambda,
                                  const UncertaintyLaw& law, const ControlSpec& control,
                                  const MacroRunOptions& options, std::optional<double> clamp_mI = std::nullopt,
                                  unsigned jobs = 1);

/// t,rho_S,rho_E,rho_I,rho_R,m_S,m_E,m_I,m_R
void write_macro_header(std::ostream& os);
void write_macro_rows(std::ostream& os, const std::vector<MacroState>& states);

} // namespace kec

#endif // KEC_MACRO_H
