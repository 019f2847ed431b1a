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

#ifndef KEC_FPSOLVE_H
#define KEC_FPSOLVE_H

#include "kec/contact.h"
#include "kec/control.h"
#include "kec/grid.h"

#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace kec
{

/// Interface weighting of the drift flux.
enum class FluxScheme
{
    Central, ///< A_{i+1/2} (f_i + f_{i+1})/2 + (D_{i+1} f_{i+1} - D_i f_i)/dx
    ChangCooper, ///< structure preserving: positivity and exact discrete equilibria
};

/// Chang-Cooper weight 1/w - 1/(e^w - 1); 1/2 at w = 0.
double chang_cooper_weight(double w);

/**
 * Interface weights: 1/2 for Central, chang_cooper_weight(dx A/D) for ChangCooper.
 * A_half and D_half are the drift and diffusion at the half points.
 */
std::vector<double> flux_weights(std::span<const double> drift_half, std::span<const double> diffusion_half, double dx,
                                 FluxScheme scheme);

inline constexpr double fp_mass_floor = 1e-14;

/// Mass and per-mass moments. mean/second are empty when the mass is below the floor.
struct Moments {
    double rho = 0.0;
    std::optional<double> mean;
    std::optional<double> second;
};

Moments moments(std::span<const double> f, const Grid1D& grid, double mass_floor = fp_mass_floor);

/**
 * One implicit Euler step of d_t f = (1/tau) d_x [A f + d_x(D f)] with the mean frozen
 * at m_frozen and no-flux boundaries. Boundary nodes own half cells, so the trapezoid
 * mass is conserved exactly.
 */
std::vector<double> fp_step(std::span<const double> f, const Grid1D& grid, const ContactParams& params,
                            DeltaValue delta, double m_frozen, const ControlLaw& control, double dt,
                            FluxScheme scheme = FluxScheme::ChangCooper);

enum class MeanTreatment
{
    Lagged, ///< mean taken from the field at the start of each step
    FixedPoint, ///< mean iterated to self-consistency within each step
};

struct FpRunOptions {
    FluxScheme scheme           = FluxScheme::ChangCooper;
    MeanTreatment mean          = MeanTreatment::Lagged;
    std::optional<double> fixed_mean; ///< when set, the drift uses this mean throughout
    int max_refine              = 5;
    double refine_tol           = 1e-10;
    std::ostream* trace         = nullptr; ///< optional per-step CSV t,rho,m,m2
};

/// Advances f by n_steps steps of size dt.
std::vector<double> fp_advance(std::vector<double> f, const Grid1D& grid, const ContactParams& params,
                               DeltaValue delta, const ControlLaw& control, double dt, std::size_t n_steps,
                               const FpRunOptions& options = {});

/// Writes the CSV header t,rho,m,m2 used by fp_advance traces.
void write_trace_header(std::ostream& os);

} // namespace kec

#endif // KEC_FPSOLVE_H
