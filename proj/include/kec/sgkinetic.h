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

#ifndef KEC_SGKINETIC_H
#define KEC_SGKINETIC_H

#include "kec/compartment.h"
#include "kec/contact.h"
#include "kec/control.h"
#include "kec/epi.h"
#include "kec/grid.h"
#include "kec/uq.h"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

namespace kec
{

struct SgTables;

/**
 * gPC coefficients of the four contact densities on a grid. Each compartment stores
 * N*(M+1) values laid out node by node: coeff(J, h, i) = field(J)[i*(M+1) + h].
 */
class KineticState
{
public:
    KineticState(std::shared_ptr<const GpcBasis> basis, const Grid1D& grid);

    const GpcBasis& basis() const
    {
        return *m_basis;
    }
    std::shared_ptr<const GpcBasis> basis_ptr() const
    {
        return m_basis;
    }
    const Grid1D& grid() const
    {
        return m_grid;
    }
    std::size_t num_modes() const
    {
        return m_basis->num_modes();
    }

    std::vector<double>& field(Compartment c)
    {
        return m_fields[c];
    }
    const std::vector<double>& field(Compartment c) const
    {
        return m_fields[c];
    }
    double coeff(Compartment c, std::size_t h, std::size_t i) const
    {
        return m_fields[c][i * num_modes() + h];
    }
    double& coeff(Compartment c, std::size_t h, std::size_t i)
    {
        return m_fields[c][i * num_modes() + h];
    }

    /// Mode h of compartment c over the grid.
    std::vector<double> mode(Compartment c, std::size_t h) const;
    /// f^M(z_q, x) over the grid.
    std::vector<double> density_at_node(Compartment c, std::size_t q) const;
    /// f^M(z, x) over the grid at an arbitrary z.
    std::vector<double> density_at(Compartment c, double z) const;

    /// int x^r fhat_h dx for every mode h (r in {0,1,2}).
    std::vector<double> modal_moment(Compartment c, int r) const;
    /// int x^r f^M(z_q, x) dx at every quadrature node.
    std::vector<double> nodal_moment(Compartment c, int r) const;

    /// Powers of x at the nodes and half points for every quadrature node (shared, immutable).
    const SgTables& tables() const
    {
        return *m_tables;
    }

    double t = 0.0;
    /// Last valid mean per compartment and node, used when a nodal mass vanishes.
    PerCompartment<std::vector<double>> last_mean;
    /// Number of nodal values clipped to zero so far.
    std::size_t clip_count = 0;

private:
    std::shared_ptr<const GpcBasis> m_basis;
    Grid1D m_grid;
    PerCompartment<std::vector<double>> m_fields;
    std::shared_ptr<const SgTables> m_tables;
};

/**
 * Deterministic Gamma initial data: mode 0 of compartment J is rho_J times the Gamma density
 * with shape lambda and mean m_J, all higher modes vanish.
 */
KineticState gamma_initial_state(std::shared_ptr<const GpcBasis> basis, const Grid1D& grid,
                                 const PerCompartment<double>& rho, const PerCompartment<double>& mean, double lambda);

struct KineticSetup {
    ContactParams contact;
    EpiParams epi;
    ControlSpec control      = ControlSpec::off();
    bool clip_negative       = true;
    double tol_neg_rel       = 1e-10;
    double mass_floor        = 1e-14;
    unsigned jobs            = 1;
    /// A rejected exchange step is retried as two half steps, at most this many times deep.
    int max_exchange_halvings = 8;
};

/// Galerkin drift matrices at the half points and diffusion matrices at the nodes.
struct SgOperators {
    std::vector<Eigen::MatrixXd> drift_half;
    std::vector<Eigen::MatrixXd> diffusion_node;
};

/// Nodal means m_J(z_q) of a compartment, falling back to the last valid mean where the mass vanishes.
std::vector<double> nodal_means(const KineticState& state, Compartment c, double mass_floor);

/**
 * Galerkin matrices sum_q w_q A(z_q, x; m(z_q)) Psi_h Psi_k at x_{i+1/2} and
 * sum_q w_q D(z_q, x) Psi_h Psi_k at x_i, the drift including the control term.
 */
SgOperators assemble_sg_operators(const KineticState& state, Compartment c, const KineticSetup& setup,
                                  std::span<const double> means);

/// Implicit Euler step of the projected contact and control dynamics for every compartment.
void sg_contact_step(KineticState& state, const KineticSetup& setup, double dt);

/// Explicit Euler step of the projected epidemic exchange.
void epidemic_step(KineticState& state, const EpiParams& epi, double dt, double tol_neg_rel = 1e-10);

/// True when the explicit exchange step keeps every non-negligible susceptible value nonnegative.
bool epidemic_step_admissible(const KineticState& state, const EpiParams& epi, double dt, double tol_neg_rel = 1e-10);

/// Statistics of one compartment over z.
struct CompartmentStats {
    MeanVariance rho;
    MeanVariance mean;
};

PerCompartment<CompartmentStats> kinetic_statistics(const KineticState& state, double mass_floor = 1e-14);

struct KineticRunOptions {
    double dt            = 0.1;
    double t_final       = 1.0;
    std::size_t stride   = 10;
    bool epidemic        = true;
};

/// Called at t = 0 and every stride steps, and at the final time.
using KineticObserver = std::function<void(const KineticState&)>;

/// Alternates contact and epidemic steps up to t_final.
void run_kinetic(KineticState& state, const KineticSetup& setup, const KineticRunOptions& options,
                 const KineticObserver& observer = {});

/// Header t,J,stat,value and rows for one output time.
void write_stats_header(std::ostream& os);
void write_stats_rows(std::ostream& os, const KineticState& state, double mass_floor = 1e-14);

/// Snapshot x,mode,J,value of every mode of every compartment.
void write_snapshot(std::ostream& os, const KineticState& state);

struct ConvergenceStudy {
    std::vector<int> orders;
    std::vector<double> errors;
};

/**
 * L2-in-z error of the first moment at t_final of contact-only runs of order M against a
 * reference order, starting from the deterministic Gamma with mean m0.
 */
ConvergenceStudy sg_convergence_study(const UncertaintyLaw& law, const ContactParams& contact, const Grid1D& grid,
                                      double m0, double dt, double t_final, std::span<const int> orders, int reference,
                                      bool clip_negative = true);

} // namespace kec

#endif // KEC_SGKINETIC_H
