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

#include "kec/sgkinetic.h"
#include "kec/block_tridiag.h"
#include "kec/error.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace kec
{

/// x^{(1-delta)/2} and x^delta at the half points, x^{(3-delta)/2} at the nodes; row i, column q.
struct SgTables {
    Eigen::MatrixXd p0_half;
    Eigen::MatrixXd pd_half;
    Eigen::MatrixXd diff_node;
    /// sum_q w_q x_i^{(3-delta_q)/2} Psi_h Psi_k, cached when small enough
    std::vector<Eigen::MatrixXd> gram_diff_node;
};

namespace
{

constexpr double diffusion_cache_limit = 2e7;

std::shared_ptr<const SgTables> build_tables(const GpcBasis& basis, const Grid1D& grid)
{
    auto t               = std::make_shared<SgTables>();
    const std::size_t n  = grid.size();
    const std::size_t nq = basis.num_nodes();
    const std::size_t nm = basis.num_modes();
    t->p0_half.resize(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(n - 1));
    t->pd_half.resizeLike(t->p0_half);
    t->diff_node.resize(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(n));
    for (std::size_t q = 0; q < nq; ++q) {
        const double d = basis.deltas()[q];
        for (std::size_t i = 0; i < n; ++i) {
            t->diff_node(q, i) = std::pow(grid.x(i), 1.5 - 0.5 * d);
            if (i + 1 < n) {
                t->p0_half(q, i) = std::pow(grid.x_half(i), 0.5 * (1.0 - d));
                t->pd_half(q, i) = std::pow(grid.x_half(i), d);
            }
        }
    }
    if (static_cast<double>(n * nm * nm) <= diffusion_cache_limit) {
        Eigen::MatrixXd psi(nm, nq);
        for (std::size_t h = 0; h < nm; ++h) {
            for (std::size_t q = 0; q < nq; ++q) {
                psi(h, q) = basis.psi(h, q);
            }
        }
        Eigen::VectorXd w(nq);
        t->gram_diff_node.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t q = 0; q < nq; ++q) {
                w[q] = basis.weights()[q] * t->diff_node(q, i);
            }
            t->gram_diff_node[i] = psi * w.asDiagonal() * psi.transpose();
        }
    }
    return t;
}

// below this |delta| the drift goes through the stable exprel form
constexpr double power_form_threshold = 1e-3;

Eigen::MatrixXd psi_matrix(const GpcBasis& basis)
{
    Eigen::MatrixXd psi(basis.num_modes(), basis.num_nodes());
    for (std::size_t h = 0; h < basis.num_modes(); ++h) {
        for (std::size_t q = 0; q < basis.num_nodes(); ++q) {
            psi(h, q) = basis.psi(h, q);
        }
    }
    return psi;
}

// Builds the Galerkin matrices point by point for one compartment.
class GalerkinAssembler
{
public:
    GalerkinAssembler(const GpcBasis& basis, const SgTables& tables, const ContactParams& params,
                      const ControlLaw& control, std::span<const double> means)
        : m_basis(basis), m_tables(tables), m_params(params), m_control(control),
          m_means(means.begin(), means.end()), m_psi(psi_matrix(basis)),
          m_weighted(basis.num_modes(), basis.num_nodes()), m_values(basis.num_nodes())
    {
        const std::size_t nq = basis.num_nodes();
        m_c0.assign(nq, 0.0);
        m_c1.assign(nq, 0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            const double d = basis.deltas()[q];
            if (std::abs(d) >= power_form_threshold) {
                m_c0[q] = basis.weights()[q] * params.mu / (2.0 * d);
                m_c1[q] = m_c0[q] * std::pow(m_means[q], -d);
            }
        }
    }

    /// Drift matrix at the half point i.
    void drift(std::size_t i, double x, Eigen::MatrixXd& out)
    {
        const auto deltas = m_basis.deltas();
        for (Eigen::Index q = 0; q < m_values.size(); ++q) {
            const auto qq = static_cast<std::size_t>(q);
            const double d = deltas[qq];
            if (std::abs(d) >= power_form_threshold) {
                const double p0 = m_tables.p0_half(q, static_cast<Eigen::Index>(i));
                m_values[q]     = p0 * (m_c1[qq] * m_tables.pd_half(q, static_cast<Eigen::Index>(i)) - m_c0[qq]);
            }
            else {
                m_values[q] = m_basis.weights()[qq] *
                              fp_coefficients(m_params, DeltaValue(d), m_means[qq], ControlLaw{}, x).drift;
            }
        }
        galerkin(out);
        if (m_control.active()) {
            out.diagonal().array() += m_params.tau / m_control.nu * m_control.s2(x) * (x - m_control.x_target);
        }
    }

    /// Diffusion matrix at the node i.
    void diffusion(std::size_t i, Eigen::MatrixXd& out)
    {
        const double scale = 0.5 * m_params.sigma2;
        if (!m_tables.gram_diff_node.empty()) {
            out = scale * m_tables.gram_diff_node[i];
            return;
        }
        for (Eigen::Index q = 0; q < m_values.size(); ++q) {
            m_values[q] = m_basis.weights()[static_cast<std::size_t>(q)] * scale *
                          m_tables.diff_node(q, static_cast<Eigen::Index>(i));
        }
        galerkin(out);
    }

private:
    void galerkin(Eigen::MatrixXd& out)
    {
        m_weighted.noalias() = m_psi * m_values.asDiagonal();
        out.noalias()        = m_weighted.lazyProduct(m_psi.transpose());
    }

    const GpcBasis& m_basis;
    const SgTables& m_tables;
    const ContactParams& m_params;
    ControlLaw m_control;
    std::vector<double> m_means;
    Eigen::MatrixXd m_psi;
    Eigen::MatrixXd m_weighted;
    Eigen::VectorXd m_values;
    std::vector<double> m_c0;
    std::vector<double> m_c1;
};

double grid_moment_weight(const Grid1D& grid, std::size_t i, int r)
{
    const double w = (i == 0 || i + 1 == grid.size()) ? 0.5 * grid.dx() : grid.dx();
    const double x = grid.x(i);
    return r == 0 ? w : (r == 1 ? w * x : w * x * x);
}

void contact_step_compartment(KineticState& state, Compartment c, const KineticSetup& setup, double dt)
{
    const auto& grid  = state.grid();
    const auto& basis = state.basis();
    const std::size_t n  = grid.size();
    const std::size_t nm = basis.num_modes();
    const auto means     = nodal_means(state, c, setup.mass_floor);
    GalerkinAssembler assembler(basis, state.tables(), setup.contact, setup.control.for_compartment(c), means);

    const double k_int = dt / (setup.contact.tau * grid.dx());
    auto k_of          = [&](std::size_t i) { return (i == 0 || i + 1 == n) ? 2.0 * k_int : k_int; };

    BlockTridiagonalSystem sys(n, nm);
    Eigen::MatrixXd drift(nm, nm), e_left(nm, nm), e_right(nm, nm), a(nm, nm), b(nm, nm);
    for (std::size_t i = 0; i < n; ++i) {
        sys.diag(i).setIdentity();
    }
    assembler.diffusion(0, e_left);
    const double inv_dx = 1.0 / grid.dx();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        assembler.drift(i, grid.x_half(i), drift);
        assembler.diffusion(i + 1, e_right);
        // F_{i+1/2} = a f_i + b f_{i+1}
        a = 0.5 * drift - inv_dx * e_left;
        b = 0.5 * drift + inv_dx * e_right;
        const double ki = k_of(i), kn = k_of(i + 1);
        sys.diag(i) -= ki * a;
        sys.upper(i) = -ki * b;
        sys.diag(i + 1) += kn * b;
        sys.lower(i + 1) = kn * a;
        std::swap(e_left, e_right);
    }

    auto& f = state.field(c);
    std::vector<double> u(f);
    sys.solve(u);

    // Conservative reconstruction from the implicit fluxes, see fp_step.
    Eigen::VectorXd flux_prev = Eigen::VectorXd::Zero(nm), flux_next(nm), part(nm);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Map<Eigen::VectorXd> fi(f.data() + i * nm, nm);
        if (i + 1 < n) {
            Eigen::Map<const Eigen::VectorXd> ui(u.data() + i * nm, nm), un(u.data() + (i + 1) * nm, nm);
            // a = lower(i+1)/k_{i+1}, b = -upper(i)/k_i
            flux_next.noalias() = sys.lower(i + 1).lazyProduct(ui);
            flux_next /= k_of(i + 1);
            part.noalias() = sys.upper(i).lazyProduct(un);
            flux_next -= part / k_of(i);
        }
        else {
            flux_next.setZero();
        }
        fi += k_of(i) * (flux_next - flux_prev);
        flux_prev = flux_next;
    }
}

// Sets nodal values below -tol to zero, restores each node's mass and projects the change back.
std::size_t clip_negative_values(KineticState& state, Compartment c, double tol_rel)
{
    const auto& basis = state.basis();
    const auto& grid  = state.grid();
    const std::size_t nq = basis.num_nodes();
    std::vector<std::vector<double>> nodal(nq);
    double fmax = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
        nodal[q] = state.density_at_node(c, q);
        for (double v : nodal[q]) {
            fmax = std::max(fmax, std::abs(v));
        }
    }
    const double tol = tol_rel * fmax;
    std::size_t clipped = 0;
    std::vector<double> delta(grid.size());
    auto& field = state.field(c);
    const std::size_t nm = basis.num_modes();
    for (std::size_t q = 0; q < nq; ++q) {
        auto& g = nodal[q];
        std::size_t here = 0;
        const double before = trapezoid(g, grid);
        std::vector<double> fixed(g);
        for (double& v : fixed) {
            if (v < -tol) {
                v = 0.0;
                ++here;
            }
        }
        if (here == 0) {
            continue;
        }
        clipped += here;
        const double after = trapezoid(fixed, grid);
        const double scale = after > 0.0 ? before / after : 1.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            delta[i] = fixed[i] * scale - g[i];
        }
        const double w = basis.weights()[q];
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (std::size_t h = 0; h < nm; ++h) {
                field[i * nm + h] += w * basis.psi(h, q) * delta[i];
            }
        }
    }
    return clipped;
}

} // namespace

void EpiParams::validate() const
{
    if (!(beta >= 0.0) || !(zeta >= 0.0) || !(gamma >= 0.0)) {
        throw_invalid("epidemic rates must be nonnegative");
    }
}

KineticState::KineticState(std::shared_ptr<const GpcBasis> basis, const Grid1D& grid)
    : m_basis(std::move(basis)), m_grid(grid)
{
    if (!m_basis) {
        throw_invalid("kinetic state needs a basis");
    }
    m_tables = build_tables(*m_basis, m_grid);
    for (auto c : all_compartments) {
        m_fields[c].assign(grid.size() * m_basis->num_modes(), 0.0);
        last_mean[c].assign(m_basis->num_nodes(), 1.0);
    }
}

std::vector<double> KineticState::mode(Compartment c, std::size_t h) const
{
    std::vector<double> out(m_grid.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = coeff(c, h, i);
    }
    return out;
}

std::vector<double> KineticState::density_at_node(Compartment c, std::size_t q) const
{
    const std::size_t nm = num_modes();
    std::vector<double> out(m_grid.size(), 0.0);
    const auto& f = m_fields[c];
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (std::size_t h = 0; h < nm; ++h) {
            s += f[i * nm + h] * m_basis->psi(h, q);
        }
        out[i] = s;
    }
    return out;
}

std::vector<double> KineticState::density_at(Compartment c, double z) const
{
    const std::size_t nm = num_modes();
    std::vector<double> psi(nm);
    for (std::size_t h = 0; h < nm; ++h) {
        psi[h] = m_basis->evaluate(static_cast<int>(h), z);
    }
    std::vector<double> out(m_grid.size(), 0.0);
    const auto& f = m_fields[c];
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (std::size_t h = 0; h < nm; ++h) {
            s += f[i * nm + h] * psi[h];
        }
        out[i] = s;
    }
    return out;
}

std::vector<double> KineticState::modal_moment(Compartment c, int r) const
{
    const std::size_t nm = num_modes();
    std::vector<double> out(nm, 0.0);
    const auto& f = m_fields[c];
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
        const double w = grid_moment_weight(m_grid, i, r);
        for (std::size_t h = 0; h < nm; ++h) {
            out[h] += w * f[i * nm + h];
        }
    }
    return out;
}

std::vector<double> KineticState::nodal_moment(Compartment c, int r) const
{
    return m_basis->reconstruct_at_nodes(modal_moment(c, r));
}

KineticState gamma_initial_state(std::shared_ptr<const GpcBasis> basis, const Grid1D& grid,
                                 const PerCompartment<double>& rho, const PerCompartment<double>& mean, double lambda)
{
    KineticState state(std::move(basis), grid);
    for (auto c : all_compartments) {
        if (!(mean[c] > 0.0) || !(rho[c] >= 0.0)) {
            throw_invalid("initial masses must be nonnegative and means positive");
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            state.coeff(c, 0, i) = rho[c] * gamma_density(lambda, mean[c], grid.x(i));
        }
        std::fill(state.last_mean[c].begin(), state.last_mean[c].end(), mean[c]);
    }
    return state;
}

std::vector<double> nodal_means(const KineticState& state, Compartment c, double mass_floor)
{
    const auto mass  = state.nodal_moment(c, 0);
    const auto first = state.nodal_moment(c, 1);
    std::vector<double> means(mass.size());
    for (std::size_t q = 0; q < mass.size(); ++q) {
        if (mass[q] > mass_floor) {
            means[q] = first[q] / mass[q];
            if (!(means[q] > 0.0)) {
                throw_numerical("nonpositive mean " + std::to_string(means[q]) + " in compartment " +
                                std::string(name(c)) + " at quadrature node " + std::to_string(q));
            }
        }
        else {
            means[q] = state.last_mean[c][q];
        }
    }
    return means;
}

SgOperators assemble_sg_operators(const KineticState& state, Compartment c, const KineticSetup& setup,
                                  std::span<const double> means)
{
    const auto& basis = state.basis();
    if (means.size() != basis.num_nodes()) {
        throw_invalid("one mean per quadrature node is required");
    }
    for (double m : means) {
        if (!(m > 0.0)) {
            throw_invalid("nodal means must be positive");
        }
    }
    const auto& grid = state.grid();
    GalerkinAssembler assembler(basis, state.tables(), setup.contact, setup.control.for_compartment(c), means);
    SgOperators ops;
    const std::size_t nm = basis.num_modes();
    ops.drift_half.assign(grid.size() - 1, Eigen::MatrixXd(nm, nm));
    ops.diffusion_node.assign(grid.size(), Eigen::MatrixXd(nm, nm));
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        assembler.drift(i, grid.x_half(i), ops.drift_half[i]);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        assembler.diffusion(i, ops.diffusion_node[i]);
    }
    return ops;
}

void sg_contact_step(KineticState& state, const KineticSetup& setup, double dt)
{
    if (!(dt > 0.0)) {
        throw_invalid("time step must be positive");
    }
    // remember the means the step starts from so that emptied compartments keep a valid value
    for (auto c : all_compartments) {
        const auto means = nodal_means(state, c, setup.mass_floor);
        state.last_mean[c] = means;
    }
    auto work = [&](Compartment c) {
        const auto& f = state.field(c);
        // an empty compartment stays empty
        if (std::any_of(f.begin(), f.end(), [](double v) { return v != 0.0; })) {
            contact_step_compartment(state, c, setup, dt);
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(setup.jobs, num_compartments));
    if (jobs == 1) {
        for (auto c : all_compartments) {
            work(c);
        }
    }
    else {
        std::vector<std::exception_ptr> errors(num_compartments);
        for (std::size_t start = 0; start < num_compartments; start += jobs) {
            std::vector<std::jthread> threads;
            for (std::size_t j = start; j < std::min<std::size_t>(start + jobs, num_compartments); ++j) {
                threads.emplace_back([&, j] {
                    try {
                        work(all_compartments[j]);
                    }
                    catch (...) {
                        errors[j] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }
    if (setup.clip_negative) {
        for (auto c : all_compartments) {
            const auto n = clip_negative_values(state, c, setup.tol_neg_rel);
            if (n > 0) {
                spdlog::debug("clipped {} negative nodal values in {} at t={}", n, name(c), state.t);
            }
            state.clip_count += n;
        }
    }
}

bool epidemic_step_admissible(const KineticState& state, const EpiParams& epi, double dt, double tol_neg_rel)
{
    // 1 - dt beta x g(z_q) must stay nonnegative wherever the susceptible density is not negligible
    const auto& basis = state.basis();
    const auto& grid  = state.grid();
    const auto g      = state.nodal_moment(Compartment::I, 1);
    std::vector<std::vector<double>> s_nodes(basis.num_nodes());
    double s_max = 0.0;
    for (std::size_t q = 0; q < s_nodes.size(); ++q) {
        s_nodes[q] = state.density_at_node(Compartment::S, q);
        for (double v : s_nodes[q]) {
            s_max = std::max(s_max, std::abs(v));
        }
    }
    const double tol = tol_neg_rel * s_max;
    for (std::size_t q = 0; q < s_nodes.size(); ++q) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (dt * epi.beta * grid.x(i) * g[q] > 1.0 && s_nodes[q][i] > tol) {
                return false;
            }
        }
    }
    return true;
}

void epidemic_step(KineticState& state, const EpiParams& epi, double dt, double tol_neg_rel)
{
    if (!(dt > 0.0)) {
        throw_invalid("time step must be positive");
    }
    const auto& basis    = state.basis();
    const auto& grid     = state.grid();
    const std::size_t nm = basis.num_modes();
    const std::size_t nq = basis.num_nodes();
    if (dt * std::max(epi.zeta, epi.gamma) > 1.0) {
        throw_numerical("explicit exchange step too large: dt*max(zeta, gamma) = " +
                        std::to_string(dt * std::max(epi.zeta, epi.gamma)));
    }

    // g(z_q) = int x f_I(z_q, x) dx and the Galerkin product matrix
    const auto g = state.nodal_moment(Compartment::I, 1);
    Eigen::MatrixXd product = Eigen::MatrixXd::Zero(nm, nm);
    for (std::size_t q = 0; q < nq; ++q) {
        const double wg = basis.weights()[q] * g[q];
        for (std::size_t h = 0; h < nm; ++h) {
            for (std::size_t k = 0; k < nm; ++k) {
                product(h, k) += wg * basis.psi(h, q) * basis.psi(k, q);
            }
        }
    }

    if (!epidemic_step_admissible(state, epi, dt, tol_neg_rel)) {
        throw_numerical("explicit exchange step violates positivity at t=" + std::to_string(state.t) + "; reduce dt");
    }

    auto& fs = state.field(Compartment::S);
    auto& fe = state.field(Compartment::E);
    auto& fi = state.field(Compartment::I);
    auto& fr = state.field(Compartment::R);
    Eigen::VectorXd incidence(nm);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Eigen::Map<Eigen::VectorXd> s(fs.data() + i * nm, nm), e(fe.data() + i * nm, nm), in(fi.data() + i * nm, nm),
            r(fr.data() + i * nm, nm);
        incidence.noalias() = (epi.beta * grid.x(i)) * (product * s);
        const Eigen::VectorXd to_i = epi.zeta * e;
        const Eigen::VectorXd to_r = epi.gamma * in;
        s -= dt * incidence;
        e += dt * (incidence - to_i);
        in += dt * (to_i - to_r);
        r += dt * to_r;
    }

}

PerCompartment<CompartmentStats> kinetic_statistics(const KineticState& state, double mass_floor)
{
    PerCompartment<CompartmentStats> out;
    const auto& basis = state.basis();
    for (auto c : all_compartments) {
        const auto rho_modes = state.modal_moment(c, 0);
        out[c].rho           = expectation_and_variance(rho_modes);
        const auto means     = nodal_means(state, c, mass_floor);
        out[c].mean          = expectation_and_variance(basis.project(means));
    }
    return out;
}

namespace
{

void exchange_substepped(KineticState& state, const KineticSetup& setup, double dt, int halvings)
{
    if (halvings > 0 && !epidemic_step_admissible(state, setup.epi, dt, setup.tol_neg_rel)) {
        spdlog::debug("exchange step halved to dt={} at t={}", dt / 2, state.t);
        exchange_substepped(state, setup, dt / 2, halvings - 1);
        exchange_substepped(state, setup, dt / 2, halvings - 1);
        return;
    }
    epidemic_step(state, setup.epi, dt, setup.tol_neg_rel);
}

} // namespace

void run_kinetic(KineticState& state, const KineticSetup& setup, const KineticRunOptions& options,
                 const KineticObserver& observer)
{
    if (!(options.dt > 0.0) || !(options.t_final >= 0.0)) {
        throw_invalid("run needs dt > 0 and t_final >= 0");
    }
    setup.contact.validate();
    setup.epi.validate();
    setup.control.validate();
    const auto steps = static_cast<std::size_t>(std::llround(options.t_final / options.dt));
    const double t0  = state.t;
    const std::size_t stride = std::max<std::size_t>(1, options.stride);
    if (observer) {
        observer(state);
    }
    for (std::size_t n = 1; n <= steps; ++n) {
        sg_contact_step(state, setup, options.dt);
        if (options.epidemic) {
            exchange_substepped(state, setup, options.dt, setup.max_exchange_halvings);
        }
        state.t = t0 + static_cast<double>(n) * options.dt;
        if (observer && (n % stride == 0 || n == steps)) {
            observer(state);
        }
    }
}

void write_stats_header(std::ostream& os)
{
    os << "t,J,stat,value\n";
}

void write_stats_rows(std::ostream& os, const KineticState& state, double mass_floor)
{
    const auto stats = kinetic_statistics(state, mass_floor);
    for (auto c : all_compartments) {
        os << state.t << ',' << name(c) << ",mean_rho," << stats[c].rho.mean << '\n';
        os << state.t << ',' << name(c) << ",var_rho," << stats[c].rho.variance << '\n';
        os << state.t << ',' << name(c) << ",mean_m," << stats[c].mean.mean << '\n';
        os << state.t << ',' << name(c) << ",var_m," << stats[c].mean.variance << '\n';
    }
}

void write_snapshot(std::ostream& os, const KineticState& state)
{
    os << "x,mode,J,value\n";
    for (auto c : all_compartments) {
        for (std::size_t h = 0; h < state.num_modes(); ++h) {
            for (std::size_t i = 0; i < state.grid().size(); ++i) {
                os << state.grid().x(i) << ',' << h << ',' << name(c) << ',' << state.coeff(c, h, i) << '\n';
            }
        }
    }
}

ConvergenceStudy sg_convergence_study(const UncertaintyLaw& law, const ContactParams& contact, const Grid1D& grid,
                                      double m0, double dt, double t_final, std::span<const int> orders, int reference,
                                      bool clip_negative)
{
    for (int m : orders) {
        if (m > reference) {
            throw_invalid("reference order must not be below the studied orders");
        }
    }
    KineticSetup setup;
    setup.contact       = contact;
    setup.clip_negative = clip_negative;
    KineticRunOptions opt;
    opt.dt       = dt;
    opt.t_final  = t_final;
    opt.epidemic = false;
    opt.stride   = std::numeric_limits<std::size_t>::max();

    const PerCompartment<double> rho{{1.0, 0.0, 0.0, 0.0}};
    const PerCompartment<double> mean{{m0, m0, m0, m0}};

    auto run = [&](int order) {
        auto basis = std::make_shared<const GpcBasis>(law, order);
        auto state = gamma_initial_state(basis, grid, rho, mean, contact.lambda());
        run_kinetic(state, setup, opt);
        return state;
    };

    const auto ref_state = run(reference);
    const auto& ref_basis = ref_state.basis();
    const auto ref_m0 = ref_state.modal_moment(Compartment::S, 0);
    const auto ref_m1 = ref_state.modal_moment(Compartment::S, 1);

    auto mean_at = [](const GpcBasis& b, const std::vector<double>& m0v, const std::vector<double>& m1v, double z) {
        return b.reconstruct(m1v, z) / b.reconstruct(m0v, z);
    };

    ConvergenceStudy study;
    for (int order : orders) {
        double err2 = 0.0;
        if (order != reference) {
            const auto state = run(order);
            const auto s0    = state.modal_moment(Compartment::S, 0);
            const auto s1    = state.modal_moment(Compartment::S, 1);
            for (std::size_t q = 0; q < ref_basis.num_nodes(); ++q) {
                const double z = ref_basis.nodes()[q];
                const double d = mean_at(state.basis(), s0, s1, z) - mean_at(ref_basis, ref_m0, ref_m1, z);
                err2 += ref_basis.weights()[q] * d * d;
            }
        }
        study.orders.push_back(order);
        study.errors.push_back(std::sqrt(err2));
    }
    return study;
}

} // namespace kec
