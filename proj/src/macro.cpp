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

#include "kec/macro.h"
#include "kec/contact.h"
#include "kec/error.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <thread>

namespace kec
{

using enum Compartment;

double MacroState::total_mass() const
{
    return rho[S] + rho[E] + rho[I] + rho[R];
}

void MacroModel::validate() const
{
    epi.validate();
    if (!(lambda_factor > 0.0)) {
        throw_invalid("closure factor must be positive");
    }
    if (clamp_mI && !(*clamp_mI > 0.0)) {
        throw_invalid("clamped m_I must be positive");
    }
    control.validate();
}

namespace
{

double control_G(const MacroModel& model, Compartment c, double m)
{
    return macro_control_G(model.control.selective, model.control.nu, model.control.x_target[c], m,
                           model.lambda_factor);
}

bool finite(const MacroState& s)
{
    for (auto c : all_compartments) {
        if (!std::isfinite(s.rho[c]) || !std::isfinite(s.m[c])) {
            return false;
        }
    }
    return true;
}

MacroState axpy(const MacroState& x, double a, const MacroState& k)
{
    MacroState out = x;
    for (auto c : all_compartments) {
        out.rho[c] += a * k.rho[c];
        out.m[c] += a * k.m[c];
    }
    return out;
}

MacroState rk4_step(const MacroState& s, const MacroModel& model, double h)
{
    const auto k1 = macro_rhs(s, model);
    const auto k2 = macro_rhs(axpy(s, 0.5 * h, k1), model);
    const auto k3 = macro_rhs(axpy(s, 0.5 * h, k2), model);
    const auto k4 = macro_rhs(axpy(s, h, k3), model);
    MacroState out = s;
    for (auto c : all_compartments) {
        out.rho[c] += h / 6.0 * (k1.rho[c] + 2.0 * k2.rho[c] + 2.0 * k3.rho[c] + k4.rho[c]);
        out.m[c] += h / 6.0 * (k1.m[c] + 2.0 * k2.m[c] + 2.0 * k3.m[c] + k4.m[c]);
    }
    out.t = s.t + h;
    return out;
}

} // namespace

MacroState macro_rhs(const MacroState& s, const MacroModel& model)
{
    const auto& e    = model.epi;
    const double fl  = model.mass_floor;
    const double lam = model.lambda_factor;
    const double mI  = model.clamp_mI.value_or(s.m[I]);
    const double inc = e.beta * s.m[S] * s.rho[S] * mI * s.rho[I];

    MacroState d;
    d.rho[S] = -inc;
    d.rho[E] = inc - e.zeta * s.rho[E];
    d.rho[I] = e.zeta * s.rho[E] - e.gamma * s.rho[I];
    d.rho[R] = e.gamma * s.rho[I];

    if (s.rho[S] >= fl) {
        d.m[S] = -e.beta * (lam - 1.0) * s.m[S] * s.m[S] * mI * s.rho[I] + control_G(model, S, s.m[S]);
    }
    if (s.rho[E] >= fl) {
        d.m[E] = inc / s.rho[E] * (lam * s.m[S] - s.m[E]) + control_G(model, E, s.m[E]);
    }
    if (model.clamp_mI) {
        d.m[I] = 0.0;
    }
    else if (s.rho[I] >= fl) {
        d.m[I] = e.zeta * s.rho[E] / s.rho[I] * (s.m[E] - s.m[I]) + control_G(model, I, s.m[I]);
    }
    if (s.rho[R] >= fl) {
        d.m[R] = e.gamma * s.rho[I] / s.rho[R] * (mI - s.m[R]) + control_G(model, R, s.m[R]);
    }
    return d;
}

double macro_stiffness(const MacroState& s, const MacroModel& model)
{
    const auto& e   = model.epi;
    const double fl = model.mass_floor;
    const double mI = model.clamp_mI.value_or(s.m[I]);
    const double lam = model.lambda_factor;
    double rate      = std::max({e.zeta, e.gamma, e.beta * s.m[S] * mI * s.rho[I], e.beta * s.m[S] * s.rho[S] * mI});
    rate = std::max(rate, 2.0 * e.beta * std::abs(lam - 1.0) * s.m[S] * mI * s.rho[I]);
    if (s.rho[E] >= fl) {
        rate = std::max(rate, e.beta * s.m[S] * s.rho[S] * mI * s.rho[I] / s.rho[E]);
    }
    if (s.rho[I] >= fl) {
        rate = std::max(rate, e.zeta * s.rho[E] / s.rho[I]);
    }
    if (s.rho[R] >= fl) {
        rate = std::max(rate, e.gamma * s.rho[I] / s.rho[R]);
    }
    const auto& ctl = model.control;
    for (auto c : all_compartments) {
        if (ctl.selective == Selective::Uniform) {
            rate = std::max(rate, 1.0 / ctl.nu);
        }
        else if (ctl.selective == Selective::SqrtX) {
            rate = std::max(rate, std::abs(ctl.x_target[c] - 2.0 * lam * s.m[c]) / ctl.nu);
        }
    }
    return rate;
}

std::vector<MacroState> rk4_integrate(const MacroState& initial, const MacroModel& model,
                                      const MacroRunOptions& options)
{
    model.validate();
    if (!(options.dt > 0.0) || !(options.t_final >= 0.0) || options.stride < 1) {
        throw_invalid("macro integration needs dt > 0, T >= 0 and stride >= 1");
    }
    const auto n_steps = static_cast<long>(std::llround(options.t_final / options.dt));
    if (std::abs(static_cast<double>(n_steps) * options.dt - options.t_final) > 1e-9 * std::max(1.0, options.t_final)) {
        throw_invalid(fmt::format("T = {} is not a multiple of dt = {}", options.t_final, options.dt));
    }
    MacroState s = initial;
    if (model.clamp_mI) {
        s.m[I] = *model.clamp_mI;
    }
    std::vector<MacroState> out{s};
    constexpr double max_substeps = 1e6;
    for (long n = 1; n <= n_steps; ++n) {
        const double t0   = s.t;
        const double rate = macro_stiffness(s, model);
        const double subs = std::ceil(options.dt * rate);
        if (!(subs <= max_substeps)) {
            throw_numerical(fmt::format("macro system too stiff at t = {} (rate {})", t0, rate));
        }
        const int n_sub = std::max(1, static_cast<int>(subs));
        const double h  = options.dt / n_sub;
        for (int k = 0; k < n_sub; ++k) {
            s = rk4_step(s, model, h);
        }
        s.t = initial.t + static_cast<double>(n) * options.dt;
        if (!finite(s)) {
            throw_numerical(fmt::format("NaN in macro trajectory at t = {}", s.t));
        }
        if (n % options.stride == 0 || n == n_steps) {
            out.push_back(s);
        }
    }
    return out;
}

MacroEnsemble run_macro_uncertain(const MacroState& initial, const EpiParams& epi, double lambda,
                                  const UncertaintyLaw& law, const ControlSpec& control,
                                  const MacroRunOptions& options, std::optional<double> clamp_mI, unsigned jobs)
{
    const auto* bern = std::get_if<Bernoulli>(&law.kind);
    if (!bern) {
        throw_invalid("the macroscopic closure is defined for Bernoulli laws only");
    }
    MacroEnsemble ens;
    ens.deltas  = {law.delta(1.0), law.delta(0.0)};
    ens.weights = {bern->p, 1.0 - bern->p};
    ens.atoms.resize(2);

    std::vector<MacroModel> models(2);
    for (std::size_t a = 0; a < 2; ++a) {
        models[a] = MacroModel{epi, 1.0, control, clamp_mI};
        if (ens.weights[a] > 0.0) {
            models[a].lambda_factor = lambda_factor(ens.deltas[a], lambda);
            models[a].validate();
        }
    }
    auto run = [&](std::size_t a) {
        if (ens.weights[a] > 0.0) {
            ens.atoms[a] = rk4_integrate(initial, models[a], options);
        }
    };
    if (jobs > 1 && ens.weights[0] > 0.0 && ens.weights[1] > 0.0) {
        std::exception_ptr err;
        {
            std::jthread worker([&] {
                try {
                    run(0);
                }
                catch (...) {
                    err = std::current_exception();
                }
            });
            run(1);
        }
        if (err) {
            std::rethrow_exception(err);
        }
    }
    else {
        run(0);
        run(1);
    }

    const auto& ref = ens.atoms[0].empty() ? ens.atoms[1] : ens.atoms[0];
    ens.mean.resize(ref.size());
    ens.variance.resize(ref.size());
    for (std::size_t n = 0; n < ref.size(); ++n) {
        MacroState mean, second;
        mean.t = second.t = ref[n].t;
        for (std::size_t a = 0; a < 2; ++a) {
            if (ens.atoms[a].empty()) {
                continue;
            }
            const auto& s  = ens.atoms[a][n];
            const double w = ens.weights[a];
            for (auto c : all_compartments) {
                mean.rho[c] += w * s.rho[c];
                mean.m[c] += w * s.m[c];
                second.rho[c] += w * s.rho[c] * s.rho[c];
                second.m[c] += w * s.m[c] * s.m[c];
            }
        }
        ens.mean[n]     = mean;
        ens.variance[n] = mean;
        for (auto c : all_compartments) {
            ens.variance[n].rho[c] = std::max(0.0, second.rho[c] - mean.rho[c] * mean.rho[c]);
            ens.variance[n].m[c]   = std::max(0.0, second.m[c] - mean.m[c] * mean.m[c]);
        }
    }
    return ens;
}

void write_macro_header(std::ostream& os)
{
    os << "t,rho_S,rho_E,rho_I,rho_R,m_S,m_E,m_I,m_R\n";
}

void write_macro_rows(std::ostream& os, const std::vector<MacroState>& states)
{
    for (const auto& s : states) {
        os << fmt::format("{:.10g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.t, s.rho[S],
                          s.rho[E], s.rho[I], s.rho[R], s.m[S], s.m[E], s.m[I], s.m[R]);
    }
}

} // namespace kec
