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

#include "kec/commands.h"
#include "kec/error.h"
#include "kec/fpsolve.h"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace kec
{

using enum Compartment;
namespace fs = std::filesystem;

namespace
{

constexpr const char* kVersion = "1.0.0";

class Stopwatch
{
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - m_start).count();
    }

private:
    std::chrono::steady_clock::time_point m_start = std::chrono::steady_clock::now();
};

std::ofstream open_output(const RunContext& ctx, const std::string& name, const Config& cfg)
{
    fs::create_directories(ctx.out_dir);
    const auto path = ctx.out_dir / name;
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Config, "cannot write " + path.string());
    }
    out << output_header(cfg);
    spdlog::debug("writing {}", path.string());
    return out;
}

std::string tag(double v)
{
    return fmt::format("{:g}", v);
}

PerCompartment<double> initial_rho(const Config& cfg)
{
    PerCompartment<double> rho{{cfg.get_double("initial.rho_S", 0.97), cfg.get_double("initial.rho_E", 0.01),
                                cfg.get_double("initial.rho_I", 0.01), cfg.get_double("initial.rho_R", 0.01)}};
    for (auto c : all_compartments) {
        if (!(rho[c] >= 0.0 && rho[c] <= 1.0)) {
            throw Error(ErrorKind::Config, "initial mass fractions must lie in [0, 1]");
        }
    }
    return rho;
}

PerCompartment<double> initial_means(const Config& cfg)
{
    const double m = cfg.get_double("initial.m", 10.0);
    PerCompartment<double> means{{cfg.get_double("initial.m_S", m), cfg.get_double("initial.m_E", m),
                                  cfg.get_double("initial.m_I", m), cfg.get_double("initial.m_R", m)}};
    for (auto c : all_compartments) {
        if (!(means[c] > 0.0)) {
            throw Error(ErrorKind::Config, "initial means must be positive");
        }
    }
    return means;
}

double positive(const Config& cfg, const std::string& key, double fallback)
{
    const double v = cfg.get_double(key, fallback);
    if (!(v > 0.0)) {
        throw Error(ErrorKind::Config, fmt::format("{}: {} must be positive", cfg.origin(), key));
    }
    return v;
}

std::size_t step_count(double t_final, double dt)
{
    const auto n = static_cast<std::size_t>(std::llround(t_final / dt));
    if (std::abs(static_cast<double>(n) * dt - t_final) > 1e-9 * std::max(1.0, t_final)) {
        throw Error(ErrorKind::Config, fmt::format("T = {} is not a multiple of dt = {}", t_final, dt));
    }
    return n;
}

double trapezoid_l1(std::span<const double> a, std::span<const double> b, const Grid1D& grid)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double w = (i == 0 || i + 1 == a.size()) ? 0.5 : 1.0;
        s += w * std::abs(a[i] - b[i]);
    }
    return s * grid.dx();
}

// Least-squares slope of log f against log x over [lo, hi].
std::optional<double> loglog_slope(std::span<const double> f, const Grid1D& grid, double lo, double hi)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        const double x = grid.x(i);
        if (x < lo || x > hi || !(f[i] > 0.0)) {
            continue;
        }
        const double lx = std::log(x), ly = std::log(f[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 3) {
        return std::nullopt;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

KineticSetup kinetic_setup(const Config& cfg, const RunContext& ctx)
{
    KineticSetup setup;
    setup.contact       = cfg.contact();
    setup.epi           = cfg.epi();
    setup.control       = cfg.control();
    setup.clip_negative = cfg.get_bool("solver.clip_negative", true);
    setup.tol_neg_rel   = cfg.get_double("solver.tol_neg_rel", setup.tol_neg_rel);
    setup.jobs          = ctx.jobs;
    if (cfg.has("solver.scheme") && cfg.scheme(FluxScheme::Central) != FluxScheme::Central) {
        throw Error(ErrorKind::Config, "the stochastic Galerkin solver supports the central scheme only");
    }
    return setup;
}

} // namespace

std::string version_string()
{
    return kVersion;
}

void CheckList::require(bool ok, const std::string& what)
{
    if (!ok) {
        failures.push_back(what);
        spdlog::error("assertion failed: {}", what);
    }
}

std::string output_header(const Config& cfg)
{
    return fmt::format("# kec {} config_sha256={}\n", kVersion, cfg.sha256());
}

std::vector<EquilibriumCase> cmd_equilibrium(const Config& cfg, const RunContext& ctx, CheckList& checks)
{
    const auto params    = cfg.contact();
    const auto grid      = cfg.grid(500.0, 0.02);
    const auto deltas    = cfg.get_list("equilibrium.deltas", {-1.0, -0.5, 0.5, 1.0});
    const double m       = positive(cfg, "equilibrium.m", 10.0);
    const double dt      = positive(cfg, "equilibrium.dt", 1.0);
    const double t_final = positive(cfg, "equilibrium.T", 300.0);
    const double init_l  = positive(cfg, "equilibrium.initial_lambda", 5.0);
    const auto mean_mode = cfg.get_string("equilibrium.mean", "fixed");
    const double tail_lo = cfg.get_double("equilibrium.tail_min", 200.0);
    const double tail_hi = cfg.get_double("equilibrium.tail_max", 450.0);
    if (mean_mode != "fixed" && mean_mode != "lagged") {
        throw Error(ErrorKind::Config, "equilibrium.mean must be fixed or lagged");
    }
    const auto n_steps = step_count(t_final, dt);

    auto summary = open_output(ctx, "equilibrium_summary.csv", cfg);
    summary << "delta,l1_rel,closed_form_err,tail_slope,expected_slope\n";
    std::vector<EquilibriumCase> cases;
    for (double d : deltas) {
        Stopwatch clock;
        const DeltaValue delta(d);
        std::vector<double> f0(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            f0[i] = gamma_density(init_l, m, grid.x(i));
        }
        FpRunOptions opt;
        opt.scheme = cfg.scheme(FluxScheme::ChangCooper);
        if (mean_mode == "fixed") {
            opt.fixed_mean = m;
        }
        const auto f        = fp_advance(f0, grid, params, delta, ControlLaw{}, dt, n_steps, opt);
        const double m_used = mean_mode == "fixed" ? m : moments(f, grid).mean.value_or(m);
        const auto feq      = equilibrium_density(params, delta, m_used, grid);
        const double mass   = moments(f, grid).rho;

        EquilibriumCase ec;
        ec.delta  = d;
        ec.l1_rel = trapezoid_l1(f, feq, grid) / mass;
        std::vector<double> closed;
        if (std::abs(std::abs(d) - 1.0) < 1e-12) {
            closed.resize(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double x = grid.x(i);
                closed[i] = d > 0 ? gamma_density(params.lambda(), m_used, x)
                                  : inverse_gamma_density(params.lambda(), m_used, x);
            }
            double err = 0.0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                err = std::max(err, std::abs(f[i] - closed[i]));
            }
            ec.closed_form_err = err / *std::max_element(closed.begin(), closed.end());
        }
        if (d <= -1.0 + 1e-12) {
            ec.tail_slope     = loglog_slope(f, grid, tail_lo, tail_hi);
            ec.expected_slope = -(2.0 + params.lambda());
        }
        ec.seconds = clock.seconds();

        auto out = open_output(ctx, fmt::format("equilibrium_delta_{}.csv", tag(d)), cfg);
        out << (closed.empty() ? "x,solved,analytic\n" : "x,solved,analytic,closed_form\n");
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out << fmt::format("{:.10g},{:.17g},{:.17g}", grid.x(i), f[i], feq[i]);
            if (!closed.empty()) {
                out << fmt::format(",{:.17g}", closed[i]);
            }
            out << '\n';
        }
        auto opt_str = [](const std::optional<double>& v) {
            return v ? fmt::format("{:.10g}", *v) : std::string();
        };
        summary << fmt::format("{},{:.10g},{},{},{}\n", tag(d), ec.l1_rel, opt_str(ec.closed_form_err),
                               opt_str(ec.tail_slope), opt_str(ec.expected_slope));
        spdlog::info("delta = {}: relative L1 {:.3e} ({:.1f} s)", tag(d), ec.l1_rel, ec.seconds);

        checks.require(ec.l1_rel < 1e-2, fmt::format("delta {}: relative L1 {:.3e} >= 1e-2", tag(d), ec.l1_rel));
        if (ec.closed_form_err) {
            checks.require(*ec.closed_form_err < 1e-3,
                           fmt::format("delta {}: closed-form error {:.3e} >= 1e-3", tag(d), *ec.closed_form_err));
        }
        if (ec.expected_slope) {
            const bool ok = ec.tail_slope &&
                            std::abs(*ec.tail_slope - *ec.expected_slope) <= 0.05 * std::abs(*ec.expected_slope);
            checks.require(ok, fmt::format("delta {}: tail slope off by more than 5%", tag(d)));
        }
        cases.push_back(ec);
    }
    return cases;
}

KineticReport cmd_kinetic(const Config& cfg, const RunContext& ctx, CheckList& checks)
{
    Stopwatch clock;
    const auto law  = cfg.uncertainty();
    const auto grid = cfg.grid();
    auto basis      = std::make_shared<const GpcBasis>(law, cfg.order());
    auto state      = gamma_initial_state(basis, grid, initial_rho(cfg), initial_means(cfg),
                                          positive(cfg, "initial.lambda", 5.0));

    const auto setup = kinetic_setup(cfg, ctx);
    KineticRunOptions opt;
    opt.dt       = positive(cfg, "time.dt", 0.1);
    opt.t_final  = cfg.get_double("time.T", 1.0);
    opt.stride   = static_cast<std::size_t>(std::max(1, cfg.get_int("time.stride", 10)));
    opt.epidemic = cfg.get_bool("solver.epidemic", true);
    step_count(opt.t_final, opt.dt);

    auto stats_out = open_output(ctx, "kinetic_stats.csv", cfg);
    write_stats_header(stats_out);
    KineticReport rep;
    auto total_mass = [](const KineticState& s) {
        double total = 0.0;
        for (auto c : all_compartments) {
            total += s.modal_moment(c, 0)[0];
        }
        return total;
    };
    const double mass0 = total_mass(state);
    run_kinetic(state, setup, opt, [&](const KineticState& s) {
        write_stats_rows(stats_out, s);
        const auto st = kinetic_statistics(s);
        if (st[I].rho.mean > rep.peak_infected) {
            rep.peak_infected = st[I].rho.mean;
            rep.peak_time     = s.t;
        }
        rep.mass_drift = std::max(rep.mass_drift, std::abs(total_mass(s) - mass0));
    });

    const auto st = kinetic_statistics(state);
    const auto& w = basis->weights();
    for (auto c : all_compartments) {
        rep.final_rho[c]  = st[c].rho;
        rep.final_mean[c] = st[c].mean;
        double g          = 0.0;
        for (std::size_t q = 0; q < basis->num_nodes(); ++q) {
            g += w[q] * damping_index(state.density_at_node(c, q), grid, setup.control.x_target[c]);
        }
        rep.damping[c] = g;
    }
    rep.clip_count = state.clip_count;
    rep.seconds    = clock.seconds();

    if (cfg.get_bool("solver.snapshot", false)) {
        auto snap = open_output(ctx, "kinetic_snapshot.csv", cfg);
        write_snapshot(snap, state);
    }
    auto summary = open_output(ctx, "kinetic_summary.csv", cfg);
    summary << "quantity,J,value\n";
    for (auto c : all_compartments) {
        const auto n = name(c);
        summary << fmt::format("mean_rho,{},{:.17g}\n", n, rep.final_rho[c].mean);
        summary << fmt::format("var_rho,{},{:.17g}\n", n, rep.final_rho[c].variance);
        summary << fmt::format("mean_m,{},{:.17g}\n", n, rep.final_mean[c].mean);
        summary << fmt::format("var_m,{},{:.17g}\n", n, rep.final_mean[c].variance);
        summary << fmt::format("damping,{},{:.17g}\n", n, rep.damping[c]);
    }
    summary << fmt::format("peak_mean_rho,I,{:.17g}\n", rep.peak_infected);
    summary << fmt::format("peak_time,I,{:.10g}\n", rep.peak_time);
    summary << fmt::format("mass_drift,all,{:.6e}\n", rep.mass_drift);
    spdlog::info("kinetic run finished in {:.1f} s; final E[rho_S] = {:.6g}, peak E[rho_I] = {:.6g}", rep.seconds,
                 rep.final_rho[S].mean, rep.peak_infected);
    checks.require(rep.mass_drift < 1e-9, fmt::format("total mass drift {:.3e} >= 1e-9", rep.mass_drift));
    return rep;
}

ConvergenceStudy cmd_sg_convergence(const Config& cfg, const RunContext& ctx, CheckList& checks)
{
    const auto law = cfg.uncertainty();
    auto contact   = cfg.contact();
    if (!cfg.has("contact.tau")) {
        contact.tau = 1e-5;
    }
    const auto grid    = cfg.grid(100.0, 0.05);
    const auto orders_d = cfg.get_list("convergence.orders", {2, 4, 6, 8, 12, 16});
    std::vector<int> orders;
    for (double o : orders_d) {
        if (o < 0 || o != std::floor(o)) {
            throw Error(ErrorKind::Config, "convergence.orders must be nonnegative integers");
        }
        orders.push_back(static_cast<int>(o));
    }
    const int reference = cfg.get_int("convergence.reference", 20);
    const double dt     = positive(cfg, "time.dt", 0.1);
    const double t_fin  = positive(cfg, "time.T", 1.0);
    step_count(t_fin, dt);
    Stopwatch clock;
    const auto study = sg_convergence_study(law, contact, grid, positive(cfg, "convergence.m", 10.0), dt, t_fin,
                                            orders, reference, cfg.get_bool("solver.clip_negative", true));
    auto out = open_output(ctx, "sg_convergence.csv", cfg);
    out << "M,error\n";
    for (std::size_t k = 0; k < study.orders.size(); ++k) {
        out << fmt::format("{},{:.10e}\n", study.orders[k], study.errors[k]);
    }
    spdlog::info("convergence study finished in {:.1f} s", clock.seconds());
    for (std::size_t k = 1; k < study.errors.size(); ++k) {
        checks.require(study.errors[k] < study.errors[k - 1],
                       fmt::format("error does not decrease from M = {} to M = {}", study.orders[k - 1],
                                   study.orders[k]));
    }
    return study;
}

MacroEnsemble cmd_macro(const Config& cfg, const RunContext& ctx, CheckList& checks)
{
    const auto law = cfg.uncertainty();
    MacroState init;
    init.rho = initial_rho(cfg);
    init.m   = initial_means(cfg);
    MacroRunOptions opt;
    opt.dt      = positive(cfg, "macro.dt", cfg.get_double("time.dt", 0.05));
    opt.t_final = cfg.get_double("macro.T", cfg.get_double("time.T", 1.0));
    opt.stride  = std::max(1, cfg.get_int("macro.stride", cfg.get_int("time.stride", 1)));
    const double lambda = positive(cfg, "macro.lambda", cfg.contact().lambda());
    std::optional<double> clamp;
    if (cfg.has("macro.clamp_mI")) {
        clamp = positive(cfg, "macro.clamp_mI", 3.0);
    }
    const auto ens = run_macro_uncertain(init, cfg.epi(), lambda, law, cfg.control(), opt, clamp, ctx.jobs);

    double drift = 0.0;
    for (std::size_t a = 0; a < ens.atoms.size(); ++a) {
        if (ens.atoms[a].empty()) {
            continue;
        }
        auto out = open_output(ctx, fmt::format("macro_delta_{}.csv", tag(ens.deltas[a])), cfg);
        write_macro_header(out);
        write_macro_rows(out, ens.atoms[a]);
        for (const auto& s : ens.atoms[a]) {
            drift = std::max(drift, std::abs(s.total_mass() - init.total_mass()));
        }
    }
    auto mean = open_output(ctx, "macro_mean.csv", cfg);
    write_macro_header(mean);
    write_macro_rows(mean, ens.mean);
    auto var = open_output(ctx, "macro_variance.csv", cfg);
    write_macro_header(var);
    write_macro_rows(var, ens.variance);
    spdlog::info("macro run: final E[rho_S] = {:.6g}, mass drift {:.2e}", ens.mean.back().rho[S], drift);
    checks.require(drift < 1e-10, fmt::format("mass drift {:.3e} >= 1e-10", drift));
    return ens;
}

std::vector<ClosureRow> cmd_closure_check(const Config& cfg, const RunContext& ctx, CheckList& checks)
{
    const auto law = cfg.uncertainty();
    if (!law.is_bernoulli()) {
        throw Error(ErrorKind::Config, "closure-check needs a Bernoulli law");
    }
    auto taus = cfg.get_list("closure.taus", {1e-1, 1e-3});
    std::sort(taus.begin(), taus.end(), std::greater<>());
    const double dt     = positive(cfg, "time.dt", 0.05);
    const double t_fin  = positive(cfg, "time.T", 20.0);
    step_count(t_fin, dt);
    const auto grid     = cfg.grid();
    const auto rho0     = initial_rho(cfg);
    const auto m0       = initial_means(cfg);
    const auto epi      = cfg.epi();
    const auto control  = cfg.control();
    const double lambda = positive(cfg, "macro.lambda", cfg.contact().lambda());

    MacroState init;
    init.rho = rho0;
    init.m   = m0;
    const auto ens = run_macro_uncertain(init, epi, lambda, law, control, {dt, t_fin, 1}, std::nullopt, ctx.jobs);
    double macro_peak = 0.0;
    for (const auto& s : ens.mean) {
        macro_peak = std::max(macro_peak, s.rho[I]);
    }

    auto summary = open_output(ctx, "closure.csv", cfg);
    summary << "tau,sup_abs,sup_rel\n";
    std::vector<ClosureRow> rows;
    auto basis = std::make_shared<const GpcBasis>(law, std::min(cfg.order(), 1));
    for (double tau : taus) {
        Stopwatch clock;
        auto state = gamma_initial_state(basis, grid, rho0, m0, positive(cfg, "initial.lambda", 5.0));
        auto setup        = kinetic_setup(cfg, ctx);
        setup.contact.tau = tau;
        std::vector<double> kinetic;
        run_kinetic(state, setup, {dt, t_fin, 1, true}, [&](const KineticState& s) {
            kinetic.push_back(kinetic_statistics(s)[I].rho.mean);
        });
        ClosureRow row;
        row.tau  = tau;
        auto out = open_output(ctx, fmt::format("closure_tau_{}.csv", tag(tau)), cfg);
        out << "t,kinetic_rho_I,macro_rho_I\n";
        for (std::size_t n = 0; n < kinetic.size() && n < ens.mean.size(); ++n) {
            row.sup_abs = std::max(row.sup_abs, std::abs(kinetic[n] - ens.mean[n].rho[I]));
            out << fmt::format("{:.10g},{:.17g},{:.17g}\n", ens.mean[n].t, kinetic[n], ens.mean[n].rho[I]);
        }
        row.sup_rel = macro_peak > 0.0 ? row.sup_abs / macro_peak : row.sup_abs;
        summary << fmt::format("{},{:.10e},{:.10e}\n", tag(tau), row.sup_abs, row.sup_rel);
        spdlog::info("tau = {}: sup discrepancy {:.4e} (relative {:.4e}) in {:.1f} s", tag(tau), row.sup_abs,
                     row.sup_rel, clock.seconds());
        rows.push_back(row);
    }
    for (std::size_t k = 1; k < rows.size(); ++k) {
        checks.require(rows[k].sup_abs < rows[k - 1].sup_abs,
                       fmt::format("discrepancy at tau = {} is not below tau = {}", tag(rows[k].tau),
                                   tag(rows[k - 1].tau)));
    }
    if (cfg.has("closure.tolerance")) {
        const double tol = cfg.get_double("closure.tolerance", 0.02);
        checks.require(rows.back().sup_rel < tol, fmt::format("relative discrepancy {:.3e} at tau = {} >= {}",
                                                              rows.back().sup_rel, tag(rows.back().tau), tol));
    }
    return rows;
}

namespace
{

SeriesSource series_source(const Config& cfg, const std::string& data_override)
{
    SeriesSource src;
    const auto fmt_name = cfg.get_string("calibration.format", "simple");
    if (fmt_name == "simple") {
        src.format = SeriesFormat::SimpleCsv;
    }
    else if (fmt_name == "jhu") {
        src.format = SeriesFormat::JhuGlobalCsv;
    }
    else {
        throw Error(ErrorKind::Config, "calibration.format must be simple or jhu");
    }
    // relative data paths are taken from the config file's directory
    const auto base    = fs::path(cfg.origin()).parent_path();
    auto resolve       = [&](const std::string& p) {
        if (p.empty() || fs::path(p).is_absolute()) {
            return p;
        }
        return (base / p).string();
    };
    src.path = data_override.empty() ? resolve(cfg.get_string("calibration.data", "")) : data_override;
    if (src.path.empty()) {
        throw Error(ErrorKind::Config, "calibration.data is required");
    }
    src.recovered_path = resolve(cfg.get_string("calibration.recovered", ""));
    src.deaths_path    = resolve(cfg.get_string("calibration.deaths", ""));
    src.region         = cfg.get_string("calibration.region", "Italy");
    src.population     = positive(cfg, "calibration.population", 59.64e6);
    src.fractions      = cfg.get_bool("calibration.fractions", true);
    const auto measure = cfg.get_string("calibration.measure", "active");
    if (measure == "active") {
        src.measure = InfectedMeasure::Active;
    }
    else if (measure == "cumulative") {
        src.measure = InfectedMeasure::Cumulative;
    }
    else {
        throw Error(ErrorKind::Config, "calibration.measure must be active or cumulative");
    }
    return src;
}

CalibSetup calib_setup(const Config& cfg)
{
    CalibSetup s;
    s.t0            = parse_date(cfg.get_string("calibration.t0", "2020-02-24"));
    s.t_lockdown    = parse_date(cfg.get_string("calibration.t_lockdown", "2020-03-09"));
    s.theta         = cfg.get_double("calibration.theta", s.theta);
    s.zeta          = cfg.get_double("calibration.zeta", s.zeta);
    s.gamma         = cfg.get_double("calibration.gamma", s.gamma);
    s.m_infected    = cfg.get_double("calibration.m_infected", s.m_infected);
    s.m0            = cfg.get_double("calibration.m0", s.m0);
    s.seed_persons  = cfg.get_double("calibration.seed_persons", s.seed_persons);
    s.dt            = cfg.get_double("calibration.dt", s.dt);
    s.beta_bounds   = {cfg.get_double("calibration.beta_min", s.beta_bounds.first),
                       cfg.get_double("calibration.beta_max", s.beta_bounds.second)};
    s.lambda_bounds = {cfg.get_double("calibration.lambda_min", s.lambda_bounds.first),
                       cfg.get_double("calibration.lambda_max", s.lambda_bounds.second)};
    s.restarts      = cfg.get_int("calibration.restarts", s.restarts);
    try {
        s.validate();
    }
    catch (const Error& e) {
        throw Error(ErrorKind::Config, std::string("calibration: ") + e.what());
    }
    return s;
}

TargetSetup target_setup(const Config& cfg, Selective sel)
{
    TargetSetup t;
    t.selective  = sel;
    t.nu         = positive(cfg, "calibration.nu", t.nu);
    t.k_left     = cfg.get_int("calibration.k_left", t.k_left);
    t.k_right    = cfg.get_int("calibration.k_right", t.k_right);
    t.x_max      = positive(cfg, "calibration.x_max", t.x_max);
    t.warm_start = positive(cfg, "calibration.warm_start", t.warm_start);
    t.contact    = cfg.contact();
    if (cfg.has("calibration.t_final")) {
        t.t_final = parse_date(cfg.get_string("calibration.t_final", ""));
    }
    return t;
}

fs::path fit_path(const RunContext& ctx, double p)
{
    return ctx.out_dir / fmt::format("fit_p{}.json", tag(p));
}

std::string selective_label(Selective s)
{
    return s == Selective::SqrtX ? "sqrtx" : "uniform";
}

FitResult read_fit(const RunContext& ctx, double p)
{
    const auto path = fit_path(ctx, p);
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Config,
                    fmt::format("{} not found; run 'kec calibrate --stage pre' with the same --out-dir first",
                                path.string()));
    }
    nlohmann::json j;
    try {
        in >> j;
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    return fit_from_json(j);
}

std::vector<TargetWindow> read_targets(const RunContext& ctx, const std::string& label, double p,
                                       const EpiSeries& series, const TargetSetup& ts)
{
    const auto path = ctx.out_dir / fmt::format("targets_{}_p{}.csv", label, tag(p));
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Config,
                    fmt::format("{} not found; run 'kec calibrate --stage targets' with the same --out-dir first",
                                path.string()));
    }
    std::vector<TargetWindow> windows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("window_start", 0) == 0) {
            continue;
        }
        std::stringstream ss(line);
        std::string date, xt;
        std::getline(ss, date, ',');
        std::getline(ss, xt, ',');
        TargetWindow w;
        w.start    = parse_date(date);
        w.x_target = std::stod(xt);
        windows.push_back(w);
    }
    if (windows.empty()) {
        throw Error(ErrorKind::Data, path.string() + ": no windows");
    }
    const int width = ts.k_left + ts.k_right;
    const Date last = ts.t_final.value_or(series.dates.back());
    for (std::size_t k = 0; k < windows.size(); ++k) {
        windows[k].end  = k + 1 < windows.size() ? windows[k + 1].start : std::min(windows[k].start + std::chrono::days{width}, last);
        windows[k].full = (windows[k].end - windows[k].start).count() == width;
    }
    return windows;
}

void write_trajectory(std::ofstream& out, const DailyTrajectory& traj, const EpiSeries& series)
{
    out << "date,rho_I,rho_I_min,rho_I_max,rho_R,data_I,data_R\n";
    for (std::size_t d = 0; d < traj.dates.size(); ++d) {
        const auto k = series.index_of(traj.dates[d]);
        out << fmt::format("{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n", format_date(traj.dates[d]),
                           traj.mean[d].rho[I], traj.rho_i_min[d], traj.rho_i_max[d], traj.mean[d].rho[R],
                           series.infected[k], series.recovered[k]);
    }
}

} // namespace

CalibrateReport cmd_calibrate(const Config& cfg, const RunContext& ctx, CalibStage stage, CheckList& checks,
                              const std::string& data_override)
{
    const auto series = load_series(series_source(cfg, data_override)).as_fractions();
    const auto ps     = cfg.get_list("calibration.p", {0.0, 0.5, 1.0});
    CalibrateReport rep;

    if (stage == CalibStage::Pre) {
        const auto base = calib_setup(cfg);
        auto summary    = open_output(ctx, "pre_summary.csv", cfg);
        summary << "p,beta,lambda,objective,converged\n";
        for (double p : ps) {
            auto setup = base;
            setup.p    = p;
            Stopwatch clock;
            const auto fit = fit_unconstrained(series, setup);
            auto j         = to_json(fit);
            j["provenance"] = {{"version", kVersion},
                               {"config_sha256", cfg.sha256()},
                               {"infected_measure", cfg.get_string("calibration.measure", "active")},
                               {"normalization", "fractions of population"}};
            fs::create_directories(ctx.out_dir);
            std::ofstream(fit_path(ctx, p)) << j.dump(2) << '\n';
            summary << fmt::format("{},{:.10g},{:.10g},{:.10e},{}\n", tag(p), fit.beta_hat, fit.lambda_hat,
                                   fit.objective, fit.converged ? "true" : "false");
            spdlog::info("p = {}: beta = {:.6g}, lambda = {:.6g}, objective {:.4e} ({:.1f} s)", tag(p), fit.beta_hat,
                         fit.lambda_hat, fit.objective, clock.seconds());
            checks.require(fit.converged, fmt::format("p = {}: optimizer did not converge", tag(p)));
            rep.fits.push_back(fit);
        }
        return rep;
    }

    const auto selectives = cfg.get_string_list("calibration.selective", {"uniform", "sqrtx"});
    if (stage == CalibStage::Targets) {
        for (double p : ps) {
            const auto fit = read_fit(ctx, p);
            rep.fits.push_back(fit);
            for (const auto& name : selectives) {
                const auto sel = parse_selective(name);
                const auto ts  = target_setup(cfg, sel);
                const auto res = fit_targets(series, fit, ts);
                auto out       = open_output(ctx, fmt::format("targets_{}_p{}.csv", selective_label(sel), tag(p)), cfg);
                write_targets_csv(out, res.windows);
                auto traj = open_output(ctx, fmt::format("trajectory_{}_p{}.csv", selective_label(sel), tag(p)), cfg);
                write_trajectory(traj, res.trajectory, series);
                for (const auto& w : res.windows) {
                    checks.require(!w.degenerate, fmt::format("{} p = {}: degenerate window at {}", name, tag(p),
                                                              format_date(w.start)));
                }
                rep.targets.emplace_back(fmt::format("{}_p{}", selective_label(sel), tag(p)), res.windows);
            }
        }
        return rep;
    }

    // retrospective swap: uniform targets of each p, replayed with the selective control
    auto peaks = open_output(ctx, "retro_peaks.csv", cfg);
    peaks << "p,peak_uniform,peak_sqrtx,reduction,peak_data\n";
    for (double p : ps) {
        const auto fit     = read_fit(ctx, p);
        const auto ts      = target_setup(cfg, Selective::Uniform);
        const auto windows = read_targets(ctx, "uniform", p, series, ts);
        auto rows          = retrospective_swap(series, fit, windows, ts.nu, {p});
        auto& row          = rows.front();
        peaks << fmt::format("{},{:.10e},{:.10e},{:.10g},{:.10e}\n", tag(p), row.peak_fit, row.peak_swap,
                             1.0 - row.peak_swap / row.peak_fit, row.peak_data);
        auto band = open_output(ctx, fmt::format("retro_band_p{}.csv", tag(p)), cfg);
        write_trajectory(band, row.swap, series);
        checks.require(row.peak_swap < row.peak_fit,
                       fmt::format("p = {}: selective swap does not lower the peak", tag(p)));
        rep.retro.push_back(std::move(row));
    }
    return rep;
}

namespace
{

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Data:
        return 2;
    case ErrorKind::Numerical:
    case ErrorKind::Optimization:
        return 3;
    }
    return 3;
}

void configure_logging()
{
    auto logger = spdlog::stderr_color_mt("kec");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("KEC_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

} // namespace

int cli_main(int argc, char** argv)
{
    configure_logging();
    CLI::App app{"Kinetic epidemic models with uncertain contact tails"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    bool assert_mode    = false;
    unsigned jobs       = 1;
    std::string stage   = "pre";
    std::string data;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "scenario configuration file")->required();
        sub->add_option("--out-dir", out_dir, "directory for CSV/JSON outputs");
        sub->add_flag("--assert", assert_mode, "exit with status 4 when a built-in check fails");
        sub->add_option("--jobs", jobs, "maximum worker threads")->check(CLI::Range(1u, 256u));
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [cmd, help] : std::vector<std::pair<std::string, std::string>>{
             {"equilibrium", "solved vs analytic equilibrium densities"},
             {"kinetic", "stochastic Galerkin kinetic SEIR run"},
             {"sg-convergence", "spectral convergence table"},
             {"macro", "closed macroscopic SEIR system"},
             {"closure-check", "kinetic vs macroscopic discrepancy over tau"},
             {"calibrate", "fit to epidemic data"}}) {
        subs[cmd] = app.add_subcommand(cmd, help);
        add_common(subs[cmd]);
    }
    subs["calibrate"]
        ->add_option("--stage", stage, "pre, targets or retro")
        ->check(CLI::IsMember({"pre", "targets", "retro"}));
    subs["calibrate"]->add_option("--data", data, "override calibration.data");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const auto cfg = Config::load(config_path);
        RunContext ctx{out_dir, assert_mode, jobs};
        CheckList checks;
        if (subs["equilibrium"]->parsed()) {
            cmd_equilibrium(cfg, ctx, checks);
        }
        else if (subs["kinetic"]->parsed()) {
            cmd_kinetic(cfg, ctx, checks);
        }
        else if (subs["sg-convergence"]->parsed()) {
            cmd_sg_convergence(cfg, ctx, checks);
        }
        else if (subs["macro"]->parsed()) {
            cmd_macro(cfg, ctx, checks);
        }
        else if (subs["closure-check"]->parsed()) {
            cmd_closure_check(cfg, ctx, checks);
        }
        else {
            const auto st = stage == "pre" ? CalibStage::Pre : stage == "targets" ? CalibStage::Targets
                                                                                   : CalibStage::Retro;
            cmd_calibrate(cfg, ctx, st, checks, data);
        }
        if (assert_mode && !checks.passed()) {
            for (const auto& f : checks.failures) {
                std::cerr << "check failed: " << f << '\n';
            }
            return 4;
        }
        return 0;
    }
    catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_code(e.kind());
    }
    catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 3;
    }
}

} // namespace kec
