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

#include "kec/calib.h"
#include "kec/error.h"

#include <boost/tokenizer.hpp>
#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_min.h>
#include <gsl/gsl_multimin.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>

namespace kec
{

using enum Compartment;
using namespace std::chrono;

namespace
{

[[noreturn]] void throw_data(const std::string& msg)
{
    throw Error(ErrorKind::Data, msg);
}

std::vector<std::string> split_csv(const std::string& line)
{
    using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
    std::string clean = line;
    if (!clean.empty() && clean.back() == '\r') {
        clean.pop_back();
    }
    std::vector<std::string> out;
    try {
        Tok tok(clean);
        out.assign(tok.begin(), tok.end());
    }
    catch (const boost::escaped_list_error& e) {
        throw_data(std::string("malformed CSV: ") + e.what());
    }
    return out;
}

double parse_count(const std::string& field, const std::string& where)
{
    std::size_t used = 0;
    double v         = 0.0;
    try {
        v = std::stod(field, &used);
    }
    catch (const std::exception&) {
        throw_data(fmt::format("{}: '{}' is not a number", where, field));
    }
    if (used != field.size() || !std::isfinite(v)) {
        throw_data(fmt::format("{}: '{}' is not a number", where, field));
    }
    if (v < 0.0) {
        throw_data(fmt::format("{}: negative count {}", where, field));
    }
    return v;
}

std::ifstream open_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw_data("cannot open " + path);
    }
    return in;
}

EpiSeries load_simple(const SeriesSource& src)
{
    auto in = open_file(src.path);
    std::string line;
    if (!std::getline(in, line)) {
        throw_data(src.path + ": empty file");
    }
    const auto header = split_csv(line);
    if (header != std::vector<std::string>{"date", "infected", "recovered"}) {
        throw_data(src.path + ":1: expected header date,infected,recovered");
    }
    EpiSeries s;
    s.region     = src.region;
    s.population = src.population;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty() || line == "\r" || line[0] == '#') {
            continue;
        }
        const auto where  = fmt::format("{}:{}", src.path, lineno);
        const auto fields = split_csv(line);
        if (fields.size() != 3) {
            throw_data(where + ": expected 3 fields");
        }
        try {
            s.dates.push_back(parse_date(fields[0]));
        }
        catch (const Error& e) {
            throw_data(where + ": " + e.what());
        }
        s.infected.push_back(parse_count(fields[1], where));
        s.recovered.push_back(parse_count(fields[2], where));
    }
    return s;
}

struct WideRow {
    std::vector<Date> dates;
    std::vector<double> values;
};

// The country-level row of a JHU global table (province column empty).
WideRow load_wide(const std::string& path, const std::string& region)
{
    auto in = open_file(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw_data(path + ": empty file");
    }
    const auto header = split_csv(line);
    if (header.size() < 5 || header[0] != "Province/State" || header[1] != "Country/Region") {
        throw_data(path + ":1: not a JHU global time-series table");
    }
    WideRow row;
    for (std::size_t k = 4; k < header.size(); ++k) {
        try {
            row.dates.push_back(parse_date(header[k]));
        }
        catch (const Error& e) {
            throw_data(fmt::format("{}:1: column {}: {}", path, k + 1, e.what()));
        }
    }
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        const auto fields = split_csv(line);
        if (fields.size() < 2 || fields[1] != region || !fields[0].empty()) {
            continue;
        }
        if (fields.size() != header.size()) {
            throw_data(fmt::format("{}:{}: expected {} fields, got {}", path, lineno, header.size(), fields.size()));
        }
        const auto where = fmt::format("{}:{}", path, lineno);
        for (std::size_t k = 4; k < fields.size(); ++k) {
            row.values.push_back(parse_count(fields[k], where));
        }
        return row;
    }
    throw_data(fmt::format("{}: region '{}' not found", path, region));
}

std::string sibling_table(const std::string& confirmed, const std::string& kind)
{
    const auto pos = confirmed.rfind("confirmed");
    if (pos == std::string::npos) {
        throw_data("cannot derive the " + kind + " table from " + confirmed + "; set it explicitly");
    }
    return confirmed.substr(0, pos) + kind + confirmed.substr(pos + 9);
}

EpiSeries load_jhu(const SeriesSource& src)
{
    const auto confirmed = load_wide(src.path, src.region);
    const auto recovered =
        load_wide(src.recovered_path.empty() ? sibling_table(src.path, "recovered") : src.recovered_path, src.region);
    std::optional<WideRow> deaths;
    if (!src.deaths_path.empty()) {
        deaths = load_wide(src.deaths_path, src.region);
    }
    // align on the common date range
    std::map<Date, std::array<double, 3>> merged;
    for (std::size_t k = 0; k < confirmed.dates.size(); ++k) {
        merged[confirmed.dates[k]] = {confirmed.values[k], -1.0, deaths ? -1.0 : 0.0};
    }
    for (std::size_t k = 0; k < recovered.dates.size(); ++k) {
        if (auto it = merged.find(recovered.dates[k]); it != merged.end()) {
            it->second[1] = recovered.values[k];
        }
    }
    if (deaths) {
        for (std::size_t k = 0; k < deaths->dates.size(); ++k) {
            if (auto it = merged.find(deaths->dates[k]); it != merged.end()) {
                it->second[2] = deaths->values[k];
            }
        }
    }
    EpiSeries s;
    s.region     = src.region;
    s.population = src.population;
    for (const auto& [date, v] : merged) {
        if (v[1] < 0.0 || v[2] < 0.0) {
            continue;
        }
        const double removed = v[1] + v[2];
        const double infected = src.measure == InfectedMeasure::Active ? v[0] - removed : v[0];
        if (infected < 0.0) {
            throw_data(fmt::format("{}: negative active cases on {}", src.region, format_date(date)));
        }
        s.dates.push_back(date);
        s.infected.push_back(infected);
        s.recovered.push_back(removed);
    }
    return s;
}

// Deterministic two-dimensional Latin hypercube: stratum centres paired by a fixed permutation.
std::vector<std::array<double, 2>> latin_hypercube(int n)
{
    std::vector<std::array<double, 2>> pts;
    for (int k = 0; k < n; ++k) {
        const int j = (k * (n / 2 + 1) + n / 2) % n;
        pts.push_back({(k + 0.5) / n, (j + 0.5) / n});
    }
    return pts;
}

/// Bernoulli mixture of macro trajectories advanced one segment at a time.
class Mixture
{
public:
    Mixture(const CalibSetup& setup, const EpiSeries& series, double beta, double lambda, double p)
    {
        const auto law  = UncertaintyLaw::bernoulli(p);
        const double ws[2] = {p, 1.0 - p};
        const double zs[2] = {1.0, 0.0};
        const auto init = calib_initial_state(setup, series);
        for (int a = 0; a < 2; ++a) {
            if (ws[a] <= 0.0) {
                continue;
            }
            const double delta = law.delta(zs[a]);
            MacroModel model{EpiParams{beta, setup.zeta, setup.gamma}, lambda_factor(delta, lambda), ControlSpec::off(),
                             setup.m_infected};
            m_atoms.push_back({ws[a], delta, model, init});
        }
        m_dt     = setup.dt;
        m_stride = static_cast<int>(std::llround(1.0 / setup.dt));
        if (std::abs(m_stride * setup.dt - 1.0) > 1e-12) {
            throw_invalid("calibration dt must divide one day");
        }
    }

    /// Advances `days` days with the given control; returns the daily mixture states, excluding the start.
    std::vector<MacroState> advance(int days, const ControlSpec& control, std::vector<double>* lo = nullptr,
                                    std::vector<double>* hi = nullptr)
    {
        std::vector<MacroState> mean(static_cast<std::size_t>(days));
        if (lo) {
            lo->assign(mean.size(), std::numeric_limits<double>::infinity());
            hi->assign(mean.size(), -std::numeric_limits<double>::infinity());
        }
        for (auto& atom : m_atoms) {
            atom.model.control = control;
            const auto traj    = rk4_integrate(atom.state, atom.model, {m_dt, static_cast<double>(days), m_stride});
            for (std::size_t d = 0; d < mean.size(); ++d) {
                const auto& s = traj[d + 1];
                mean[d].t     = s.t;
                for (auto c : all_compartments) {
                    mean[d].rho[c] += atom.weight * s.rho[c];
                    mean[d].m[c] += atom.weight * s.m[c];
                }
                if (lo) {
                    (*lo)[d] = std::min((*lo)[d], s.rho[I]);
                    (*hi)[d] = std::max((*hi)[d], s.rho[I]);
                }
            }
            atom.state = traj.back();
        }
        return mean;
    }

    struct Atom {
        double weight;
        double delta;
        MacroModel model;
        MacroState state;
    };
    const std::vector<Atom>& atoms() const
    {
        return m_atoms;
    }

private:
    std::vector<Atom> m_atoms;
    double m_dt  = 0.05;
    int m_stride = 20;
};

std::vector<double> column(const std::vector<MacroState>& states, Compartment c)
{
    std::vector<double> out;
    out.reserve(states.size());
    for (const auto& s : states) {
        out.push_back(s.rho[c]);
    }
    return out;
}

EpiSeries require_fractions(const EpiSeries& series)
{
    return series.fractions ? series : series.as_fractions();
}

const char* selective_name(Selective s)
{
    switch (s) {
    case Selective::Off:
        return "off";
    case Selective::Uniform:
        return "uniform";
    case Selective::SqrtX:
        return "sqrtx";
    }
    return "off";
}

} // namespace

Date parse_date(const std::string& text)
{
    int y = 0, m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &tail) == 3) {
        // ISO form
    }
    else if (std::sscanf(text.c_str(), "%d/%d/%d%c", &m, &d, &y, &tail) == 3) {
        if (y < 100) {
            y += 2000;
        }
    }
    else {
        throw_data("unrecognised date '" + text + "'");
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw_data("invalid date '" + text + "'");
    }
    return sys_days{ymd};
}

std::string format_date(Date d)
{
    const year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

std::size_t EpiSeries::index_of(Date d) const
{
    if (dates.empty() || d < dates.front() || d > dates.back()) {
        throw_data(fmt::format("{} is outside the data range of {}", format_date(d), region));
    }
    return static_cast<std::size_t>((d - dates.front()).count());
}

EpiSeries EpiSeries::as_fractions() const
{
    if (fractions) {
        return *this;
    }
    EpiSeries out = *this;
    for (auto& v : out.infected) {
        v /= population;
    }
    for (auto& v : out.recovered) {
        v /= population;
    }
    out.fractions = true;
    return out;
}

void EpiSeries::validate() const
{
    if (dates.empty()) {
        throw_data("empty series for " + region);
    }
    if (infected.size() != dates.size() || recovered.size() != dates.size()) {
        throw_data("series columns have different lengths");
    }
    if (!(population > 0.0)) {
        throw_data("population must be positive");
    }
    for (std::size_t k = 1; k < dates.size(); ++k) {
        if ((dates[k] - dates[k - 1]).count() != 1) {
            throw_data(fmt::format("dates must be consecutive days: {} follows {}", format_date(dates[k]),
                                   format_date(dates[k - 1])));
        }
    }
    for (std::size_t k = 0; k < dates.size(); ++k) {
        if (!(infected[k] >= 0.0) || !(recovered[k] >= 0.0)) {
            throw_data("negative count on " + format_date(dates[k]));
        }
    }
}

EpiSeries load_series(const SeriesSource& source)
{
    if (!(source.population > 0.0)) {
        throw_invalid("population must be positive");
    }
    auto s = source.format == SeriesFormat::SimpleCsv ? load_simple(source) : load_jhu(source);
    s.validate();
    if (source.fractions) {
        s = s.as_fractions();
    }
    return s;
}

void CalibSetup::validate() const
{
    if (!(t_lockdown > t0)) {
        throw_invalid("the lockdown date must follow t0");
    }
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw_invalid("theta must lie in [0, 1]");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw_invalid("p must lie in [0, 1]");
    }
    if (!(beta_bounds.first >= 0.0 && beta_bounds.second > beta_bounds.first)) {
        throw_invalid("invalid beta bounds");
    }
    if (!(lambda_bounds.first > 1.0 && lambda_bounds.second > lambda_bounds.first)) {
        throw_invalid("lambda bounds must satisfy 1 < lo < hi");
    }
    if (!(zeta >= 0.0 && gamma >= 0.0 && m_infected > 0.0 && m0 > 0.0 && seed_persons >= 0.0 && dt > 0.0)) {
        throw_invalid("invalid fixed calibration parameters");
    }
    if (restarts < 1) {
        throw_invalid("at least one optimizer start is needed");
    }
}

double relative_l2(std::span<const double> model, std::span<const double> data)
{
    if (model.size() != data.size()) {
        throw_invalid("relative norm needs equal lengths");
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        num += (model[k] - data[k]) * (model[k] - data[k]);
        den += data[k] * data[k];
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

double weighted_misfit(std::span<const double> rho_i, std::span<const double> rho_r, std::span<const double> data_i,
                       std::span<const double> data_r, double theta)
{
    return (1.0 - theta) * relative_l2(rho_i, data_i) + theta * relative_l2(rho_r, data_r);
}

MacroState calib_initial_state(const CalibSetup& setup, const EpiSeries& series)
{
    const double seed = setup.seed_persons / series.population;
    MacroState s;
    s.rho = {{1.0 - 3.0 * seed, seed, seed, seed}};
    s.m   = {{setup.m0, setup.m0, setup.m_infected, setup.m0}};
    return s;
}

double pre_lockdown_objective(const EpiSeries& series, const CalibSetup& setup, double beta, double lambda)
{
    const std::size_t i0 = series.index_of(setup.t0);
    const std::size_t iL = series.index_of(setup.t_lockdown);
    Mixture mix(setup, series, beta, lambda, setup.p);
    auto states = mix.advance(static_cast<int>(iL - i0), ControlSpec::off());
    states.insert(states.begin(), calib_initial_state(setup, series));
    const auto ri = column(states, I);
    const auto rr = column(states, R);
    const std::span<const double> di(series.infected.data() + i0, ri.size());
    const std::span<const double> dr(series.recovered.data() + i0, rr.size());
    return weighted_misfit(ri, rr, di, dr, setup.theta);
}

FitResult fit_unconstrained(const EpiSeries& raw, const CalibSetup& setup)
{
    setup.validate();
    const auto series = require_fractions(raw);
    series.index_of(setup.t0);
    series.index_of(setup.t_lockdown);

    struct Ctx {
        const EpiSeries* series;
        const CalibSetup* setup;
    } ctx{&series, &setup};
    const auto [blo, bhi] = setup.beta_bounds;
    const auto [llo, lhi] = setup.lambda_bounds;

    // unit-box coordinates; points outside are projected and penalised
    auto objective = [](const gsl_vector* u, void* params) -> double {
        const auto* c  = static_cast<const Ctx*>(params);
        const auto& st = *c->setup;
        double pen     = 0.0;
        double x[2];
        for (int k = 0; k < 2; ++k) {
            const double v = gsl_vector_get(u, static_cast<std::size_t>(k));
            const double q = std::clamp(v, 0.0, 1.0);
            pen += (v - q) * (v - q);
            x[k] = q;
        }
        const double beta   = st.beta_bounds.first + x[0] * (st.beta_bounds.second - st.beta_bounds.first);
        const double lambda = st.lambda_bounds.first + x[1] * (st.lambda_bounds.second - st.lambda_bounds.first);
        try {
            return pre_lockdown_objective(*c->series, st, beta, lambda) + 1e2 * pen;
        }
        catch (const Error&) {
            return std::numeric_limits<double>::max();
        }
    };

    gsl_multimin_function fn{objective, 2, &ctx};
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> mini(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2), gsl_multimin_fminimizer_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(2), gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(2), gsl_vector_free);

    FitResult out;
    out.setup      = setup;
    out.region     = series.region;
    out.population = series.population;
    out.objective  = std::numeric_limits<double>::infinity();
    for (const auto& start : latin_hypercube(setup.restarts)) {
        RestartRecord rec;
        rec.start_beta   = blo + start[0] * (bhi - blo);
        rec.start_lambda = llo + start[1] * (lhi - llo);
        gsl_vector_set(x.get(), 0, start[0]);
        gsl_vector_set(x.get(), 1, start[1]);
        // two passes: a fresh simplex around the first optimum guards against collapse
        for (int pass = 0; pass < 2; ++pass) {
            gsl_vector_set_all(step.get(), pass == 0 ? 0.1 : 0.02);
            gsl_multimin_fminimizer_set(mini.get(), &fn, x.get(), step.get());
            int status = GSL_CONTINUE;
            int iter   = 0;
            while (status == GSL_CONTINUE && iter < setup.max_iterations) {
                ++iter;
                if (gsl_multimin_fminimizer_iterate(mini.get()) != GSL_SUCCESS) {
                    break;
                }
                status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(mini.get()), setup.simplex_tol);
            }
            rec.iterations += iter;
            rec.converged = status == GSL_SUCCESS;
            gsl_vector_memcpy(x.get(), gsl_multimin_fminimizer_x(mini.get()));
        }
        const double u0  = std::clamp(gsl_vector_get(x.get(), 0), 0.0, 1.0);
        const double u1  = std::clamp(gsl_vector_get(x.get(), 1), 0.0, 1.0);
        rec.beta         = blo + u0 * (bhi - blo);
        rec.lambda       = llo + u1 * (lhi - llo);
        rec.objective    = pre_lockdown_objective(series, setup, rec.beta, rec.lambda);
        spdlog::debug("restart from ({:.4g}, {:.4g}) -> ({:.6g}, {:.6g}) cost {:.6g} after {} iterations",
                      rec.start_beta, rec.start_lambda, rec.beta, rec.lambda, rec.objective, rec.iterations);
        if (rec.objective < out.objective) {
            out.objective  = rec.objective;
            out.beta_hat   = rec.beta;
            out.lambda_hat = rec.lambda;
            out.converged  = rec.converged;
        }
        out.trace.push_back(rec);
    }
    if (!out.converged) {
        spdlog::warn("pre-lockdown fit did not converge; reporting the best point found");
    }
    return out;
}

nlohmann::ordered_json to_json(const FitResult& fit)
{
    const auto& s = fit.setup;
    nlohmann::ordered_json j;
    j["beta_hat"]   = fit.beta_hat;
    j["lambda_hat"] = fit.lambda_hat;
    j["objective"]  = fit.objective;
    j["converged"]  = fit.converged;
    j["region"]     = fit.region;
    j["population"] = fit.population;
    j["p"]          = s.p;
    j["theta"]      = s.theta;
    j["window"]     = {{"t0", format_date(s.t0)}, {"t_lockdown", format_date(s.t_lockdown)}};
    j["bounds"]     = {{"beta", {s.beta_bounds.first, s.beta_bounds.second}},
                       {"lambda", {s.lambda_bounds.first, s.lambda_bounds.second}}};
    j["fixed"]      = {{"zeta", s.zeta},         {"gamma", s.gamma},   {"m_infected", s.m_infected},
                       {"m0", s.m0},             {"seed_persons", s.seed_persons}, {"dt", s.dt}};
    j["optimizer"]  = {{"method", "projected Nelder-Mead"},
                       {"restarts", s.restarts},
                       {"simplex_tol", s.simplex_tol},
                       {"max_iterations", s.max_iterations}};
    auto trace = nlohmann::ordered_json::array();
    for (const auto& r : fit.trace) {
        trace.push_back({{"start", {r.start_beta, r.start_lambda}},
                         {"end", {r.beta, r.lambda}},
                         {"objective", r.objective},
                         {"iterations", r.iterations},
                         {"converged", r.converged}});
    }
    j["trace"] = trace;
    return j;
}

FitResult fit_from_json(const nlohmann::json& j)
{
    try {
        FitResult fit;
        fit.beta_hat     = j.at("beta_hat").get<double>();
        fit.lambda_hat   = j.at("lambda_hat").get<double>();
        fit.objective    = j.at("objective").get<double>();
        fit.converged    = j.at("converged").get<bool>();
        fit.region       = j.at("region").get<std::string>();
        fit.population   = j.at("population").get<double>();
        auto& s          = fit.setup;
        s.p              = j.at("p").get<double>();
        s.theta          = j.at("theta").get<double>();
        s.t0             = parse_date(j.at("window").at("t0").get<std::string>());
        s.t_lockdown     = parse_date(j.at("window").at("t_lockdown").get<std::string>());
        const auto& b    = j.at("bounds");
        s.beta_bounds    = {b.at("beta").at(0).get<double>(), b.at("beta").at(1).get<double>()};
        s.lambda_bounds  = {b.at("lambda").at(0).get<double>(), b.at("lambda").at(1).get<double>()};
        const auto& f    = j.at("fixed");
        s.zeta           = f.at("zeta").get<double>();
        s.gamma          = f.at("gamma").get<double>();
        s.m_infected     = f.at("m_infected").get<double>();
        s.m0             = f.at("m0").get<double>();
        s.seed_persons   = f.at("seed_persons").get<double>();
        s.dt             = f.at("dt").get<double>();
        return fit;
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("invalid fit result: ") + e.what());
    }
}

namespace
{

struct WindowPlan {
    Date start;
    Date end;
    bool full;
};

std::vector<WindowPlan> plan_windows(const EpiSeries& series, const FitResult& fit, const TargetSetup& setup)
{
    const int width  = setup.k_left + setup.k_right;
    const Date first = fit.setup.t_lockdown + days{1};
    const Date last  = setup.t_final.value_or(series.dates.back());
    series.index_of(first);
    series.index_of(last);
    if (width < 1) {
        throw_invalid("target windows need k_left + k_right >= 1");
    }
    std::vector<WindowPlan> plan;
    for (Date s = first; s < last; s += days{width}) {
        const Date e = std::min(s + days{width}, last);
        plan.push_back({s, e, (e - s).count() == width});
    }
    if (plan.empty()) {
        throw_data("no lockdown window fits in the data range");
    }
    return plan;
}

ControlSpec shared_control(Selective s, double x_target, double nu)
{
    return ControlSpec::shared_target(s, x_target, nu);
}

// Advances the mixture from t0 up to the first lockdown window.
Mixture mixture_at_lockdown(const EpiSeries& series, const FitResult& fit, double p,
                            std::vector<MacroState>* history = nullptr)
{
    Mixture mix(fit.setup, series, fit.beta_hat, fit.lambda_hat, p);
    const int days_pre = static_cast<int>((fit.setup.t_lockdown - fit.setup.t0).count()) + 1;
    auto pre           = mix.advance(days_pre, ControlSpec::off());
    if (history) {
        *history = std::move(pre);
    }
    return mix;
}

RestrictionCost window_cost(const Mixture& mix, const FitResult& fit, const TargetSetup& setup,
                            const ControlSpec& control)
{
    ContactParams contact = setup.contact;
    contact.sigma2        = contact.mu / fit.lambda_hat;
    const auto grid       = Grid1D::with_spacing(setup.cost_x_max, setup.cost_dx);
    RestrictionCost total;
    for (const auto& atom : mix.atoms()) {
        PerCompartment<std::vector<double>> dens;
        for (auto c : all_compartments) {
            const auto law = control.for_compartment(c);
            dens[c] = controlled_equilibrium_density(contact, DeltaValue(atom.delta), atom.state.m[c], law, grid);
            for (auto& v : dens[c]) {
                v *= atom.state.rho[c];
            }
        }
        const auto cost = restriction_cost(dens, grid, control);
        for (auto c : all_compartments) {
            total.per_compartment[c] += atom.weight * cost.per_compartment[c];
        }
        total.total += atom.weight * cost.total;
    }
    return total;
}

struct Minimum {
    double x;
    double f;
    bool bracketed;
};

// Bounded 1-D minimisation: Brent from a bracket around the warm start, else a scan and golden section.
Minimum minimize_1d(const std::function<double(double)>& f, double lo, double hi, double warm, double tol)
{
    gsl_function gf{[](double x, void* p) { return (*static_cast<const std::function<double(double)>*>(p))(x); },
                    const_cast<std::function<double(double)>*>(&f)};
    auto run = [&](const gsl_min_fminimizer_type* type, double a, double m, double b, double fa, double fm,
                   double fb) {
        std::unique_ptr<gsl_min_fminimizer, decltype(&gsl_min_fminimizer_free)> mini(gsl_min_fminimizer_alloc(type),
                                                                                     gsl_min_fminimizer_free);
        gsl_min_fminimizer_set_with_values(mini.get(), &gf, m, fm, a, fa, b, fb);
        int status = GSL_CONTINUE;
        for (int it = 0; it < 200 && status == GSL_CONTINUE; ++it) {
            gsl_min_fminimizer_iterate(mini.get());
            status = gsl_min_test_interval(gsl_min_fminimizer_x_lower(mini.get()),
                                           gsl_min_fminimizer_x_upper(mini.get()), 0.0, tol);
        }
        return std::pair{gsl_min_fminimizer_x_minimum(mini.get()), gsl_min_fminimizer_f_minimum(mini.get())};
    };

    const double w = std::clamp(warm, lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo));
    const double a = std::max(lo + 1e-6 * (hi - lo), 0.9 * w);
    const double b = std::min(hi, 1.1 * w);
    const double fa = f(a), fw = f(w), fb = f(b);
    if (fw < fa && fw < fb) {
        const auto [x, fx] = run(gsl_min_fminimizer_brent, a, w, b, fa, fw, fb);
        return {x, fx, true};
    }
    constexpr int n_scan = 64;
    std::vector<double> xs(n_scan), fs(n_scan);
    for (int k = 0; k < n_scan; ++k) {
        xs[k] = lo + (hi - lo) * (k + 1) / n_scan;
        fs[k] = f(xs[k]);
    }
    const auto best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    if (best == 0 || best == n_scan - 1) {
        return {xs[best], fs[best], false};
    }
    if (!(fs[best] < fs[best - 1] && fs[best] < fs[best + 1])) {
        return {xs[best], fs[best], false};
    }
    const auto [x, fx] = run(gsl_min_fminimizer_goldensection, xs[best - 1], xs[best], xs[best + 1], fs[best - 1],
                             fs[best], fs[best + 1]);
    return {x, fx, false};
}

} // namespace

TargetFit fit_targets(const EpiSeries& raw, const FitResult& fit, const TargetSetup& setup)
{
    if (setup.selective == Selective::Off) {
        throw_invalid("target fitting needs an active selective function");
    }
    if (!(setup.nu > 0.0) || !(setup.x_max > 0.0)) {
        throw_invalid("target fitting needs nu > 0 and x_max > 0");
    }
    const auto series = require_fractions(raw);
    const auto plan   = plan_windows(series, fit, setup);
    const double theta = fit.setup.theta;

    TargetFit out;
    std::vector<MacroState> history;
    auto mix = mixture_at_lockdown(series, fit, fit.setup.p, &history);
    std::vector<double> lo_hist, hi_hist;
    double warm = setup.warm_start;
    for (const auto& w : plan) {
        const int n_days  = static_cast<int>((w.end - w.start).count());
        const std::size_t i0 = series.index_of(w.start);
        const std::span<const double> di(series.infected.data() + i0 + 1, static_cast<std::size_t>(n_days));
        const std::span<const double> dr(series.recovered.data() + i0 + 1, static_cast<std::size_t>(n_days));
        auto misfit = [&](double x_target) {
            Mixture trial       = mix;
            const auto states   = trial.advance(n_days, shared_control(setup.selective, x_target, setup.nu));
            return weighted_misfit(column(states, I), column(states, R), di, dr, theta);
        };
        const auto best = minimize_1d(misfit, 0.0, setup.x_max, warm, setup.tolerance);

        TargetWindow tw;
        tw.start     = w.start;
        tw.end       = w.end;
        tw.full      = w.full;
        tw.x_target  = best.x;
        tw.misfit    = best.f;
        tw.bracketed = best.bracketed;
        // degenerate when the model itself barely responds to the target
        auto infected_at = [&](double x_target) {
            Mixture trial = mix;
            return column(trial.advance(n_days, shared_control(setup.selective, x_target, setup.nu)), I);
        };
        tw.degenerate = relative_l2(infected_at(setup.x_max / 64.0), infected_at(setup.x_max)) < 1e-6;
        if (tw.degenerate) {
            spdlog::warn("window starting {}: misfit insensitive to the target", format_date(w.start));
        }

        const auto control = shared_control(setup.selective, tw.x_target, setup.nu);
        std::vector<double> lo, hi;
        const auto states = mix.advance(n_days, control, &lo, &hi);
        tw.cost           = window_cost(mix, fit, setup, control);
        history.insert(history.end(), states.begin(), states.end());
        lo_hist.insert(lo_hist.end(), lo.begin(), lo.end());
        hi_hist.insert(hi_hist.end(), hi.begin(), hi.end());
        out.windows.push_back(tw);
        warm = tw.x_target;
        spdlog::debug("window {}..{}: x_T = {:.6g}, misfit {:.4g}", format_date(w.start), format_date(w.end),
                     tw.x_target, tw.misfit);
    }
    out.trajectory = simulate_with_targets(series, fit, fit.setup.p, setup.selective, setup.nu, out.windows);
    return out;
}

DailyTrajectory simulate_with_targets(const EpiSeries& raw, const FitResult& fit, double p, Selective selective,
                                      double nu, const std::vector<TargetWindow>& windows)
{
    const auto series = require_fractions(raw);
    DailyTrajectory out;
    Mixture mix(fit.setup, series, fit.beta_hat, fit.lambda_hat, p);
    auto push = [&](const std::vector<MacroState>& states, const std::vector<double>& lo,
                    const std::vector<double>& hi, Date first) {
        for (std::size_t d = 0; d < states.size(); ++d) {
            out.dates.push_back(first + days{static_cast<int>(d)});
            out.mean.push_back(states[d]);
            out.rho_i_min.push_back(lo[d]);
            out.rho_i_max.push_back(hi[d]);
        }
    };
    const auto init = calib_initial_state(fit.setup, series);
    push({init}, {init.rho[I]}, {init.rho[I]}, fit.setup.t0);
    std::vector<double> lo, hi;
    const int days_pre = static_cast<int>((fit.setup.t_lockdown - fit.setup.t0).count()) + 1;
    push(mix.advance(days_pre, ControlSpec::off(), &lo, &hi), lo, hi, fit.setup.t0 + days{1});
    for (const auto& w : windows) {
        const int n = static_cast<int>((w.end - w.start).count());
        const auto states = mix.advance(n, shared_control(selective, w.x_target, nu), &lo, &hi);
        push(states, lo, hi, w.start + days{1});
    }
    return out;
}

std::vector<RetroRow> retrospective_swap(const EpiSeries& raw, const FitResult& fit,
                                         const std::vector<TargetWindow>& uniform_windows, double nu,
                                         const std::vector<double>& ps, Selective swap_to)
{
    const auto series = require_fractions(raw);
    const std::size_t i0 = series.index_of(fit.setup.t0);
    std::vector<RetroRow> rows;
    for (double p : ps) {
        RetroRow row;
        row.p         = p;
        const auto fitted = simulate_with_targets(series, fit, p, Selective::Uniform, nu, uniform_windows);
        row.swap          = simulate_with_targets(series, fit, p, swap_to, nu, uniform_windows);
        for (std::size_t d = 0; d < fitted.mean.size(); ++d) {
            row.peak_fit  = std::max(row.peak_fit, fitted.mean[d].rho[I]);
            row.peak_swap = std::max(row.peak_swap, row.swap.mean[d].rho[I]);
            if (i0 + d < series.size()) {
                row.peak_data = std::max(row.peak_data, series.infected[i0 + d]);
            }
        }
        spdlog::debug("p = {}: peak E[rho_I] {:.6g} ({}) vs {:.6g} ({})", p, row.peak_fit, "uniform", row.peak_swap,
                     selective_name(swap_to));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_targets_csv(std::ostream& os, const std::vector<TargetWindow>& windows)
{
    os << "window_start,x_T,cost_total,cost_S,cost_E,cost_R\n";
    for (const auto& w : windows) {
        os << fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", format_date(w.start), w.x_target,
                          w.cost.total, w.cost.per_compartment[S], w.cost.per_compartment[E],
                          w.cost.per_compartment[R]);
    }
}

} // namespace kec
