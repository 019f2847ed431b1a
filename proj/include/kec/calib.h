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

#ifndef KEC_CALIB_H
#define KEC_CALIB_H

#include "kec/contact.h"
#include "kec/control.h"
#include "kec/grid.h"
#include "kec/macro.h"

#include <json.hpp>

#include <chrono>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kec
{

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD or the M/D/YY form used by the JHU tables.
Date parse_date(const std::string& text);
std::string format_date(Date d);

enum class SeriesFormat
{
    SimpleCsv, ///< header date,infected,recovered
    JhuGlobalCsv, ///< wide time_series_covid19_*_global.csv tables
};

/// What "infected" means in the data.
enum class InfectedMeasure
{
    Active, ///< confirmed - recovered - deaths
    Cumulative, ///< confirmed
};

/// Daily infected and recovered counts of one region.
struct EpiSeries {
    std::string region;
    std::vector<Date> dates;
    std::vector<double> infected;
    std::vector<double> recovered;
    double population = 1.0;
    bool fractions    = false; ///< counts already divided by population

    std::size_t size() const
    {
        return dates.size();
    }
    /// Position of a date; throws a data error when it is outside the series.
    std::size_t index_of(Date d) const;
    /// Copy with the counts divided by the population.
    EpiSeries as_fractions() const;
    void validate() const;
};

struct SeriesSource {
    SeriesFormat format = SeriesFormat::SimpleCsv;
    std::string path; ///< simple file, or the JHU confirmed table
    std::string recovered_path; ///< JHU only; derived from path when empty
    std::string deaths_path; ///< JHU only; deaths are added to the removed counts when given
    std::string region;
    double population       = 59.64e6;
    bool fractions          = true;
    InfectedMeasure measure = InfectedMeasure::Active;
};

EpiSeries load_series(const SeriesSource& source);

/// Fixed quantities and optimizer settings of the pre-lockdown fit.
struct CalibSetup {
    Date t0;
    Date t_lockdown;
    double zeta         = 1.0 / 3.32;
    double gamma        = 0.1;
    double m_infected   = 3.0; ///< clamp for m_I
    double m0           = 10.0; ///< initial m_S, m_E, m_R
    double seed_persons = 1.0; ///< initial E, I, R in persons
    double theta        = 1e-3;
    double p            = 0.5;
    double dt           = 0.05;
    std::pair<double, double> beta_bounds{0.0, 0.05};
    std::pair<double, double> lambda_bounds{3.0 + 1e-9, 10.0};
    int restarts         = 3;
    double simplex_tol   = 1e-8;
    int max_iterations   = 5000;

    void validate() const;
};

/// Relative L2 distance |a - b| / |b|; plain |a - b| when b vanishes.
double relative_l2(std::span<const double> model, std::span<const double> data);

/// (1 - theta) |rho_I - data_I| + theta |rho_R - data_R| in relative L2.
double weighted_misfit(std::span<const double> rho_i, std::span<const double> rho_r, std::span<const double> data_i,
                       std::span<const double> data_r, double theta);

/// Macro initial state at t0: seed persons in E, I, R, the rest susceptible.
MacroState calib_initial_state(const CalibSetup& setup, const EpiSeries& series);

/// Pre-lockdown objective for given (beta, lambda); series must be in fractions.
double pre_lockdown_objective(const EpiSeries& series, const CalibSetup& setup, double beta, double lambda);

struct RestartRecord {
    double start_beta   = 0.0;
    double start_lambda = 0.0;
    double beta         = 0.0;
    double lambda       = 0.0;
    double objective    = 0.0;
    int iterations      = 0;
    bool converged      = false;
};

struct FitResult {
    double beta_hat   = 0.0;
    double lambda_hat = 0.0;
    double objective  = 0.0;
    bool converged    = false;
    std::vector<RestartRecord> trace;
    CalibSetup setup;
    std::string region;
    double population = 1.0;
};

FitResult fit_unconstrained(const EpiSeries& series, const CalibSetup& setup);

nlohmann::ordered_json to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);

/// Settings of the weekly lockdown-target fit.
struct TargetSetup {
    Selective selective = Selective::Uniform;
    double nu           = 1e-2;
    int k_left          = 3;
    int k_right         = 4;
    double x_max        = 20.0;
    double warm_start   = 10.0;
    double tolerance    = 1e-6;
    std::optional<Date> t_final; ///< defaults to the last data day
    ContactParams contact; ///< used for the cost; sigma2 is set from the fitted lambda
    double cost_x_max  = 500.0;
    double cost_dx     = 0.1;
};

struct TargetWindow {
    Date start;
    Date end;
    double x_target    = 0.0;
    double misfit      = 0.0;
    RestrictionCost cost; ///< expectation over z
    bool full          = true;
    bool degenerate    = false;
    bool bracketed     = true; ///< false when the scan fallback was used
};

struct DailyTrajectory {
    std::vector<Date> dates;
    std::vector<MacroState> mean;
    std::vector<double> rho_i_min; ///< over the atoms with positive weight
    std::vector<double> rho_i_max;
};

struct TargetFit {
    std::vector<TargetWindow> windows;
    DailyTrajectory trajectory;
};

/**
 * Moving-window fit of a shared target x_T after the lockdown. Windows of k_left + k_right days
 * start the day after the lockdown; each is fitted by a bounded one-dimensional search.
 */
TargetFit fit_targets(const EpiSeries& series, const FitResult& fit, const TargetSetup& setup);

/**
 * Integrates from t0 with no control until the day after the lockdown and then with the given
 * piecewise-constant targets, for one p.
 */
DailyTrajectory simulate_with_targets(const EpiSeries& series, const FitResult& fit, double p, Selective selective,
                                      double nu, const std::vector<TargetWindow>& windows);

struct RetroRow {
    double p           = 0.0;
    double peak_fit    = 0.0; ///< peak E[rho_I] with the fitted strategy
    double peak_swap   = 0.0; ///< peak E[rho_I] with S = sqrt(x) and the same targets
    double peak_data   = 0.0;
    DailyTrajectory swap;
};

/// Re-runs the Uniform-fitted targets with a selective control for every p.
std::vector<RetroRow> retrospective_swap(const EpiSeries& series, const FitResult& fit,
                                         const std::vector<TargetWindow>& uniform_windows, double nu,
                                         const std::vector<double>& ps, Selective swap_to = Selective::SqrtX);

/// window_start,x_T,cost_total,cost_S,cost_E,cost_R
void write_targets_csv(std::ostream& os, const std::vector<TargetWindow>& windows);

} // namespace kec

#endif // KEC_CALIB_H
