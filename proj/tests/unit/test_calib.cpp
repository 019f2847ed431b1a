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
#include "synthetic.h"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace kec;
using enum Compartment;
using std::chrono::days;
using kec::testing::synthetic_series;
using kec::testing::synthetic_setup;

namespace
{

std::string write_temp(const std::string& name, const std::string& text)
{
    const auto path = std::filesystem::temp_directory_path() / ("kec_test_" + name);
    std::ofstream(path) << text;
    return path.string();
}

} // namespace

TEST(Dates, ParseAndFormat)
{
    EXPECT_EQ(format_date(parse_date("2020-03-09")), "2020-03-09");
    EXPECT_EQ(parse_date("1/22/20"), parse_date("2020-01-22"));
    EXPECT_EQ((parse_date("2020-03-01") - parse_date("2020-02-28")).count(), 2);
    EXPECT_THROW(parse_date("2020-02-30"), Error);
    EXPECT_THROW(parse_date("yesterday"), Error);
}

TEST(LoadSeries, SimpleCsv)
{
    const auto path = write_temp("simple.csv", "date,infected,recovered\n2020-03-01,10,1\n2020-03-02,12,2\n"
                                               "2020-03-03,15,2\n");
    SeriesSource src;
    src.path      = path;
    src.region    = "X";
    src.fractions = false;
    const auto s  = load_series(src);
    EXPECT_EQ(s.size(), 3u);
    EXPECT_EQ(s.infected[2], 15.0);
    src.fractions  = true;
    src.population = 100.0;
    EXPECT_DOUBLE_EQ(load_series(src).infected[2], 0.15);
}

TEST(LoadSeries, NegativeCountNamesLine)
{
    SeriesSource src;
    src.path = write_temp("neg.csv", "date,infected,recovered\n2020-03-01,10,1\n2020-03-02,-3,2\n");
    try {
        load_series(src);
        FAIL();
    }
    catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Data);
        EXPECT_NE(std::string(e.what()).find("neg.csv:3"), std::string::npos) << e.what();
    }
}

TEST(LoadSeries, NonMonotoneDates)
{
    SeriesSource src;
    src.path = write_temp("order.csv", "date,infected,recovered\n2020-03-02,10,1\n2020-03-01,12,2\n");
    EXPECT_THROW(load_series(src), Error);
}

TEST(LoadSeries, JhuWideLayout)
{
    const std::string header = "Province/State,Country/Region,Lat,Long,1/22/20,1/23/20,1/24/20\n";
    const auto conf = write_temp("time_series_covid19_confirmed_global.csv",
                                 header + ",Italy,41.8,12.5,0,2,5\n,\"Korea, South\",36,128,1,1,2\n"
                                          "Hubei,China,30,112,444,444,549\n");
    write_temp("time_series_covid19_recovered_global.csv", header + ",Italy,41.8,12.5,0,0,1\n");
    const auto deaths = write_temp("deaths.csv", header + ",Italy,41.8,12.5,0,0,1\n");
    SeriesSource src;
    src.format    = SeriesFormat::JhuGlobalCsv;
    src.path      = conf;
    src.region    = "Italy";
    src.fractions = false;
    auto s        = load_series(src);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(format_date(s.dates.front()), "2020-01-22");
    EXPECT_EQ(s.infected[2], 4.0);
    src.deaths_path = deaths;
    s               = load_series(src);
    EXPECT_EQ(s.infected[2], 3.0);
    EXPECT_EQ(s.recovered[2], 2.0);
    src.measure = InfectedMeasure::Cumulative;
    EXPECT_EQ(load_series(src).infected[2], 5.0);
    src.region = "Korea, South";
    EXPECT_THROW(load_series(src), Error); // no recovered row
    src.region = "Atlantis";
    EXPECT_THROW(load_series(src), Error);
}

TEST(Misfit, RelativeNorm)
{
    const std::vector<double> b{1.0, 2.0, 2.0};
    const std::vector<double> a{1.0, 2.0, 5.0};
    EXPECT_DOUBLE_EQ(relative_l2(a, b), 1.0);
    const std::vector<double> a2{2.0, 4.0, 10.0}, b2{2.0, 4.0, 4.0};
    EXPECT_DOUBLE_EQ(relative_l2(a2, b2), relative_l2(a, b)); // scale invariance
    EXPECT_DOUBLE_EQ(weighted_misfit(a, a, b, a, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(weighted_misfit(a, a, b, a, 0.0), 1.0);
}

TEST(Misfit, ThetaOneIsRecoveredOnly)
{
    auto setup      = synthetic_setup(20);
    auto series     = synthetic_series(setup, 1e5, 0.02, 5.0, 20, 25);
    auto corrupted  = series;
    for (auto& v : corrupted.infected) {
        v *= 3.0;
    }
    setup.theta = 1.0;
    EXPECT_NEAR(pre_lockdown_objective(corrupted, setup, 0.02, 5.0), 0.0, 1e-12);
    setup.theta = 0.5;
    EXPECT_NEAR(pre_lockdown_objective(corrupted, setup, 0.02, 5.0), 0.5 * 2.0 / 3.0, 1e-9);
}

TEST(FitUnconstrained, NoiselessRoundTrip)
{
    for (double p : {0.0, 0.5, 1.0}) {
        auto setup        = synthetic_setup(40);
        setup.p           = p;
        const auto series = synthetic_series(setup, 1e4, 0.02, 5.0, 40, 45);
        const auto fit    = fit_unconstrained(series, setup);
        EXPECT_TRUE(fit.converged);
        EXPECT_NEAR(fit.beta_hat, 0.02, 0.05 * 0.02) << p;
        EXPECT_NEAR(fit.lambda_hat, 5.0, 0.05 * 5.0) << p;
        EXPECT_EQ(fit.trace.size(), 3u);
        EXPECT_GE(fit.beta_hat, setup.beta_bounds.first);
        EXPECT_LE(fit.lambda_hat, setup.lambda_bounds.second);
    }
}

TEST(FitUnconstrained, NoisyRoundTrip)
{
    auto setup  = synthetic_setup(40);
    auto series = synthetic_series(setup, 1e4, 0.02, 5.0, 40, 45);
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> u(0.95, 1.05);
    for (std::size_t k = 0; k < series.size(); ++k) {
        series.infected[k] *= u(rng);
        series.recovered[k] *= u(rng);
    }
    const auto fit = fit_unconstrained(series, setup);
    EXPECT_NEAR(fit.beta_hat, 0.02, 0.15 * 0.02);
    EXPECT_NEAR(fit.lambda_hat, 5.0, 0.15 * 5.0);
}

TEST(FitUnconstrained, JsonRoundTrip)
{
    auto setup        = synthetic_setup(20);
    const auto series = synthetic_series(setup, 1e5, 0.02, 5.0, 20, 25);
    const auto fit    = fit_unconstrained(series, setup);
    const auto j      = to_json(fit);
    EXPECT_EQ(j["window"]["t0"], "2020-02-24");
    EXPECT_EQ(j["trace"].size(), 3u);
    const auto back = fit_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.beta_hat, fit.beta_hat);
    EXPECT_EQ(back.lambda_hat, fit.lambda_hat);
    EXPECT_EQ(back.setup.t_lockdown, setup.t_lockdown);
    EXPECT_THROW(fit_from_json(nlohmann::json::parse("{\"beta_hat\": 1}")), Error);
}

TEST(FitUnconstrained, RejectsWindowOutsideData)
{
    auto setup        = synthetic_setup(20);
    const auto series = synthetic_series(setup, 1e5, 0.02, 5.0, 20, 10);
    EXPECT_THROW(fit_unconstrained(series, setup), Error);
}

namespace
{

FitResult exact_fit(const CalibSetup& setup, const EpiSeries& series)
{
    FitResult fit;
    fit.beta_hat   = 0.02;
    fit.lambda_hat = 5.0;
    fit.setup      = setup;
    fit.region     = series.region;
    fit.population = series.population;
    fit.converged  = true;
    return fit;
}

} // namespace

TEST(FitTargets, ConstantTargetRoundTrip)
{
    auto setup = synthetic_setup(20);
    // 20 pre-lockdown days, lockdown day, four full weeks and a partial one
    const auto series = synthetic_series(setup, 1e4, 0.02, 5.0, 20, 20 + 1 + 30, 6.0);
    const auto fit    = exact_fit(setup, series);
    TargetSetup ts;
    const auto res = fit_targets(series, fit, ts);
    ASSERT_EQ(res.windows.size(), 5u);
    for (const auto& w : res.windows) {
        if (w.full) {
            EXPECT_NEAR(w.x_target, 6.0, 0.05 * 6.0) << format_date(w.start);
        }
        EXPECT_FALSE(w.degenerate);
        EXPECT_GT(w.cost.total, 0.0);
    }
    EXPECT_FALSE(res.windows.back().full);
    EXPECT_EQ(res.trajectory.dates.size(), series.size());

    // insensitive to the warm start
    ts.warm_start  = 15.0;
    const auto alt = fit_targets(series, fit, ts);
    for (std::size_t k = 0; k < res.windows.size(); ++k) {
        EXPECT_NEAR(alt.windows[k].x_target, res.windows[k].x_target, 0.01 * res.windows[k].x_target);
    }

    std::ostringstream os;
    write_targets_csv(os, res.windows);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "window_start,x_T,cost_total,cost_S,cost_E,cost_R");
}

TEST(FitTargets, SelectiveTargetsAreHigher)
{
    auto setup        = synthetic_setup(20);
    const auto series = synthetic_series(setup, 1e4, 0.02, 5.0, 20, 20 + 1 + 14, 6.0);
    const auto fit    = exact_fit(setup, series);
    TargetSetup ts;
    const auto uni = fit_targets(series, fit, ts);
    ts.selective   = Selective::SqrtX;
    const auto sel = fit_targets(series, fit, ts);
    for (std::size_t k = 0; k < uni.windows.size(); ++k) {
        EXPECT_GT(sel.windows[k].x_target, uni.windows[k].x_target);
    }
}

TEST(FitTargets, ImpotentControlIsDegenerate)
{
    auto setup        = synthetic_setup(20);
    const auto series = synthetic_series(setup, 1e4, 0.02, 5.0, 20, 20 + 1 + 7);
    const auto fit    = exact_fit(setup, series);
    TargetSetup ts;
    ts.nu          = 1e12;
    const auto res = fit_targets(series, fit, ts);
    ASSERT_EQ(res.windows.size(), 1u);
    EXPECT_TRUE(res.windows[0].degenerate);
}

TEST(Retro, IdenticalStrategyReproducesFit)
{
    auto setup        = synthetic_setup(20);
    const auto series = synthetic_series(setup, 1e4, 0.02, 5.0, 20, 20 + 1 + 14, 6.0);
    const auto fit    = exact_fit(setup, series);
    TargetSetup ts;
    const auto res  = fit_targets(series, fit, ts);
    const auto rows = retrospective_swap(series, fit, res.windows, ts.nu, {0.5}, Selective::Uniform);
    ASSERT_EQ(rows.size(), 1u);
    for (std::size_t d = 0; d < res.trajectory.mean.size(); ++d) {
        EXPECT_EQ(rows[0].swap.mean[d].rho[I], res.trajectory.mean[d].rho[I]);
    }
    EXPECT_EQ(rows[0].peak_fit, rows[0].peak_swap);
}

TEST(Retro, SelectiveSwapLowersPeak)
{
    auto setup        = synthetic_setup(40);
    const auto series = synthetic_series(setup, 1e4, 0.02, 5.0, 40, 40 + 1 + 21, 4.0);
    const auto fit    = exact_fit(setup, series);
    TargetSetup ts;
    const auto res  = fit_targets(series, fit, ts);
    const auto rows = retrospective_swap(series, fit, res.windows, ts.nu, {0.0, 0.5, 1.0});
    for (const auto& r : rows) {
        EXPECT_LT(r.peak_swap, r.peak_fit) << r.p;
        EXPECT_EQ(r.swap.rho_i_min.size(), r.swap.mean.size());
    }
}
