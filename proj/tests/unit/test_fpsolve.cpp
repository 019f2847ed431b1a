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

#include "kec/contact.h"
#include "kec/error.h"
#include "kec/fpsolve.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace kec;

namespace
{

ContactParams params(double tau = 1.0)
{
    ContactParams p;
    p.tau = tau;
    return p;
}

double l1(const std::vector<double>& a, const std::vector<double>& b, const Grid1D& grid)
{
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = std::abs(a[i] - b[i]);
    }
    return trapezoid(d, grid);
}

std::vector<double> gamma_initial(const Grid1D& grid, double lambda, double m, double mass = 1.0)
{
    std::vector<double> f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        f[i] = mass * gamma_density(lambda, m, grid.x(i));
    }
    return f;
}

} // namespace

TEST(FluxWeights, ScalarValues)
{
    EXPECT_DOUBLE_EQ(chang_cooper_weight(0.0), 0.5);
    EXPECT_NEAR(chang_cooper_weight(1.0), 1.0 - 1.0 / (std::exp(1.0) - 1.0), 1e-15);
    EXPECT_NEAR(chang_cooper_weight(1.0), 0.41802329, 1e-8);
    EXPECT_NEAR(chang_cooper_weight(1e3), 1e-3, 1e-12);
    EXPECT_NEAR(chang_cooper_weight(-1e3), 1.0, 1e-2);
    EXPECT_NEAR(chang_cooper_weight(1e-7), 0.5 - 1e-7 / 12.0, 1e-15);
    // series continuity around the switch point
    EXPECT_NEAR(chang_cooper_weight(1.0001e-6), chang_cooper_weight(0.9999e-6), 1e-9);
}

TEST(FluxWeights, Vectorized)
{
    const std::vector<double> a{0.0, 2.0, -1.0}, d{1.0, 1.0, 0.5};
    const auto central = flux_weights(a, d, 0.5, FluxScheme::Central);
    for (double w : central) {
        EXPECT_EQ(w, 0.5);
    }
    const auto cc = flux_weights(a, d, 0.5, FluxScheme::ChangCooper);
    EXPECT_DOUBLE_EQ(cc[0], 0.5);
    EXPECT_NEAR(cc[1], chang_cooper_weight(1.0), 1e-15);
    EXPECT_NEAR(cc[2], chang_cooper_weight(-1.0), 1e-15);
    const std::vector<double> dz{1.0, 0.0, 1.0};
    EXPECT_THROW(flux_weights(a, dz, 0.5, FluxScheme::ChangCooper), Error);
}

TEST(Moments, GammaAndEdgeCases)
{
    const auto grid = Grid1D::with_spacing(500.0, 0.02);
    auto f          = gamma_initial(grid, 5.0, 10.0);
    auto mom        = moments(f, grid);
    EXPECT_NEAR(mom.rho, 1.0, 1e-6);
    EXPECT_NEAR(*mom.mean, 10.0, 1e-6);
    EXPECT_NEAR(*mom.second, 120.0, 1e-5);

    for (double& v : f) {
        v *= 0.97;
    }
    const auto scaled = moments(f, grid);
    EXPECT_NEAR(scaled.rho, 0.97 * mom.rho, 1e-15);
    EXPECT_NEAR(*scaled.mean, *mom.mean, 1e-12);
    EXPECT_NEAR(*scaled.second, *mom.second, 1e-10);

    const auto empty = moments(std::vector<double>(grid.size(), 0.0), grid);
    EXPECT_EQ(empty.rho, 0.0);
    EXPECT_FALSE(empty.mean);
    EXPECT_FALSE(empty.second);
}

TEST(FpStep, PreservesDiscreteEquilibriumChangCooper)
{
    const auto grid = Grid1D::with_spacing(500.0, 0.02);
    const auto p    = params();
    for (double d : {1.0, -1.0, 0.5, -0.5}) {
        const auto f    = equilibrium_density(p, DeltaValue(d), 10.0, grid);
        const auto next = fp_step(f, grid, p, DeltaValue(d), 10.0, ControlLaw{}, 0.1, FluxScheme::ChangCooper);
        EXPECT_LT(l1(next, f, grid) / trapezoid(f, grid), 1e-8) << d;
    }
}

TEST(FpStep, ConservesMass)
{
    const auto grid = Grid1D::with_spacing(100.0, 0.05);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto scheme : {FluxScheme::Central, FluxScheme::ChangCooper}) {
        for (double d : {-1.0, -0.3, 0.0, 0.6, 1.0}) {
            std::vector<double> f(grid.size());
            for (double& v : f) {
                v = u(rng);
            }
            const double before = trapezoid(f, grid);
            const ControlLaw ctl{Selective::SqrtX, 5.0, 0.7};
            const auto next = fp_step(f, grid, params(1e-3), DeltaValue(d), 12.0, ctl, 0.1, scheme);
            EXPECT_NEAR(trapezoid(next, grid), before, 1e-12 * before) << d << " " << static_cast<int>(scheme);
        }
    }
}

TEST(FpStep, MeanConservedForDeltaPlusMinusOne)
{
    const auto grid = Grid1D::with_spacing(500.0, 0.02);
    const auto p    = params(1e-5);
    for (double d : {-1.0, 1.0}) {
        for (auto scheme : {FluxScheme::Central, FluxScheme::ChangCooper}) {
            const auto f0 = gamma_initial(grid, 5.0, 10.0);
            const double m0 = *moments(f0, grid).mean;
            const auto f  = fp_advance(f0, grid, p, DeltaValue(d), ControlLaw{}, 0.1, 10, {.scheme = scheme});
            EXPECT_LT(std::abs(*moments(f, grid).mean - m0) / m0, 1e-3) << d;
        }
    }
}

TEST(FpStep, PositivityRandomInputs)
{
    const auto grid = Grid1D::with_spacing(100.0, 0.1);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> f(grid.size());
        for (double& v : f) {
            v = u(rng) < 0.3 ? 0.0 : u(rng);
        }
        const double d  = -1.0 + 2.0 * u(rng);
        const auto next = fp_step(f, grid, params(1e-5), DeltaValue(d), 8.0, ControlLaw{}, 0.1);
        for (double v : next) {
            ASSERT_GE(v, 0.0);
        }
    }
}

TEST(FpStep, L1Contraction)
{
    const auto grid = Grid1D::with_spacing(100.0, 0.1);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> f(grid.size()), g(grid.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = u(rng);
        g[i] = u(rng);
    }
    for (int step = 0; step < 10; ++step) {
        const double before = l1(f, g, grid);
        f = fp_step(f, grid, params(0.01), DeltaValue(0.3), 9.0, ControlLaw{}, 0.05);
        g = fp_step(g, grid, params(0.01), DeltaValue(0.3), 9.0, ControlLaw{}, 0.05);
        EXPECT_LE(l1(f, g, grid), before + 1e-10);
    }
}

TEST(FpStep, LongTimeConvergenceFromGamma)
{
    const auto grid = Grid1D::with_spacing(300.0, 0.05);
    const auto p    = params(1.0);
    for (double d : {1.0, -1.0}) {
        const auto f0 = gamma_initial(grid, 5.0, 10.0);
        const double m0 = *moments(f0, grid).mean;
        const auto f = fp_advance(f0, grid, p, DeltaValue(d), ControlLaw{}, 0.5, 100);
        const auto feq = equilibrium_density(p, DeltaValue(d), m0, grid);
        EXPECT_LT(l1(f, feq, grid), 1e-2) << d;
    }
}

TEST(FpStep, CentralMatchesChangCooperOnSmoothData)
{
    const auto grid = Grid1D::with_spacing(100.0, 0.01);
    const auto f0   = gamma_initial(grid, 5.0, 10.0);
    const auto a = fp_step(f0, grid, params(), DeltaValue(0.5), 10.0, ControlLaw{}, 0.01, FluxScheme::Central);
    const auto b = fp_step(f0, grid, params(), DeltaValue(0.5), 10.0, ControlLaw{}, 0.01, FluxScheme::ChangCooper);
    EXPECT_LT(l1(a, b, grid), 1e-5);
}

TEST(FpStep, FixedPointRefinement)
{
    const auto grid = Grid1D::with_spacing(200.0, 0.05);
    const auto f0   = gamma_initial(grid, 5.0, 10.0);
    FpRunOptions opt;
    opt.mean = MeanTreatment::FixedPoint;
    const auto f = fp_advance(f0, grid, params(1e-2), DeltaValue(0.5), ControlLaw{}, 0.1, 3, opt);
    EXPECT_NEAR(trapezoid(f, grid), trapezoid(f0, grid), 1e-12);
}

TEST(FpStep, TraceCsv)
{
    const auto grid = Grid1D::with_spacing(50.0, 0.1);
    const auto f0   = gamma_initial(grid, 5.0, 10.0);
    std::ostringstream os;
    write_trace_header(os);
    FpRunOptions opt;
    opt.trace = &os;
    fp_advance(f0, grid, params(), DeltaValue(1.0), ControlLaw{}, 0.1, 2, opt);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,rho,m,m2");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 3);
}

TEST(FpStep, Errors)
{
    const auto grid = Grid1D::with_spacing(10.0, 0.1);
    std::vector<double> f(grid.size(), 1.0);
    EXPECT_THROW(fp_step(f, grid, params(), DeltaValue(1.0), 1.0, ControlLaw{}, 0.0), Error);
    EXPECT_THROW(fp_step(f, grid, params(), DeltaValue(1.0), -1.0, ControlLaw{}, 0.1), Error);
    EXPECT_THROW(fp_step(std::vector<double>(3, 1.0), grid, params(), DeltaValue(1.0), 1.0, ControlLaw{}, 0.1), Error);
}
