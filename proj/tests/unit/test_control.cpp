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
#include "kec/control.h"
#include "kec/error.h"

#include <gtest/gtest.h>

#include <cmath>

using namespace kec;

TEST(OptimalControl, Values)
{
    EXPECT_EQ(optimal_control(5.0, 5.0, 1.0, 1.0, 1.0), 0.0);
    EXPECT_NEAR(optimal_control(10.0, 5.0, 1.0, 1.0, 1.0), -2.5, 1e-15);
    EXPECT_NEAR(optimal_control(10.0, 5.0, 1e300, 1.0, 1.0), 0.0, 1e-290);
    EXPECT_THROW(optimal_control(1.0, 5.0, 0.0, 1.0, 1.0), Error);
}

TEST(ControlledUpdate, Values)
{
    EXPECT_NEAR(controlled_update(10.0, 5.0, 1e-300, 1.0, 1.0), 5.0, 1e-12);
    EXPECT_NEAR(controlled_update(10.0, 5.0, 2.0, 2.0, 1.0), 7.5, 1e-14);
    EXPECT_EQ(controlled_update(10.0, 5.0, 1.0, 1.0, 0.0), 10.0);
}

TEST(ControlledUpdate, ContractionTowardTarget)
{
    for (double x : {0.0, 1.0, 4.0, 9.0, 30.0}) {
        for (double k : {0.01, 1.0, 50.0}) {
            for (double s : {0.0, 0.5, 3.0}) {
                const double xn = controlled_update(x, 5.0, k, 0.3, s);
                EXPECT_LE(std::abs(xn - 5.0), std::abs(x - 5.0) + 1e-15);
                EXPECT_GE(xn, std::min(x, 5.0) - 1e-15);
                EXPECT_LE(xn, std::max(x, 5.0) + 1e-15);
            }
        }
    }
}

TEST(MacroControl, ClosedForms)
{
    EXPECT_EQ(macro_control_G(Selective::Uniform, 0.3, 5.0, 5.0, 1.2), 0.0);
    EXPECT_NEAR(macro_control_G(Selective::Uniform, 0.01, 5.0, 10.0, 1.2), -500.0, 1e-10);
    EXPECT_NEAR(macro_control_G(Selective::SqrtX, 0.01, 5.0, 5.0 / 1.2, 1.2), 0.0, 1e-12);
    EXPECT_EQ(macro_control_G(Selective::Off, 0.01, 5.0, 10.0, 1.2), 0.0);
    EXPECT_NEAR(macro_control_G(Selective::SqrtX, 2.0, 5.0, 4.0, 1.25), 4.0 * (5.0 - 5.0) / 2.0, 1e-15);
}

TEST(ControlSpec, Validation)
{
    EXPECT_NO_THROW(ControlSpec::off().validate());
    EXPECT_THROW(ControlSpec::shared_target(Selective::Uniform, 5.0, 0.0).validate(), Error);
    EXPECT_THROW(ControlSpec::shared_target(Selective::Uniform, -1.0, 1.0).validate(), Error);
    const auto spec = ControlSpec::shared_target(Selective::SqrtX, 6.0, 0.5);
    const auto law  = spec.for_compartment(Compartment::E);
    EXPECT_EQ(law.x_target, 6.0);
    EXPECT_EQ(law.nu, 0.5);
    EXPECT_EQ(law.s2(3.0), 3.0);
}

TEST(DampingIndex, GammaMoments)
{
    ContactParams p;
    const auto grid = Grid1D::with_spacing(500.0, 0.02);
    const auto f    = equilibrium_density(p, DeltaValue(1.0), 10.0, grid);
    EXPECT_NEAR(damping_index(f, grid, 5.0), 45.0, 1e-5);
}

TEST(DampingIndex, PointMassAtTarget)
{
    const auto grid = Grid1D::with_spacing(10.0, 0.01);
    std::vector<double> f(grid.size(), 0.0);
    f[500] = 1.0 / grid.dx();
    EXPECT_NEAR(damping_index(f, grid, 5.0), 0.0, 1e-20);
}

TEST(RestrictionCost, Reductions)
{
    ContactParams p;
    const auto grid = Grid1D::with_spacing(500.0, 0.02);
    const auto g    = equilibrium_density(p, DeltaValue(1.0), 10.0, grid);
    PerCompartment<std::vector<double>> dens{{g, g, g, g}};

    auto spec      = ControlSpec::shared_target(Selective::Uniform, 5.0, 1.0);
    const auto c   = restriction_cost(dens, grid, spec);
    EXPECT_NEAR(c.per_compartment[Compartment::S], 45.0, 1e-5);
    EXPECT_NEAR(c.total, 135.0, 3e-5);
    EXPECT_NEAR(restriction_cost(dens, grid, spec, true).total, 180.0, 4e-5);

    spec.selective = Selective::Off;
    EXPECT_NEAR(restriction_cost(dens, grid, spec).per_compartment[Compartment::R], 22.5, 1e-5);

    std::vector<double> point(grid.size(), 0.0);
    point[250] = 1.0 / grid.dx();
    PerCompartment<std::vector<double>> at_target{{point, point, point, point}};
    EXPECT_NEAR(restriction_cost(at_target, grid, ControlSpec::shared_target(Selective::SqrtX, 5.0, 1.0)).total, 0.0,
                1e-20);
}
