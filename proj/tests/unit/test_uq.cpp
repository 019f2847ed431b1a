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

#include "kec/error.h"
#include "kec/uq.h"
#include "oracles.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace kec;

namespace
{

double gram_defect(const GpcBasis& basis)
{
    const auto g   = basis.gram();
    const auto n   = basis.num_modes();
    double defect  = 0.0;
    for (std::size_t h = 0; h < n; ++h) {
        for (std::size_t k = 0; k < n; ++k) {
            defect = std::max(defect, std::abs(g[h * n + k] - (h == k ? 1.0 : 0.0)));
        }
    }
    return defect;
}

} // namespace

TEST(GaussLegendre, MatchesNewtonOracle)
{
    for (int n : {2, 5, 12, 42}) {
        const auto rule       = gauss_legendre(n);
        const auto [xo, wo]   = oracle::gauss_legendre_newton(n);
        ASSERT_EQ(rule.nodes.size(), static_cast<std::size_t>(n));
        std::vector<std::pair<double, double>> a, b;
        for (int i = 0; i < n; ++i) {
            a.emplace_back(rule.nodes[i], rule.weights[i]);
            b.emplace_back(xo[i], wo[i]);
        }
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        for (int i = 0; i < n; ++i) {
            EXPECT_NEAR(a[i].first, b[i].first, 1e-13);
            EXPECT_NEAR(a[i].second, b[i].second, 1e-13);
        }
    }
}

TEST(Legendre, RecurrenceMatchesExplicitSum)
{
    for (int n = 0; n <= 12; ++n) {
        for (double t : {-1.0, -0.7, -0.1, 0.0, 0.33, 0.9, 1.0}) {
            EXPECT_NEAR(legendre(n, t), oracle::legendre_explicit(n, t), 1e-11) << n << ' ' << t;
        }
    }
}

TEST(GpcBasis, ConstantBasis)
{
    const auto basis = build_basis(UncertaintyLaw::uniform(-1, 1), 0);
    EXPECT_EQ(basis.num_modes(), 1u);
    EXPECT_NEAR(basis.evaluate(0, 0.3), 1.0, 1e-15);
    EXPECT_LT(gram_defect(basis), 1e-12);
}

TEST(GpcBasis, FirstLegendreModeIsSqrt3Z)
{
    const auto basis = build_basis(UncertaintyLaw::uniform(-1, 1), 1);
    for (double z : {-0.8, 0.1, 0.5}) {
        EXPECT_NEAR(basis.evaluate(1, z), std::sqrt(3.0) * z, 1e-14);
    }
}

TEST(GpcBasis, GramIdentityUniform)
{
    const auto basis = build_basis(UncertaintyLaw::uniform(-1, 1), 5);
    EXPECT_EQ(basis.num_nodes(), 12u);
    EXPECT_LT(gram_defect(basis), 1e-12);
    for (int m : {0, 3, 8, 20, 40}) {
        EXPECT_LT(gram_defect(build_basis(UncertaintyLaw::uniform(-0.5, 0.5, DeltaMap::Identity, 3), m)), 1e-12) << m;
        EXPECT_LT(gram_defect(build_basis(UncertaintyLaw::uniform(0, 1), m)), 1e-12) << m;
    }
}

TEST(GpcBasis, QuadOrderRespected)
{
    EXPECT_EQ(build_basis(UncertaintyLaw::uniform(-1, 1, DeltaMap::Identity, 30), 2).num_nodes(), 30u);
    EXPECT_EQ(build_basis(UncertaintyLaw::uniform(-1, 1, DeltaMap::Identity, 3), 4).num_nodes(), 10u);
}

TEST(GpcBasis, WeightsSumToOne)
{
    for (const auto& law : {UncertaintyLaw::uniform(0, 1, DeltaMap::AffineFlip), UncertaintyLaw::bernoulli(0.3)}) {
        const auto basis = build_basis(law, 1);
        double s         = 0.0;
        for (double w : basis.weights()) {
            EXPECT_GE(w, 0.0);
            s += w;
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(GpcBasis, BernoulliNodesAndOrthonormality)
{
    const auto basis = build_basis(UncertaintyLaw::bernoulli(0.3), 1);
    ASSERT_EQ(basis.num_nodes(), 2u);
    EXPECT_DOUBLE_EQ(basis.nodes()[0], 1.0);
    EXPECT_DOUBLE_EQ(basis.nodes()[1], 0.0);
    EXPECT_DOUBLE_EQ(basis.deltas()[0], -1.0);
    EXPECT_DOUBLE_EQ(basis.deltas()[1], 1.0);
    EXPECT_LT(gram_defect(basis), 1e-14);
}

TEST(GpcBasis, Errors)
{
    EXPECT_THROW(build_basis(UncertaintyLaw::bernoulli(0.5), 2), Error);
    EXPECT_THROW(build_basis(UncertaintyLaw::uniform(1, 1), 1), Error);
    EXPECT_THROW(build_basis(UncertaintyLaw::uniform(0, 2), 1), Error);
    EXPECT_THROW(build_basis(UncertaintyLaw::bernoulli(1.5), 0), Error);
    EXPECT_THROW(build_basis(UncertaintyLaw::bernoulli(0.0), 1), Error);
    EXPECT_NO_THROW(build_basis(UncertaintyLaw::bernoulli(0.0), 0));
    EXPECT_THROW(build_basis(UncertaintyLaw::uniform(-1, 1), -1), Error);
}

TEST(Projection, Constant)
{
    const auto basis = build_basis(UncertaintyLaw::uniform(-1, 1), 4);
    const std::vector<double> g(basis.num_nodes(), 2.5);
    const auto c = basis.project(g);
    EXPECT_NEAR(c[0], 2.5, 1e-14);
    for (std::size_t h = 1; h < c.size(); ++h) {
        EXPECT_NEAR(c[h], 0.0, 1e-14);
    }
}

TEST(Projection, IdentityFunction)
{
    const auto basis = build_basis(UncertaintyLaw::uniform(-1, 1), 1);
    std::vector<double> g(basis.nodes().begin(), basis.nodes().end());
    const auto c = basis.project(g);
    EXPECT_NEAR(c[0], 0.0, 1e-15);
    EXPECT_NEAR(c[1], 1.0 / std::sqrt(3.0), 1e-15);
}

TEST(Projection, CubicReconstructsExactly)
{
    const auto basis = build_basis(UncertaintyLaw::uniform(-1, 1), 5);
    std::vector<double> g;
    for (double z : basis.nodes()) {
        g.push_back(z * z * z);
    }
    const auto c = basis.project(g);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const double z = u(rng);
        EXPECT_NEAR(basis.reconstruct(c, z), z * z * z, 1e-12);
    }
    const auto at_nodes = basis.reconstruct_at_nodes(c);
    for (std::size_t q = 0; q < g.size(); ++q) {
        EXPECT_NEAR(at_nodes[q], g[q], 1e-13);
    }
}

TEST(Projection, LengthMismatch)
{
    const auto basis = build_basis(UncertaintyLaw::uniform(-1, 1), 2);
    EXPECT_THROW(basis.project(std::vector<double>(3, 1.0)), Error);
}

TEST(Statistics, MeanAndVariance)
{
    auto mv = expectation_and_variance(std::vector<double>{3.0, 0.0, 0.0});
    EXPECT_EQ(mv.mean, 3.0);
    EXPECT_EQ(mv.variance, 0.0);
    mv = expectation_and_variance(std::vector<double>{0.0, 1.0});
    EXPECT_EQ(mv.mean, 0.0);
    EXPECT_EQ(mv.variance, 1.0);

    const auto basis = build_basis(UncertaintyLaw::uniform(-1, 1), 3);
    std::vector<double> g(basis.nodes().begin(), basis.nodes().end());
    mv = expectation_and_variance(basis.project(g));
    EXPECT_NEAR(mv.mean, 0.0, 1e-15);
    EXPECT_NEAR(mv.variance, 1.0 / 3.0, 1e-14);
}

TEST(Statistics, Parseval)
{
    const auto basis = build_basis(UncertaintyLaw::uniform(0, 1, DeltaMap::AffineFlip), 4);
    std::vector<double> g, g2;
    for (double z : basis.nodes()) {
        g.push_back(1.0 - 2.0 * z + 0.5 * z * z * z);
    }
    const auto c = basis.project(g);
    double lhs = 0.0, rhs = 0.0;
    for (double v : c) {
        lhs += v * v;
    }
    for (std::size_t q = 0; q < g.size(); ++q) {
        rhs += basis.weights()[q] * g[q] * g[q];
    }
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Statistics, BernoulliExpectationExact)
{
    const double p   = 0.3;
    const auto basis = build_basis(UncertaintyLaw::bernoulli(p), 1);
    auto g           = [](double delta) { return std::exp(delta) + 2.0; };
    std::vector<double> samples;
    for (double d : basis.deltas()) {
        samples.push_back(g(d));
    }
    const auto mv = expectation_and_variance(basis.project(samples));
    const double mean = p * g(-1.0) + (1.0 - p) * g(1.0);
    EXPECT_NEAR(mv.mean, mean, 1e-14);
    EXPECT_NEAR(mv.variance, p * std::pow(g(-1.0) - mean, 2) + (1 - p) * std::pow(g(1.0) - mean, 2), 1e-13);
}

TEST(DeltaMap, AffineFlip)
{
    const auto law = UncertaintyLaw::uniform(0, 1, DeltaMap::AffineFlip);
    EXPECT_DOUBLE_EQ(law.delta(0.0), 1.0);
    EXPECT_DOUBLE_EQ(law.delta(1.0), -1.0);
}
