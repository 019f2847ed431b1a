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

#include "kec/uq.h"
#include "kec/error.h"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace kec
{

UncertaintyLaw UncertaintyLaw::uniform(double a, double b, DeltaMap map, int quad_order)
{
    UncertaintyLaw law;
    law.kind       = UniformInterval{a, b};
    law.delta_map  = map;
    law.quad_order = quad_order;
    law.validate();
    return law;
}

UncertaintyLaw UncertaintyLaw::bernoulli(double p, DeltaMap map)
{
    UncertaintyLaw law;
    law.kind      = Bernoulli{p};
    law.delta_map = map;
    law.validate();
    return law;
}

double UncertaintyLaw::delta(double z) const
{
    return delta_map == DeltaMap::Identity ? z : 1.0 - 2.0 * z;
}

void UncertaintyLaw::validate() const
{
    if (quad_order < 0) {
        throw_invalid("quad_order must be nonnegative");
    }
    if (const auto* u = std::get_if<UniformInterval>(&kind)) {
        if (!(u->a < u->b)) {
            throw_invalid("uniform law needs a < b, got [" + std::to_string(u->a) + ", " + std::to_string(u->b) + "]");
        }
        const double d0 = delta(u->a);
        const double d1 = delta(u->b);
        if (std::min(d0, d1) < -1.0 || std::max(d0, d1) > 1.0) {
            throw_invalid("image of delta over the uniform support leaves [-1, 1]");
        }
    }
    else {
        const double p = std::get<Bernoulli>(kind).p;
        if (!(p >= 0.0 && p <= 1.0)) {
            throw_invalid("Bernoulli parameter must lie in [0, 1]");
        }
        if (delta_map != DeltaMap::AffineFlip) {
            throw_invalid("Bernoulli laws use the affine flip delta(z) = 1 - 2z");
        }
    }
}

QuadratureRule gauss_legendre(std::size_t n)
{
    if (n == 0) {
        throw_invalid("Gauss-Legendre rule needs at least one node");
    }
    std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> table(
        gsl_integration_glfixed_table_alloc(n), &gsl_integration_glfixed_table_free);
    if (!table) {
        throw_numerical("failed to allocate Gauss-Legendre table");
    }
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        gsl_integration_glfixed_point(-1.0, 1.0, i, &rule.nodes[i], &rule.weights[i], table.get());
    }
    // The tabulated nodes lose a few digits for large n; polish with Newton on P_n.
    const int deg = static_cast<int>(n);
    for (std::size_t i = 0; i < n && n > 1; ++i) {
        double t  = rule.nodes[i];
        double dp = 0.0;
        for (int it = 0; it < 3; ++it) {
            const double pn = legendre(deg, t);
            dp              = deg * (t * pn - legendre(deg - 1, t)) / (t * t - 1.0);
            t -= pn / dp;
        }
        const double pn = legendre(deg, t);
        dp              = deg * (t * pn - legendre(deg - 1, t)) / (t * t - 1.0);
        rule.nodes[i]   = t;
        rule.weights[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    return rule;
}

double legendre(int n, double t)
{
    if (n == 0) {
        return 1.0;
    }
    double p_prev = 1.0;
    double p      = t;
    for (int k = 1; k < n; ++k) {
        const double p_next = ((2.0 * k + 1.0) * t * p - k * p_prev) / (k + 1.0);
        p_prev              = p;
        p                   = p_next;
    }
    return p;
}

GpcBasis::GpcBasis(const UncertaintyLaw& law, int order)
    : m_law(law)
    , m_order(order)
{
    law.validate();
    if (order < 0) {
        throw_invalid("gPC order must be nonnegative");
    }
    std::vector<double> reference;
    if (const auto* u = std::get_if<UniformInterval>(&law.kind)) {
        const std::size_t n = std::max<std::size_t>(static_cast<std::size_t>(law.quad_order), 2 * num_modes());
        const auto rule     = gauss_legendre(n);
        const double mid    = 0.5 * (u->a + u->b);
        const double half   = 0.5 * (u->b - u->a);
        m_nodes.resize(n);
        m_weights.resize(n);
        for (std::size_t q = 0; q < n; ++q) {
            m_nodes[q]   = mid + half * rule.nodes[q];
            m_weights[q] = 0.5 * rule.weights[q];
        }
        reference = rule.nodes;
    }
    else {
        const double p = std::get<Bernoulli>(law.kind).p;
        if (order > 1) {
            throw_invalid("a two-atom Bernoulli measure supports at most order 1");
        }
        if (order == 1 && (p <= 0.0 || p >= 1.0)) {
            throw_invalid("order 1 on a Bernoulli law needs 0 < p < 1");
        }
        m_nodes   = {1.0, 0.0};
        m_weights = {p, 1.0 - p};
    }

    m_deltas.resize(m_nodes.size());
    std::transform(m_nodes.begin(), m_nodes.end(), m_deltas.begin(), [&](double z) {
        return m_law.delta(z);
    });

    m_psi.resize(num_modes() * m_nodes.size());
    for (std::size_t h = 0; h < num_modes(); ++h) {
        for (std::size_t q = 0; q < m_nodes.size(); ++q) {
            // reference nodes avoid re-standardising narrow intervals
            m_psi[h * m_nodes.size() + q] = reference.empty()
                                                ? evaluate(static_cast<int>(h), m_nodes[q])
                                                : std::sqrt(2.0 * h + 1.0) * legendre(static_cast<int>(h), reference[q]);
        }
    }
}

double GpcBasis::evaluate(int h, double z) const
{
    if (h < 0 || h > m_order) {
        throw_invalid("basis index out of range");
    }
    if (const auto* u = std::get_if<UniformInterval>(&m_law.kind)) {
        const double t = (2.0 * z - u->a - u->b) / (u->b - u->a);
        return std::sqrt(2.0 * h + 1.0) * legendre(h, t);
    }
    if (h == 0) {
        return 1.0;
    }
    const double p = std::get<Bernoulli>(m_law.kind).p;
    return (z - p) / std::sqrt(p * (1.0 - p));
}

std::vector<double> GpcBasis::project(std::span<const double> samples_at_nodes) const
{
    if (samples_at_nodes.size() != m_nodes.size()) {
        throw_invalid("projection needs one sample per quadrature node (" + std::to_string(m_nodes.size()) +
                      "), got " + std::to_string(samples_at_nodes.size()));
    }
    std::vector<double> coeffs(num_modes(), 0.0);
    for (std::size_t h = 0; h < num_modes(); ++h) {
        double acc = 0.0;
        for (std::size_t q = 0; q < m_nodes.size(); ++q) {
            acc += m_weights[q] * samples_at_nodes[q] * psi(h, q);
        }
        coeffs[h] = acc;
    }
    return coeffs;
}

double GpcBasis::reconstruct(std::span<const double> coeffs, double z) const
{
    if (coeffs.size() != num_modes()) {
        throw_invalid("coefficient vector length does not match the basis");
    }
    double acc = 0.0;
    for (std::size_t h = 0; h < coeffs.size(); ++h) {
        acc += coeffs[h] * evaluate(static_cast<int>(h), z);
    }
    return acc;
}

std::vector<double> GpcBasis::reconstruct_at_nodes(std::span<const double> coeffs) const
{
    if (coeffs.size() != num_modes()) {
        throw_invalid("coefficient vector length does not match the basis");
    }
    std::vector<double> values(m_nodes.size(), 0.0);
    for (std::size_t h = 0; h < coeffs.size(); ++h) {
        for (std::size_t q = 0; q < m_nodes.size(); ++q) {
            values[q] += coeffs[h] * psi(h, q);
        }
    }
    return values;
}

std::vector<double> GpcBasis::gram() const
{
    const std::size_t n = num_modes();
    std::vector<double> g(n * n, 0.0);
    for (std::size_t h = 0; h < n; ++h) {
        for (std::size_t k = 0; k < n; ++k) {
            double acc = 0.0;
            for (std::size_t q = 0; q < m_nodes.size(); ++q) {
                acc += m_weights[q] * psi(h, q) * psi(k, q);
            }
            g[h * n + k] = acc;
        }
    }
    return g;
}

GpcBasis build_basis(const UncertaintyLaw& law, int order)
{
    return GpcBasis(law, order);
}

MeanVariance expectation_and_variance(std::span<const double> coefficients)
{
    MeanVariance mv;
    if (coefficients.empty()) {
        return mv;
    }
    mv.mean = coefficients[0];
    for (std::size_t h = 1; h < coefficients.size(); ++h) {
        mv.variance += coefficients[h] * coefficients[h];
    }
    return mv;
}

} // namespace kec
