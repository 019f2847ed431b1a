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

#ifndef KEC_UQ_H
#define KEC_UQ_H

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace kec
{

/// z ~ U([a, b]).
struct UniformInterval {
    double a = -1.0;
    double b = 1.0;
};

/// z ~ Bernoulli(p): P(z = 1) = p, P(z = 0) = 1 - p.
struct Bernoulli {
    double p = 0.5;
};

/// How the random input z is mapped to the tail parameter delta.
enum class DeltaMap
{
    Identity, ///< delta(z) = z
    AffineFlip, ///< delta(z) = 1 - 2z
};

/**
 * Distribution of the scalar random input z together with the map z -> delta(z).
 * quad_order is the minimum number of Gauss-Legendre nodes for uniform laws; it is
 * ignored for Bernoulli laws, which use exact two-point sums.
 */
struct UncertaintyLaw {
    std::variant<UniformInterval, Bernoulli> kind = UniformInterval{};
    DeltaMap delta_map = DeltaMap::Identity;
    int quad_order = 0;

    static UncertaintyLaw uniform(double a, double b, DeltaMap map = DeltaMap::Identity, int quad_order = 0);
    static UncertaintyLaw bernoulli(double p, DeltaMap map = DeltaMap::AffineFlip);

    bool is_bernoulli() const
    {
        return std::holds_alternative<Bernoulli>(kind);
    }
    double delta(double z) const;

    /// Throws kec::Error when the law violates its invariants.
    void validate() const;
};

/// Gauss-Legendre nodes on [-1, 1] with weights summing to 2.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

QuadratureRule gauss_legendre(std::size_t n);

/// Legendre polynomial P_n(t) by the three-term recurrence.
double legendre(int n, double t);

/**
 * Orthonormal polynomial basis Psi_0..Psi_M of the law together with its quadrature.
 * Psi values at the quadrature nodes are stored mode-major: psi(h, q).
 */
class GpcBasis
{
public:
    GpcBasis(const UncertaintyLaw& law, int order);

    int order() const
    {
        return m_order;
    }
    std::size_t num_modes() const
    {
        return static_cast<std::size_t>(m_order) + 1;
    }
    std::size_t num_nodes() const
    {
        return m_nodes.size();
    }
    const UncertaintyLaw& law() const
    {
        return m_law;
    }
    std::span<const double> nodes() const
    {
        return m_nodes;
    }
    std::span<const double> weights() const
    {
        return m_weights;
    }
    /// delta(z_q) at every quadrature node.
    std::span<const double> deltas() const
    {
        return m_deltas;
    }
    double psi(std::size_t h, std::size_t q) const
    {
        return m_psi[h * m_nodes.size() + q];
    }

    /// Psi_h(z) at an arbitrary point of the support.
    double evaluate(int h, double z) const;

    /// Coefficients g_h = sum_q w_q g(z_q) Psi_h(z_q).
    std::vector<double> project(std::span<const double> samples_at_nodes) const;

    /// sum_h coeffs_h Psi_h(z).
    double reconstruct(std::span<const double> coeffs, double z) const;

    /// Reconstruction at every quadrature node.
    std::vector<double> reconstruct_at_nodes(std::span<const double> coeffs) const;

    /// Discrete Gram matrix sum_q w_q Psi_h Psi_k, row-major (M+1)x(M+1).
    std::vector<double> gram() const;

private:
    UncertaintyLaw m_law;
    int m_order;
    std::vector<double> m_nodes;
    std::vector<double> m_weights;
    std::vector<double> m_deltas;
    std::vector<double> m_psi;
};

GpcBasis build_basis(const UncertaintyLaw& law, int order);

struct MeanVariance {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean and variance of a quantity from its orthonormal-basis coefficients.
MeanVariance expectation_and_variance(std::span<const double> coefficients);

} // namespace kec

#endif // KEC_UQ_H
