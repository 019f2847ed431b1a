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

#include "kec/block_tridiag.h"
#include "kec/error.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kec
{

BlockTridiagonalSystem::BlockTridiagonalSystem(std::size_t n_blocks, std::size_t block_size)
    : m_block(block_size)
    , m_lower(n_blocks, Eigen::MatrixXd::Zero(block_size, block_size))
    , m_diag(n_blocks, Eigen::MatrixXd::Zero(block_size, block_size))
    , m_upper(n_blocks, Eigen::MatrixXd::Zero(block_size, block_size))
    , m_work(n_blocks, Eigen::MatrixXd::Zero(block_size, block_size))
{
    if (n_blocks == 0 || block_size == 0) {
        throw_invalid("block system needs at least one nonempty block");
    }
}

void BlockTridiagonalSystem::multiply(std::span<const double> x, std::span<double> y) const
{
    const std::size_t n = num_blocks();
    const auto b        = static_cast<Eigen::Index>(m_block);
    if (x.size() != n * m_block || y.size() != n * m_block) {
        throw_invalid("vector length does not match block system");
    }
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Map<Eigen::VectorXd> yi(y.data() + i * m_block, b);
        yi = m_diag[i] * Eigen::Map<const Eigen::VectorXd>(x.data() + i * m_block, b);
        if (i > 0) {
            yi += m_lower[i] * Eigen::Map<const Eigen::VectorXd>(x.data() + (i - 1) * m_block, b);
        }
        if (i + 1 < n) {
            yi += m_upper[i] * Eigen::Map<const Eigen::VectorXd>(x.data() + (i + 1) * m_block, b);
        }
    }
}

void BlockTridiagonalSystem::solve(std::span<double> rhs) const
{
    const std::size_t n = num_blocks();
    const auto b        = static_cast<Eigen::Index>(m_block);
    if (rhs.size() != n * m_block) {
        throw_invalid("right-hand side length does not match block system");
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    Eigen::MatrixXd pivot(b, b);
    Eigen::VectorXd tmp(b);

    auto check_pivot = [&](std::size_t i) {
        const auto& u   = lu.matrixLU();
        double max_diag = 0.0;
        double min_diag = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < b; ++k) {
            max_diag = std::max(max_diag, std::abs(u(k, k)));
            min_diag = std::min(min_diag, std::abs(u(k, k)));
        }
        if (!(min_diag > 1e-300) || !std::isfinite(max_diag)) {
            throw_numerical("singular pivot block at row " + std::to_string(i) + " of block-tridiagonal system");
        }
    };

    // forward sweep: m_work[i] holds pivot(i)^{-1} upper(i)
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Map<Eigen::VectorXd> ri(rhs.data() + i * m_block, b);
        pivot = m_diag[i];
        if (i > 0) {
            // coefficient-wise products are much cheaper than GEMM for the small blocks used here
            pivot -= m_lower[i].lazyProduct(m_work[i - 1]);
            tmp.noalias() = m_lower[i].lazyProduct(Eigen::Map<const Eigen::VectorXd>(rhs.data() + (i - 1) * m_block, b));
            ri -= tmp;
        }
        lu.compute(pivot);
        check_pivot(i);
        if (i + 1 < n) {
            m_work[i] = lu.solve(m_upper[i]);
        }
        tmp = lu.solve(ri);
        ri  = tmp;
    }
    // back substitution
    for (std::size_t i = n - 1; i-- > 0;) {
        Eigen::Map<Eigen::VectorXd> ri(rhs.data() + i * m_block, b);
        tmp.noalias() = m_work[i].lazyProduct(Eigen::Map<const Eigen::VectorXd>(rhs.data() + (i + 1) * m_block, b));
        ri -= tmp;
    }
    for (double v : rhs) {
        if (!std::isfinite(v)) {
            throw_numerical("non-finite solution of block-tridiagonal system");
        }
    }
}

void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
                       std::span<double> rhs)
{
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n || n == 0) {
        throw_invalid("tridiagonal bands must have equal, nonzero length");
    }
    std::vector<double> c(n, 0.0);
    double denom = diag[0];
    if (denom == 0.0 || !std::isfinite(denom)) {
        throw_numerical("singular tridiagonal system at row 0");
    }
    c[0]   = n > 1 ? upper[0] / denom : 0.0;
    rhs[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - lower[i] * c[i - 1];
        if (denom == 0.0 || !std::isfinite(denom)) {
            throw_numerical("singular tridiagonal system at row " + std::to_string(i));
        }
        c[i]   = i + 1 < n ? upper[i] / denom : 0.0;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    for (double v : rhs) {
        if (!std::isfinite(v)) {
            throw_numerical("non-finite solution of tridiagonal system");
        }
    }
}

} // namespace kec
