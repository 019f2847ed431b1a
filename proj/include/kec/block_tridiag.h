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

#ifndef KEC_BLOCK_TRIDIAG_H
#define KEC_BLOCK_TRIDIAG_H

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace kec
{

/**
 * Block-tridiagonal system with square blocks, solved by block LU (block Thomas) with
 * partial pivoting inside each diagonal block. Row i reads
 *   lower(i) x_{i-1} + diag(i) x_i + upper(i) x_{i+1} = b_i.
 * lower(0) and upper(n-1) are ignored.
 */
class BlockTridiagonalSystem
{
public:
    BlockTridiagonalSystem(std::size_t n_blocks, std::size_t block_size);

    std::size_t num_blocks() const
    {
        return m_diag.size();
    }
    std::size_t block_size() const
    {
        return m_block;
    }

    Eigen::MatrixXd& lower(std::size_t i)
    {
        return m_lower[i];
    }
    Eigen::MatrixXd& diag(std::size_t i)
    {
        return m_diag[i];
    }
    Eigen::MatrixXd& upper(std::size_t i)
    {
        return m_upper[i];
    }
    const Eigen::MatrixXd& lower(std::size_t i) const
    {
        return m_lower[i];
    }
    const Eigen::MatrixXd& diag(std::size_t i) const
    {
        return m_diag[i];
    }
    const Eigen::MatrixXd& upper(std::size_t i) const
    {
        return m_upper[i];
    }

    /// y = A x, with x and y laid out block by block.
    void multiply(std::span<const double> x, std::span<double> y) const;

    /// Solves A x = rhs in place. The blocks are left untouched. Throws on a singular pivot block.
    void solve(std::span<double> rhs) const;

private:
    std::size_t m_block;
    std::vector<Eigen::MatrixXd> m_lower;
    std::vector<Eigen::MatrixXd> m_diag;
    std::vector<Eigen::MatrixXd> m_upper;
    mutable std::vector<Eigen::MatrixXd> m_work;
};

/// Scalar tridiagonal solve (Thomas algorithm). lower[0] and upper[n-1] are ignored.
void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
                       std::span<double> rhs);

} // namespace kec

#endif // KEC_BLOCK_TRIDIAG_H
