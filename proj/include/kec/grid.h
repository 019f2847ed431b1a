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

#ifndef KEC_GRID_H
#define KEC_GRID_H

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace kec
{

/// Uniform grid on [0, x_max] with nodes x_i = i*dx.
class Grid1D
{
public:
    Grid1D(double x_max, std::size_t n_points);

    /// Grid with the given spacing; x_max must be an integer multiple of dx (to 1e-9 relative).
    static Grid1D with_spacing(double x_max, double dx);

    double x_max() const
    {
        return m_x_max;
    }
    std::size_t size() const
    {
        return m_n;
    }
    double dx() const
    {
        return m_dx;
    }
    double x(std::size_t i) const
    {
        return static_cast<double>(i) * m_dx;
    }
    double x_half(std::size_t i) const
    {
        return (static_cast<double>(i) + 0.5) * m_dx;
    }
    std::vector<double> nodes() const;

private:
    double m_x_max;
    std::size_t m_n;
    double m_dx;
};

/// Trapezoid rule of f on the grid.
double trapezoid(std::span<const double> f, const Grid1D& grid);

/// Trapezoid rule of w(x_i) * f_i.
double trapezoid_weighted(std::span<const double> f, const Grid1D& grid, const std::function<double(double)>& w);

/// Trapezoid rule of x^r f for r in {0, 1, 2}.
double trapezoid_moment(std::span<const double> f, const Grid1D& grid, int r);

} // namespace kec

#endif // KEC_GRID_H
