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

#include "kec/grid.h"
#include "kec/error.h"

#include <cmath>

namespace kec
{

Grid1D::Grid1D(double x_max, std::size_t n_points)
    : m_x_max(x_max)
    , m_n(n_points)
    , m_dx(0.0)
{
    if (!(x_max > 0.0) || n_points < 3) {
        throw_invalid("grid needs x_max > 0 and at least 3 points");
    }
    m_dx = x_max / static_cast<double>(n_points - 1);
}

Grid1D Grid1D::with_spacing(double x_max, double dx)
{
    if (!(dx > 0.0)) {
        throw_invalid("grid spacing must be positive");
    }
    const double cells = x_max / dx;
    const double n     = std::round(cells);
    if (std::abs(cells - n) > 1e-9 * n) {
        throw_invalid("x_max must be an integer multiple of dx");
    }
    return Grid1D(x_max, static_cast<std::size_t>(n) + 1);
}

std::vector<double> Grid1D::nodes() const
{
    std::vector<double> xs(m_n);
    for (std::size_t i = 0; i < m_n; ++i) {
        xs[i] = x(i);
    }
    return xs;
}

double trapezoid(std::span<const double> f, const Grid1D& grid)
{
    if (f.size() != grid.size()) {
        throw_invalid("field size does not match grid");
    }
    double acc = 0.0;
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
        acc += f[i];
    }
    acc += 0.5 * (f.front() + f.back());
    return acc * grid.dx();
}

double trapezoid_weighted(std::span<const double> f, const Grid1D& grid, const std::function<double(double)>& w)
{
    if (f.size() != grid.size()) {
        throw_invalid("field size does not match grid");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double c = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
        acc += c * w(grid.x(i)) * f[i];
    }
    return acc * grid.dx();
}

double trapezoid_moment(std::span<const double> f, const Grid1D& grid, int r)
{
    if (f.size() != grid.size()) {
        throw_invalid("field size does not match grid");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double c = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
        const double x = grid.x(i);
        const double w = r == 0 ? 1.0 : (r == 1 ? x : x * x);
        acc += c * w * f[i];
    }
    return acc * grid.dx();
}

} // namespace kec
