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

#ifndef KEC_TESTS_ORACLES_H
#define KEC_TESTS_ORACLES_H

// Reference computations written independently of the library code paths.

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle
{

/// P_n(t) from the explicit sum 2^-n sum_k (-1)^k C(n,k) C(2n-2k,n) t^{n-2k}.
inline double legendre_explicit(int n, double t)
{
    auto binom = [](int a, int b) {
        double c = 1.0;
        for (int i = 1; i <= b; ++i) {
            c = c * (a - b + i) / i;
        }
        return c;
    };
    double s = 0.0;
    for (int k = 0; 2 * k <= n; ++k) {
        s += ((k % 2) ? -1.0 : 1.0) * binom(n, k) * binom(2 * n - 2 * k, n) * std::pow(t, n - 2 * k);
    }
    return s / std::pow(2.0, n);
}

/// Gauss-Legendre rule on [-1,1] by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_newton(int n)
{
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double pn = n == 0 ? 1.0 : p1;
            const double pm = n == 1 ? 1.0 : p0;
            dp = n * (t * pn - pm) / (t * t - 1.0);
            const double step = pn / dp;
            t -= step;
            if (std::abs(step) < 1e-16) {
                break;
            }
        }
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    return {x, w};
}

inline double gamma_pdf(double shape, double rate, double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x - std::lgamma(shape));
}

inline double inverse_gamma_pdf(double shape, double scale, double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    return std::exp(shape * std::log(scale) - (shape + 1.0) * std::log(x) - scale / x - std::lgamma(shape));
}

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& g, double a, double b, int n)
{
    const double h = (b - a) / n;
    double s = g(a) + g(b);
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
    }
    return s * h / 3.0;
}

/// Macroscopic SEIR mass equations, forward rates only (used for one-step checks).
inline double susceptible_rate(double beta, double m_s, double rho_s, double m_i, double rho_i)
{
    return -beta * m_s * rho_s * m_i * rho_i;
}

/**
 * Macroscopic rates from the balance laws of rho_J and rho_J m_J, with the second
 * moment of the susceptibles closed as Lambda m_S^2. Returns {drho_J..., dm_J...}.
 */
inline std::array<double, 8> macro_rates(double beta, double zeta, double gamma, double lambda_factor,
                                         const std::array<double, 4>& rho, const std::array<double, 4>& m)
{
    const double inc  = beta * m[0] * rho[0] * m[2] * rho[2];
    const double inc2 = beta * lambda_factor * m[0] * m[0] * rho[0] * m[2] * rho[2];
    const std::array<double, 4> drho{-inc, inc - zeta * rho[1], zeta * rho[1] - gamma * rho[2], gamma * rho[2]};
    const std::array<double, 4> dmom{-inc2, inc2 - zeta * rho[1] * m[1], zeta * rho[1] * m[1] - gamma * rho[2] * m[2],
                                     gamma * rho[2] * m[2]};
    std::array<double, 8> out{};
    for (int j = 0; j < 4; ++j) {
        out[j]     = drho[j];
        out[4 + j] = (dmom[j] - m[j] * drho[j]) / rho[j];
    }
    return out;
}

} // namespace oracle

#endif
