/*
 Copyright 2026 The amv Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

// Independent reference computations. None of these call into the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

// Frozen outputs of the oracles below, computed once in double precision.
// Scalar Picard on m'(t) = m(t + delta), m(0) = 1, T = 1, 10^4 Euler steps.
inline constexpr double kDeterministicMeanDelta01 = 3.0389154206570614;
inline constexpr double kDeterministicMeanDelta0 = 2.7181459268252226;
// sqrt(e^{-7} + (6/7) 7 int_0^1 e^{-7s} ds) = sqrt(e^{-7} + (6/7)(1 - e^{-7})):
// the beta = 7 weighted norm of U = 1 on [0, 1] in the continuum.
inline constexpr double kWeightedNormOfOne = 0.9258904503207057;

/// Euler/Picard fixed point of m_{k+1} = m_k + dt m_{min(k+d, n)} with the
/// lag d = round(delta / dt). Returns the whole node vector.
inline std::vector<double> deterministic_mean(double delta, double T, std::size_t n, double x0 = 1.0) {
    const double dt = T / static_cast<double>(n);
    const std::size_t d = static_cast<std::size_t>(std::llround(delta / dt));
    std::vector<double> m(n + 1, x0), next(n + 1);
    for (int it = 0; it < 10000; ++it) {
        next[0] = x0;
        for (std::size_t k = 0; k < n; ++k) next[k + 1] = next[k] + dt * m[std::min(k + d, n)];
        double r = 0.0;
        for (std::size_t k = 0; k <= n; ++k) r = std::max(r, std::abs(next[k] - m[k]));
        m.swap(next);
        if (r < 1e-13) break;
    }
    return m;
}

/// Scalar Picard oracle for m'(t) = a m(t) + abar m(min(t + delta, T)) + c v(t),
/// m(0) = 0, with v piecewise constant on the cells of cell_values. Euler
/// on fine_steps steps; returns m at the cell boundaries.
inline std::vector<double> delayed_linear_mean(double a, double abar, double c,
                                               const std::vector<double>& cell_values, double delta,
                                               double T, std::size_t fine_steps) {
    const std::size_t n = cell_values.size();
    const std::size_t per = fine_steps / n;
    const std::size_t steps = per * n;
    const double h = T / static_cast<double>(steps);
    const std::size_t d = static_cast<std::size_t>(std::llround(delta / h));
    std::vector<double> m(steps + 1, 0.0), next(steps + 1);
    for (int it = 0; it < 10000; ++it) {
        next[0] = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            next[s + 1] = next[s] + h * (a * m[s] + abar * m[std::min(s + d, steps)] + c * cell_values[s / per]);
        }
        double r = 0.0;
        for (std::size_t s = 0; s <= steps; ++s) r = std::max(r, std::abs(next[s] - m[s]));
        m.swap(next);
        if (r < 1e-14) break;
    }
    std::vector<double> out(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out[k] = m[k * per];
    return out;
}

/// Discrete trapezoid version of the weighted norm for a path identically
/// equal to one, on an n-step grid of [0, T].
inline double weighted_norm_of_one(double beta, double T, std::size_t n) {
    const double dt = T / static_cast<double>(n);
    double trap = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 0.5 : 1.0;
        trap += w * std::exp(-beta * dt * static_cast<double>(k)) * dt;
    }
    return std::sqrt(std::exp(-beta * T) + (6.0 / 7.0) * beta * trap);
}

/// Brute-force W2 over all couplings of two equal-size samples.
inline double brute_force_w2(std::vector<double> a, const std::vector<double>& b) {
    std::sort(a.begin(), a.end());
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        best = std::min(best, s);
    } while (std::next_permutation(a.begin(), a.end()));
    return std::sqrt(best / static_cast<double>(a.size()));
}

/// Solution of a scalar ODE y' = f(y) on a fine uniform grid by RK4,
/// integrated backward from y(T) = yT when backward is true.
template <class F>
std::vector<double> rk4(F f, double y_end, double T, std::size_t steps, bool backward) {
    std::vector<double> y(steps + 1);
    const double h = T / static_cast<double>(steps);
    const double s = backward ? -1.0 : 1.0;
    std::size_t idx = backward ? steps : 0;
    y[idx] = y_end;
    for (std::size_t n = 0; n < steps; ++n) {
        const double v = y[idx];
        const double k1 = s * f(v), k2 = s * f(v + h / 2 * k1), k3 = s * f(v + h / 2 * k2), k4 = s * f(v + h * k3);
        const double nv = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        idx = backward ? idx - 1 : idx + 1;
        y[idx] = nv;
    }
    return y;
}

/// Costate gain of the uncontrolled linear-quadratic adjoint:
/// pi' = -(2 a pi + lambda), pi(T) = kappa, so p(t) = pi(t) X(t).
inline std::vector<double> adjoint_gain(double a, double lambda, double kappa, double T, std::size_t steps) {
    return rk4([&](double p) { return -(2.0 * a * p + lambda); }, kappa, T, steps, true);
}

/// Open-loop optimum of the mean-field linear-quadratic problem with drift
/// A x + c u (A = a + abar when the mean enters the drift), running cost
/// (lambda x^2 + u^2) / 2 and terminal cost kappa x^2 / 2. With
/// P' = -(2 A P + lambda - c^2 P^2), P(T) = kappa and m' = (A - c^2 P) m,
/// m(0) = x0, the optimal deterministic control is u(t) = -c P(t) m(t).
/// Returns the cell averages of u on an n-cell grid.
inline std::vector<double> riccati_open_loop(double A, double c, double lambda, double kappa, double x0,
                                             double T, std::size_t n, std::size_t refine = 2000) {
    const std::size_t steps = n * refine;
    const double h = T / static_cast<double>(steps);
    const auto P = rk4([&](double p) { return -(2.0 * A * p + lambda - c * c * p * p); }, kappa, T, steps, true);
    std::vector<double> m(steps + 1);
    m[0] = x0;
    for (std::size_t s = 0; s < steps; ++s) {
        const double pm = 0.5 * (P[s] + P[s + 1]);
        auto f = [&](double mm, double p) { return (A - c * c * p) * mm; };
        const double k1 = f(m[s], P[s]), k2 = f(m[s] + h / 2 * k1, pm), k3 = f(m[s] + h / 2 * k2, pm),
                     k4 = f(m[s] + h * k3, P[s + 1]);
        m[s + 1] = m[s] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    std::vector<double> u(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t s = k * refine; s < (k + 1) * refine; ++s) u[k] += -c * P[s] * m[s];
        u[k] /= static_cast<double>(refine);
    }
    return u;
}

/// Root-mean-square difference of two equal-length vectors.
inline double rms(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace oracle
