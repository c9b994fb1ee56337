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

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "amv/grid.hpp"
#include "amv/measure.hpp"

namespace amv {

/// (t, x, mu, u) -> real. Must be pure: coefficients are called concurrently.
using Coefficient = std::function<double(double t, double x, const EmpiricalMeasure& mu, double u)>;
/// (x, mu) -> real, for the terminal cost and its state derivative.
using TerminalCoefficient = std::function<double(double x, const EmpiricalMeasure& mu)>;

/// Lions derivative (d_mu h)(t, x, mu, y, u) of a coefficient h.
///
/// Two representations are supported. The separable one,
///     d_mu h(t, x, mu, y, u) = outer(t, x, mu, u) * inner(t, mu, y),
/// covers every coefficient of the form F(t, x, int f dmu, u) and lets cloud
/// averages over y be computed in O(M) per time step. The general one is an
/// arbitrary callback and costs O(M^2) per time step. A default-constructed
/// object is identically zero.
class LionsDerivative {
public:
    using Outer = std::function<double(double t, double x, const EmpiricalMeasure& mu, double u)>;
    using Inner = std::function<double(double t, const EmpiricalMeasure& mu, double y)>;
    using General =
        std::function<double(double t, double x, const EmpiricalMeasure& mu, double y, double u)>;

    LionsDerivative() = default;
    static LionsDerivative separable(Outer outer, Inner inner);
    static LionsDerivative general(General fn);
    /// d_mu of F(t, x, g(int f dmu), u) where outer_dm is dF/dm.
    static LionsDerivative statistic(Outer outer_dm, StatisticFunctional phi);

    bool is_zero() const noexcept { return !general_ && !outer_; }
    bool is_separable() const noexcept { return static_cast<bool>(outer_); }

    double operator()(double t, double x, const EmpiricalMeasure& mu, double y, double u) const;
    double outer(double t, double x, const EmpiricalMeasure& mu, double u) const;
    double inner(double t, const EmpiricalMeasure& mu, double y) const;
    /// inner(t, mu, y) for every y. The statistic form evaluates its
    /// integral once instead of once per point.
    std::vector<double> inner_values(double t, const EmpiricalMeasure& mu,
                                     std::span<const double> ys) const;

private:
    Outer outer_;
    Inner inner_;
    General general_;
    std::shared_ptr<const StatisticFunctional> statistic_;
};

/// Controlled anticipating McKean-Vlasov problem on [0, T] with U = [lo, hi].
struct ProblemSpec {
    std::string name;
    std::map<std::string, double> params;

    double x0 = 0.0;
    double horizon = 1.0;
    double delta = 0.0;
    double lipschitz_C = 1.0;
    double control_lo = -1.0;
    double control_hi = 1.0;

    Coefficient b;
    Coefficient sigma;
    Coefficient l;
    TerminalCoefficient g;

    Coefficient db_dx;
    Coefficient dsigma_dx;
    Coefficient dl_dx;
    Coefficient db_du;
    Coefficient dsigma_du;
    Coefficient dl_du;
    LionsDerivative db_dmu;
    LionsDerivative dsigma_dmu;
    LionsDerivative dl_dmu;
    TerminalCoefficient dg_dx;
    LionsDerivative dg_dmu;

    /// True when b == 0 and sigma ignores x: the setting in which the
    /// difference-quotient convergence of the state derivative is proved.
    /// Everything else is reported as a conjectured extension.
    bool driftless_state_free_diffusion = false;

    /// 1 / (7 C): largest lag for which the forward Picard map is a proven
    /// contraction with factor sqrt(2/3).
    double forward_delta0() const { return 1.0 / (7.0 * lipschitz_C); }

    /// Throws ConfigError when a required coefficient is missing or the
    /// constants are inconsistent.
    void check_complete() const;
};

/// Deterministic open-loop control, piecewise constant on the grid cells.
class Control {
public:
    /// Throws ConfigError when the length differs from the cell count or a
    /// value lies outside [lo, hi].
    Control(TimeGrid grid, std::vector<double> values, double lo, double hi);

    static Control constant(const TimeGrid& grid, double value, double lo, double hi);
    static Control constant(const TimeGrid& grid, double value, const ProblemSpec& spec);
    /// Projects arbitrary values onto [lo, hi].
    static Control clamped(const TimeGrid& grid, std::vector<double> values, double lo, double hi);

    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    std::size_t size() const noexcept { return values_.size(); }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

    /// this + theta (other - this); stays admissible since U is convex.
    Control interpolate(const Control& other, double theta) const;

private:
    TimeGrid grid_;
    std::vector<double> values_;
    double lo_;
    double hi_;
};

struct DerivativeCheck {
    std::string name;
    double max_abs_error = 0.0;
};

struct ValidationReport {
    double lipschitz_ratio_b = 0.0;
    double lipschitz_ratio_sigma = 0.0;
    std::vector<DerivativeCheck> derivative_checks;
    double max_derivative_mismatch = 0.0;
    double delta0 = 0.0;
    bool delta_within_forward_regime = false;
};

/// Probes the coefficients at n_probes random points: sampled Lipschitz
/// ratios of b and sigma, central-difference checks of every supplied
/// partial, and lifted finite-difference checks of the Lions derivatives.
/// Throws NonFiniteError naming the coefficient and probe point.
ValidationReport validate(const ProblemSpec& spec, std::uint64_t rng_seed, std::size_t n_probes);

/// Names accepted by builtin().
std::vector<std::string> builtin_names();

/// Built-in benchmark problems. Common keys: x0, T, delta, C, u_lo, u_hi.
///   "constant":              b, sigma constants; l = u^2, g = x.
///   "deterministic-mean":    sigma = 0, b = mean of mu; l = u^2 / 2, g = x^2 / 2.
///   "decoupled":             b = a x + c u (+ sin_amp sin x), sigma = sigma0,
///                            l = (lambda x^2 + u^2) / 2, g = kappa x^2 / 2.
///   "lq-anticipating-mean":  as "decoupled" plus abar * mean(mu) in b.
/// Throws ConfigError listing the available names for an unknown one.
ProblemSpec builtin(const std::string& name, const std::map<std::string, double>& params);

}  // namespace amv
