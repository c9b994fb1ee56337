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

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace amv {

using ScalarMap = std::function<double(double)>;

/// Equally weighted empirical probability measure on the real line.
///
/// Samples are sorted once at construction (stable, so ties keep their
/// input order) and shared immutably between copies. Mean and second moment
/// are cached because every built-in coefficient reads them once per
/// particle per step.
class EmpiricalMeasure {
public:
    /// Throws ConfigError when empty and NonFiniteError on NaN/Inf samples.
    explicit EmpiricalMeasure(std::vector<double> samples);
    explicit EmpiricalMeasure(std::span<const double> samples);

    static EmpiricalMeasure dirac(double x);

    std::size_t size() const noexcept { return sorted_->size(); }
    std::span<const double> samples() const noexcept { return *sorted_; }
    double operator[](std::size_t i) const noexcept { return (*sorted_)[i]; }

    double mean() const noexcept { return mean_; }
    double second_moment() const noexcept { return second_moment_; }
    double variance() const noexcept { return second_moment_ - mean_ * mean_; }

private:
    std::shared_ptr<const std::vector<double>> sorted_;
    double mean_ = 0.0;
    double second_moment_ = 0.0;
};

/// Exact W2 between equal-size empirical measures via the monotone coupling.
/// Throws ConfigError("sample-count mismatch") when sizes differ.
double wasserstein2(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2);

/// (1/M) sum f(sample_i). Throws NonFiniteError("non-finite statistic").
double statistic(const EmpiricalMeasure& mu, const ScalarMap& f);

/// phi(mu) = g(integral of f against mu), together with the derivatives
/// needed for its Lions derivative g'(int f dmu) f'(y).
struct StatisticFunctional {
    ScalarMap f;
    ScalarMap df;
    ScalarMap g;
    ScalarMap dg;

    double operator()(const EmpiricalMeasure& mu) const;

    static StatisticFunctional mean();
};

double lions_derivative_statistic(const StatisticFunctional& phi,
                                  const EmpiricalMeasure& mu, double y);

/// Returns the forward difference [phi(P_{zeta + eps eta}) - phi(P_zeta)] / eps
/// and the lifted derivative (1/M) sum_i d_mu phi(P_zeta, zeta_i) eta_i.
/// The two agree to O(eps).
std::pair<double, double> lifted_directional_derivative_check(
    const StatisticFunctional& phi, std::span<const double> zeta,
    std::span<const double> eta, double eps);

}  // namespace amv
