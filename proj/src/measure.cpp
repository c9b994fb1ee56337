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
#include "amv/measure.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "amv/error.hpp"

namespace amv {

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> samples) {
    if (samples.empty()) {
        throw ConfigError("empirical measure needs at least one sample");
    }
    for (double s : samples) {
        if (!std::isfinite(s)) {
            throw NonFiniteError("empirical measure sample is not finite");
        }
    }
    std::stable_sort(samples.begin(), samples.end());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double s : samples) {
        sum += s;
        sum_sq += s * s;
    }
    const auto m = static_cast<double>(samples.size());
    mean_ = sum / m;
    second_moment_ = sum_sq / m;
    sorted_ = std::make_shared<const std::vector<double>>(std::move(samples));
}

EmpiricalMeasure::EmpiricalMeasure(std::span<const double> samples)
    : EmpiricalMeasure(std::vector<double>(samples.begin(), samples.end())) {}

EmpiricalMeasure EmpiricalMeasure::dirac(double x) {
    return EmpiricalMeasure(std::vector<double>{x});
}

double wasserstein2(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2) {
    if (mu1.size() != mu2.size()) {
        throw ConfigError("sample-count mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < mu1.size(); ++i) {
        const double d = mu1[i] - mu2[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(mu1.size()));
}

double statistic(const EmpiricalMeasure& mu, const ScalarMap& f) {
    double acc = 0.0;
    for (double s : mu.samples()) {
        const double v = f(s);
        if (!std::isfinite(v)) {
            throw NonFiniteError("non-finite statistic");
        }
        acc += v;
    }
    return acc / static_cast<double>(mu.size());
}

double StatisticFunctional::operator()(const EmpiricalMeasure& mu) const {
    const double v = g(statistic(mu, f));
    if (!std::isfinite(v)) throw NonFiniteError("non-finite statistic functional");
    return v;
}

StatisticFunctional StatisticFunctional::mean() {
    auto id = [](double x) { return x; };
    auto one = [](double) { return 1.0; };
    return {id, one, id, one};
}

double lions_derivative_statistic(const StatisticFunctional& phi,
                                  const EmpiricalMeasure& mu, double y) {
    const double outer = phi.dg(statistic(mu, phi.f));
    const double inner = phi.df(y);
    const double v = outer * inner;
    if (!std::isfinite(v)) {
        throw NonFiniteError("non-finite Lions derivative at y=" + std::to_string(y));
    }
    return v;
}

std::pair<double, double> lifted_directional_derivative_check(
    const StatisticFunctional& phi, std::span<const double> zeta,
    std::span<const double> eta, double eps) {
    if (zeta.size() != eta.size()) {
        throw ConfigError("lifted derivative check: zeta and eta lengths differ");
    }
    if (!(eps > 0.0)) {
        throw ConfigError("lifted derivative check: eps must be positive");
    }
    std::vector<double> shifted(zeta.size());
    for (std::size_t i = 0; i < zeta.size(); ++i) shifted[i] = zeta[i] + eps * eta[i];

    const EmpiricalMeasure base(zeta);
    const EmpiricalMeasure moved(shifted);
    const double quotient = (phi(moved) - phi(base)) / eps;

    double lifted = 0.0;
    for (std::size_t i = 0; i < zeta.size(); ++i) {
        lifted += lions_derivative_statistic(phi, base, zeta[i]) * eta[i];
    }
    lifted /= static_cast<double>(zeta.size());
    return {quotient, lifted};
}

}  // namespace amv
