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
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "amv/error.hpp"
#include "amv/measure.hpp"
#include "oracles.hpp"

using amv::EmpiricalMeasure;

namespace {

std::vector<double> normals(std::mt19937_64& gen, std::size_t n) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (double& x : v) x = d(gen);
    return v;
}

}  // namespace

TEST_CASE("two-point W2 matches the hand coupling") {
    const EmpiricalMeasure a(std::vector<double>{0.0, 2.0});
    const EmpiricalMeasure b(std::vector<double>{3.0, 1.0});
    CHECK(amv::wasserstein2(a, b) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(oracle::brute_force_w2({0.0, 2.0}, {3.0, 1.0}) == doctest::Approx(1.0));
}

TEST_CASE("W2 equals the permutation brute force for small samples") {
    std::mt19937_64 gen(11);
    for (int pair = 0; pair < 100; ++pair) {
        const std::size_t m = 1 + pair % 6;
        const auto a = normals(gen, m);
        const auto b = normals(gen, m);
        const double w = amv::wasserstein2(EmpiricalMeasure(a), EmpiricalMeasure(b));
        CHECK(std::abs(w - oracle::brute_force_w2(a, b)) <= 1e-12);
    }
}

TEST_CASE("W2 metric axioms") {
    std::mt19937_64 gen(12);
    for (int t = 0; t < 50; ++t) {
        const std::size_t m = 2 + t;
        const EmpiricalMeasure a(normals(gen, m)), b(normals(gen, m)), c(normals(gen, m));
        CHECK(amv::wasserstein2(a, a) == 0.0);
        CHECK(std::abs(amv::wasserstein2(a, b) - amv::wasserstein2(b, a)) <= 1e-12);
        CHECK(amv::wasserstein2(a, c) <= amv::wasserstein2(a, b) + amv::wasserstein2(b, c) + 1e-12);
        CHECK(amv::wasserstein2(a, b) >= 0.0);
    }
}

TEST_CASE("W2 between shifted measures is the shift") {
    const std::vector<double> base{0.3, -1.2, 2.5, 0.0};
    std::vector<double> shifted = base;
    for (double& x : shifted) x += 0.75;
    CHECK(amv::wasserstein2(EmpiricalMeasure(base), EmpiricalMeasure(shifted)) == doctest::Approx(0.75));
}

TEST_CASE("W2 rejects unequal sample counts") {
    const EmpiricalMeasure a(std::vector<double>{1.0, 2.0});
    const EmpiricalMeasure b(std::vector<double>{1.0, 2.0, 3.0});
    CHECK_THROWS_WITH_AS(amv::wasserstein2(a, b), "sample-count mismatch", amv::ConfigError);
}

TEST_CASE("empirical measure moments and validation") {
    const EmpiricalMeasure mu(std::vector<double>{3.0, 1.0, 2.0});
    CHECK(mu.mean() == doctest::Approx(2.0));
    CHECK(mu.variance() == doctest::Approx(2.0 / 3.0));
    CHECK(mu[0] == 1.0);
    CHECK(amv::EmpiricalMeasure::dirac(4.0).mean() == 4.0);
    CHECK_THROWS_AS(EmpiricalMeasure(std::vector<double>{}), amv::ConfigError);
    CHECK_THROWS_AS(EmpiricalMeasure(std::vector<double>{1.0, NAN}), amv::NonFiniteError);
}

TEST_CASE("statistic flags non-finite values") {
    const EmpiricalMeasure mu(std::vector<double>{0.0, 1.0});
    CHECK(amv::statistic(mu, [](double x) { return x * x; }) == doctest::Approx(0.5));
    CHECK_THROWS_WITH_AS(amv::statistic(mu, [](double x) { return 1.0 / x; }), "non-finite statistic",
                         amv::NonFiniteError);
}

TEST_CASE("Lions derivative of a statistic functional") {
    const amv::StatisticFunctional square_of_mean{[](double x) { return x; }, [](double) { return 1.0; },
                                                  [](double s) { return s * s; },
                                                  [](double s) { return 2.0 * s; }};
    const EmpiricalMeasure mu(std::vector<double>{1.0, 2.0, 3.0});
    // g'(mean) f'(y) = 2 * 2 * 1
    CHECK(amv::lions_derivative_statistic(square_of_mean, mu, -7.0) == doctest::Approx(4.0));
    CHECK(amv::lions_derivative_statistic(amv::StatisticFunctional::mean(), mu, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("lifted directional derivative error is first order in eps") {
    std::mt19937_64 gen(13);
    const auto zeta = normals(gen, 64);
    const auto eta = normals(gen, 64);
    const std::vector<amv::StatisticFunctional> families{
        amv::StatisticFunctional::mean(),
        {[](double x) { return x * x; }, [](double x) { return 2.0 * x; }, [](double s) { return s; },
         [](double) { return 1.0; }},
        {[](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
         [](double s) { return std::exp(s); }, [](double s) { return std::exp(s); }},
    };
    for (const auto& phi : families) {
        const auto [fd1, lifted] = amv::lifted_directional_derivative_check(phi, zeta, eta, 1e-3);
        const auto [fd2, lifted2] = amv::lifted_directional_derivative_check(phi, zeta, eta, 5e-4);
        CHECK(lifted == lifted2);
        const double e1 = std::abs(fd1 - lifted), e2 = std::abs(fd2 - lifted);
        if (e1 > 1e-9) {
            CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.3));
        } else {
            CHECK(e2 <= 1e-9);
        }
    }
}
