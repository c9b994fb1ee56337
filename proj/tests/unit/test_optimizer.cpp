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

#include "amv/optimizer.hpp"
#include "oracles.hpp"

using amv::Control;
using amv::TimeGrid;

namespace {

Control wave(const TimeGrid& grid, const amv::ProblemSpec& spec) {
    std::vector<double> v(grid.steps());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::sin(3.0 * grid.time(k));
    return Control::clamped(grid, v, spec.control_lo, spec.control_hi);
}

}  // namespace

TEST_CASE("Hamiltonian control gradient matches central differences") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {{"sin_amp", 0.3}, {"c", 0.7}});
    std::mt19937_64 gen(21);
    std::normal_distribution<double> normal;
    for (int probe = 0; probe < 100; ++probe) {
        std::vector<double> s(6);
        for (double& y : s) y = normal(gen);
        const amv::EmpiricalMeasure mu(s);
        const double t = 0.5, x = normal(gen), u = normal(gen), p = normal(gen), q = normal(gen);
        const double h = 1e-4;
        const double fd = (amv::hamiltonian(spec, t, x, mu, u + h, p, q) - amv::hamiltonian(spec, t, x, mu, u - h, p, q)) /
                          (2.0 * h);
        CHECK(fd == doctest::Approx(amv::hamiltonian_u_gradient(spec, t, x, mu, u, p, q)).epsilon(1e-8));
    }
}

TEST_CASE("first-order report on the box") {
    const TimeGrid grid(1.0, 4, 0.0);
    const Control u(grid, {-1.0, 0.0, 1.0, 0.5}, -1.0, 1.0);
    const auto ok = amv::optimality_report(u, {2.0, 5e-4, -2.0, -5e-4}, 1e-3);
    CHECK(ok.passed);
    CHECK(ok.at_lower[0]);
    CHECK(ok.at_upper[2]);
    CHECK(ok.max_interior_gradient == doctest::Approx(5e-4));

    const auto bad = amv::optimality_report(u, {-2.0, 0.0, 2.0, 0.1}, 1e-3);
    CHECK_FALSE(bad.passed);
    CHECK(bad.violated == std::vector<bool>{true, false, true, true});
    CHECK(bad.max_violation == doctest::Approx(2.0));
}

TEST_CASE("cost of the constant problem") {
    const amv::ProblemSpec spec = amv::builtin("constant", {});
    const TimeGrid grid(1.0, 20, 0.0);
    // E[X_T] + int u^2 = (1 + 1) + 0.25
    const auto cost = amv::evaluate_cost(spec, Control::constant(grid, 0.5, spec), 4000, 5);
    CHECK(cost.standard_error > 0.0);
    CHECK(std::abs(cost.value - 2.25) <= 5.0 * cost.standard_error);
}

TEST_CASE("cost of the deterministic mean problem is its terminal energy") {
    const amv::ProblemSpec spec = amv::builtin("deterministic-mean", {{"delta", 0.1}});
    const TimeGrid grid(1.0, 100, 0.1);
    const auto cost = amv::evaluate_cost(spec, Control::constant(grid, 0.0, spec), 3, 1);
    const double m = oracle::deterministic_mean(0.1, 1.0, 100).back();
    CHECK(cost.value == doctest::Approx(0.5 * m * m).epsilon(1e-6));
    CHECK(cost.standard_error == 0.0);
}

TEST_CASE("an optimal start stops at once") {
    const amv::ProblemSpec spec = amv::builtin("constant", {});
    const TimeGrid grid(1.0, 20, 0.0);
    const auto res = amv::optimize(spec, Control::constant(grid, 0.0, spec), 200, 1);
    CHECK(res.report.passed);
    CHECK(res.trace.size() == 1);
    CHECK_FALSE(res.stalled);
}

TEST_CASE("no outer iterations leave the report failing") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {});
    const TimeGrid grid(1.0, 20, 0.0);
    amv::OptimizeOptions opts;
    opts.max_outer = 0;
    const auto res = amv::optimize(spec, Control::constant(grid, 2.0, spec), 200, 1, opts);
    CHECK_FALSE(res.report.passed);
    CHECK(res.report.max_violation > res.report.grad_tol);
}

TEST_CASE("projected gradient recovers the mean-field Riccati control") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {});
    const TimeGrid grid(1.0, 40, 0.0);
    const auto res = amv::optimize(spec, Control::constant(grid, 0.0, spec), 500, 2);
    CHECK(res.report.passed);
    for (std::size_t j = 1; j < res.trace.size(); ++j) CHECK(res.trace[j].cost <= res.trace[j - 1].cost);
    const auto u = oracle::riccati_open_loop(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 40);
    CHECK(oracle::rms(res.control.values(), u) <= 5e-2);
}

TEST_CASE("adjoint directional derivative agrees with the variational one") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {{"delta", 0.1}});
    const TimeGrid grid(1.0, 40, 0.1);
    const Control u_star = Control::constant(grid, 0.0, spec);
    const auto rep = amv::gateaux_gradient_check(spec, u_star, wave(grid, spec), 500, 3, {0.2, 0.1, 0.05});
    CHECK(rep.adjoint_directional == doctest::Approx(rep.variational_directional).epsilon(1e-6));
    CHECK(rep.ratio_test_passed);
    for (const auto& row : rep.rows) CHECK(row.gap <= rep.rows.front().gap / rep.rows.front().theta * row.theta + rep.noise_floor);
}

TEST_CASE("duality identity closes") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {{"delta", 0.05}, {"sin_amp", 0.2}});
    const TimeGrid grid(1.0, 40, 0.05);
    const auto rep = amv::duality_check(spec, Control::constant(grid, 0.0, spec), wave(grid, spec), 500, 4);
    CHECK(rep.passed);
    CHECK(rep.gap <= rep.tolerance);
}
