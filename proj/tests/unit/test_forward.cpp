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
#include <string>

#include "amv/error.hpp"
#include "amv/forward.hpp"
#include "amv/parallel.hpp"
#include "oracles.hpp"

using amv::Control;
using amv::TimeGrid;

TEST_CASE("increments: sane moments and stable per-particle streams") {
    const TimeGrid grid(1.0, 50, 0.0);
    const amv::PathMatrix big = amv::brownian_increments(grid, 4000, 9);
    CHECK(amv::check_increments(big, grid).ok());
    const amv::PathMatrix small = amv::brownian_increments(grid, 10, 9);
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t k = 0; k < 50; ++k) CHECK(small(i, k) == big(i, k));
    }
    CHECK_FALSE(amv::max_abs_difference(amv::brownian_increments(grid, 10, 10), small) == 0.0);
}

TEST_CASE("weighted norm of a unit path") {
    const TimeGrid grid(1.0, 1000, 0.0);
    const amv::PathMatrix ones(3, 1001, 1.0);
    const double w = amv::weighted_norm(ones, grid, 7.0);
    CHECK(w == doctest::Approx(oracle::weighted_norm_of_one(7.0, 1.0, 1000)).epsilon(1e-13));
    CHECK(std::abs(w - oracle::kWeightedNormOfOne) <= 1e-4);
}

TEST_CASE("constant-coefficient problem converges in two sweeps") {
    const amv::ProblemSpec spec = amv::builtin("constant", {});
    const TimeGrid grid(1.0, 100, 0.0);
    const auto sol = amv::solve_forward(spec, Control::constant(grid, 0.0, spec), 500, 1);
    CHECK(sol.report.converged);
    CHECK(sol.report.iterations <= 2);
    CHECK(sol.report.beta == doctest::Approx(7.0));
    // X_T = x0 + T + W_T
    const auto& inc = sol.ensemble.increments();
    double w = 0.0;
    for (std::size_t k = 0; k < 100; ++k) w += inc(7, k);
    CHECK(sol.ensemble(7, 100) == doctest::Approx(2.0 + w).epsilon(1e-12));
}

TEST_CASE("oracle reproduces its frozen values") {
    CHECK(oracle::deterministic_mean(0.1, 1.0, 10000).back() == doctest::Approx(oracle::kDeterministicMeanDelta01).epsilon(1e-12));
    CHECK(oracle::deterministic_mean(0.0, 1.0, 10000).back() == doctest::Approx(oracle::kDeterministicMeanDelta0).epsilon(1e-12));
}

TEST_CASE("deterministic-mean cloud follows the scalar anticipating ODE") {
    for (double delta : {0.1, 0.0}) {
        CAPTURE(delta);
        const amv::ProblemSpec spec = amv::builtin("deterministic-mean", {{"delta", delta}});
        const TimeGrid grid(1.0, 1000, delta);
        const auto sol = amv::solve_forward(spec, Control::constant(grid, 0.0, spec), 2, 1);
        CHECK(sol.report.converged);
        const double mean_T = sol.ensemble.law(1000).mean();
        // same discretization: agreement to the Picard tolerance
        CHECK(std::abs(mean_T - oracle::deterministic_mean(delta, 1.0, 1000).back()) <= 1e-7);
        const double fine = delta > 0.0 ? oracle::kDeterministicMeanDelta01 : std::exp(1.0);
        CHECK(std::abs(mean_T - fine) <= 2e-3);
    }
}

TEST_CASE("zero lag agrees pathwise with the direct Euler scheme") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {{"sin_amp", 0.3}});
    const TimeGrid grid(1.0, 50, 0.0);
    const Control u = Control::constant(grid, 0.2, spec);
    amv::ForwardOptions opts;
    opts.tol = 1e-10;
    const auto sol = amv::solve_forward(spec, u, 300, 4, opts);
    const auto direct = amv::solve_direct_euler(spec, u, 300, 4);
    CHECK(amv::max_abs_difference(sol.ensemble.paths(), direct.paths()) <= 1e-8);
}

TEST_CASE("law-only Picard reaches the same fixed point") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {{"delta", 0.1}});
    const TimeGrid grid(1.0, 50, 0.1);
    const Control u = Control::constant(grid, 0.0, spec);
    amv::ForwardOptions full, law;
    full.tol = law.tol = 1e-11;
    law.mode = amv::PicardMode::law_only;
    const auto a = amv::solve_forward(spec, u, 300, 2, full);
    const auto b = amv::solve_forward(spec, u, 300, 2, law);
    CHECK(b.report.iterations <= a.report.iterations);
    CHECK(amv::max_abs_difference(a.ensemble.paths(), b.ensemble.paths()) <= 1e-8);
}

TEST_CASE("Picard residual ratios respect the contraction factor at the threshold lag") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {{"delta", 1.0 / 7.0}});
    const TimeGrid grid(1.0, 70, 1.0 / 7.0);
    const Control u = Control::constant(grid, 0.0, spec);
    const auto sol = amv::solve_forward(spec, u, 400, 3);
    CHECK(sol.report.converged);
    for (double r : sol.report.contraction_estimates) CHECK(r <= std::sqrt(2.0 / 3.0));
    for (double r : amv::contraction_probe(spec, u, 200, 3, 5)) CHECK(r <= std::sqrt(2.0 / 3.0));
}

TEST_CASE("a strongly anticipating problem is reported as divergent") {
    const amv::ProblemSpec spec =
        amv::builtin("lq-anticipating-mean", {{"a", 0.0}, {"abar", 5.0}, {"delta", 1.0}});
    const TimeGrid grid(1.0, 10, 1.0);
    CHECK_THROWS_WITH_AS(amv::solve_forward(spec, Control::constant(grid, 0.0, spec), 50, 1),
                         "Picard divergence — check δ ≤ 1/(7C)", amv::DivergenceError);
}

TEST_CASE("residual bookkeeping") {
    amv::FixedPointReport rep;
    amv::record_residual(rep, 1.0, "div");
    amv::record_residual(rep, 0.5, "div");
    CHECK(rep.contraction_estimates.back() == doctest::Approx(0.5));
    amv::record_residual(rep, 0.6, "div");
    amv::record_residual(rep, 0.7, "div");
    CHECK_THROWS_WITH_AS(amv::record_residual(rep, 0.8, "div"), "div", amv::DivergenceError);

    amv::FixedPointReport bumpy;
    for (double r : {1.0, 0.1, 0.2, 1e-9}) amv::record_residual(bumpy, r, "div");
    amv::finalize_report(bumpy, 1e-8);
    CHECK_FALSE(bumpy.converged);
}

TEST_CASE("max_iter without convergence") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {});
    const TimeGrid grid(1.0, 20, 0.0);
    amv::ForwardOptions opts;
    opts.max_iter = 2;
    const auto sol = amv::solve_forward(spec, Control::constant(grid, 0.0, spec), 20, 1, opts);
    CHECK_FALSE(sol.report.converged);
    CHECK(sol.report.iterations == 2);
    opts.throw_on_max_iter = true;
    CHECK_THROWS_AS(amv::solve_forward(spec, Control::constant(grid, 0.0, spec), 20, 1, opts),
                    amv::NotConvergedError);
}

TEST_CASE("non-finite state names particle and step") {
    amv::ProblemSpec spec = amv::builtin("constant", {});
    spec.b = [](double t, double, const amv::EmpiricalMeasure&, double) { return t > 0.5 ? NAN : 1.0; };
    const TimeGrid grid(1.0, 10, 0.0);
    try {
        amv::solve_forward(spec, Control::constant(grid, 0.0, spec), 4, 1);
        FAIL("expected NonFiniteError");
    } catch (const amv::NonFiniteError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("particle") != std::string::npos);
        CHECK(msg.find("step") != std::string::npos);
    }
}

TEST_CASE("grid and problem must agree") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {{"delta", 0.1}});
    const TimeGrid wrong(1.0, 10, 0.2);
    CHECK_THROWS_AS(amv::solve_forward(spec, Control::constant(wrong, 0.0, spec), 10, 1), amv::ConfigError);
}

TEST_CASE("paths do not depend on the worker count") {
    const amv::ProblemSpec spec = amv::builtin("lq-anticipating-mean", {{"delta", 0.1}, {"sin_amp", 0.2}});
    const TimeGrid grid(1.0, 40, 0.1);
    const Control u = Control::constant(grid, 0.1, spec);
    amv::set_thread_count(1);
    const auto one = amv::solve_forward(spec, u, 257, 8);
    amv::set_thread_count(5);
    const auto five = amv::solve_forward(spec, u, 257, 8);
    amv::set_thread_count(0);
    CHECK(one.ensemble.paths() == five.ensemble.paths());
    CHECK(one.report.residuals == five.report.residuals);
}
