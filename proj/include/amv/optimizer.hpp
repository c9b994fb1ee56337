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

#include <string>
#include <vector>

#include "amv/adjoint.hpp"
#include "amv/forward.hpp"
#include "amv/variational.hpp"

namespace amv {

/// l + b p + sigma q.
double hamiltonian(const ProblemSpec& spec, double t, double x, const EmpiricalMeasure& mu, double u,
                   double p, double q);
/// d_u l + (d_u b) p + (d_u sigma) q.
double hamiltonian_u_gradient(const ProblemSpec& spec, double t, double x,
                              const EmpiricalMeasure& mu, double u, double p, double q);

struct CostEstimate {
    double value = 0.0;
    double standard_error = 0.0;
};

/// Cloud average of g(X_N, mu_N) + sum_k l(t_k, X_k, mu_{k+d}, u_k) dt and
/// its standard error over particles.
CostEstimate evaluate_cost(const ProblemSpec& spec, const ParticleEnsemble& ensemble,
                           const Control& control);
/// Solves the forward problem first. Throws NotConvergedError when the
/// forward iteration does not converge.
CostEstimate evaluate_cost(const ProblemSpec& spec, const Control& control, std::size_t particles,
                           std::uint64_t seed, const ForwardOptions& opts = {});

/// Per-cell gradient (1/M) sum_i d_u H(t_k, X_ik, mu_{k+d}, u_k, E_k[p_{k+1}]_i, q_ik).
std::vector<double> control_gradient(const Linearization& lin, const AdjointSolution& adjoint);

struct OptimalityReport {
    std::vector<double> gradient;
    std::vector<bool> violated;
    std::vector<bool> at_lower;
    std::vector<bool> at_upper;
    double max_interior_gradient = 0.0;
    /// max over cells of the projected-gradient violation
    double max_violation = 0.0;
    double grad_tol = 0.0;
    bool passed = false;
};

/// First-order conditions on U = [lo, hi]: |g| <= tol inside, g >= -tol at
/// lo, g <= tol at hi.
OptimalityReport optimality_report(const Control& control, const std::vector<double>& gradient,
                                   double grad_tol);

struct OptimizeOptions {
    ForwardOptions forward;
    AdjointOptions adjoint;
    /// grad_tol = grad_tol_rel * (1 + |J(u_init)|)
    double grad_tol_rel = 1e-3;
    std::size_t max_outer = 100;
    double step0 = 1.0;
    double armijo_c = 1e-4;
    std::size_t max_halvings = 30;
};

struct TraceRow {
    std::size_t iteration = 0;
    double cost = 0.0;
    double standard_error = 0.0;
    double max_grad = 0.0;
    double step_size = 0.0;
};

struct OptimizeResult {
    Control control;
    OptimalityReport report;
    std::vector<TraceRow> trace;
    double scale = 1.0;
    bool stalled = false;
};

/// Projected gradient descent with Armijo backtracking on the common-noise
/// cost estimate. Stops when the optimality report passes, after
/// max_outer updates, or when the line search fails (stalled).
OptimizeResult optimize(const ProblemSpec& spec, const Control& u_init, std::size_t particles,
                        std::uint64_t seed, const OptimizeOptions& opts = {});

struct GradientCheckRow {
    double theta = 0.0;
    double finite_difference = 0.0;
    double gap = 0.0;
};

struct GradientCheckReport {
    std::vector<GradientCheckRow> rows;
    /// sum_k dt g_k (u - u*)_k from the adjoint
    double adjoint_directional = 0.0;
    /// E[zeta Y_N] + sum_k dt E[d_x l Y_k + cloud(d_mu l) Y + d_u l v_k]
    double variational_directional = 0.0;
    double scale = 1.0;
    /// 5 M^{-1/2} scale
    double noise_floor = 0.0;
    /// gap(theta_{j+1}) / gap(theta_j) per consecutive pair
    std::vector<double> gap_ratios;
    /// Each consecutive ratio matches the halving of theta, or the gap is
    /// already at rounding level.
    bool ratio_test_passed = false;
};

GradientCheckReport gateaux_gradient_check(const ProblemSpec& spec, const Control& u_star,
                                           const Control& u, std::size_t particles,
                                           std::uint64_t seed, const std::vector<double>& thetas,
                                           const OptimizeOptions& opts = {});

struct DualityReport {
    double lhs = 0.0;  ///< E[p(T) Y(T)]
    double rhs = 0.0;  ///< the adjoint/variational integral identity term by term
    double gap = 0.0;
    double scale = 1.0;      ///< 1 + E|p(T) Y(T)|
    double tolerance = 0.0;  ///< 5 M^{-1/2} scale
    bool passed = false;
};

DualityReport duality_check(const ProblemSpec& spec, const Control& u_star, const Control& u,
                            std::size_t particles, std::uint64_t seed,
                            const OptimizeOptions& opts = {});

}  // namespace amv
