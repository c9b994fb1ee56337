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

#include "amv/forward.hpp"
#include "amv/linearization.hpp"

namespace amv {

/// Gateaux derivative Y of the state in the direction u - u*, Y(0) = 0.
struct VariationalEnsemble {
    PathMatrix y_paths;              ///< M x (N + 1)
    std::vector<double> direction;   ///< u - u*, one value per cell
};

struct VariationalSolution {
    VariationalEnsemble ensemble;
    FixedPointReport report;
};

/// Picard iteration on the Euler discretization of the linear variational
/// equation around base (the converged solution under u_star). The cloud
/// term at cell (i, k) is (1/M) sum_j d_mu h(t_k, X_ik, mu_{k+d}, X_{j,k+d}, u_k)
/// Y_{j,k+d}. Same weighted norm, stopping and divergence rules as
/// solve_forward.
VariationalSolution solve_variational(const ProblemSpec& spec, const ParticleEnsemble& base,
                                      const Control& u_star, const Control& u,
                                      const ForwardOptions& opts = {});

/// As above with the linearization precomputed.
VariationalSolution solve_variational(const Linearization& lin, const std::vector<double>& direction,
                                      const ForwardOptions& opts = {});

struct DifferenceQuotientReport {
    std::vector<double> thetas;
    /// (1/M) sum_i sup_k |Y_i(t_k) - (X^theta_i(t_k) - X*_i(t_k)) / theta|^2
    std::vector<double> errors;
    /// "proved case" when b = 0 and sigma ignores x, else "conjectured extension".
    std::string scope;
};

/// Throws ConfigError unless thetas lie in (0, 1] and strictly decrease.
DifferenceQuotientReport difference_quotient_check(const ProblemSpec& spec, const Control& u_star,
                                                   const Control& u,
                                                   const std::vector<double>& thetas,
                                                   std::size_t particles, std::uint64_t seed,
                                                   const ForwardOptions& opts = {});

}  // namespace amv
