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

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "amv/forward.hpp"
#include "amv/linearization.hpp"

namespace amv {

/// Drivers of a delayed BSDE with implicit terminal condition on a particle
/// cloud. With U, V the frozen candidate and d the lag in steps:
///
///   driver(i, k)   = phi( { theta(k, i, j, U_ik, V_ik, U_j(k-d), V_j(k-d)) }_j )
///   terminal(i)    = zeta_i + sum_{c in [N-d, N)} dt psi( { vartheta(c, i, j, U_jc, V_jc) }_j )
///
/// with U(t) = U(0), V(t) = 0 for t < 0. Empty phi / psi mean the cloud
/// average. The optional batch evaluators compute the same quantities for
/// all particles at once; the solver prefers them when set.
struct DriverAssembly {
    using Theta = std::function<double(std::size_t k, std::size_t i, std::size_t j, double x1,
                                       double x2, double x3, double x4)>;
    using Vartheta =
        std::function<double(std::size_t k, std::size_t i, std::size_t j, double x3, double x4)>;
    using Aggregate = std::function<double(std::span<const double>)>;
    using DriverBatch = std::function<PathMatrix(const PathMatrix& u, const PathMatrix& v)>;
    using TerminalBatch = std::function<std::vector<double>(const PathMatrix& u, const PathMatrix& v)>;

    Theta theta;
    Vartheta vartheta;
    Aggregate phi;
    Aggregate psi;
    std::vector<double> zeta;
    /// Lipschitz constant of theta in (x1..x4), used for the outer beta.
    double lipschitz_C = 1.0;

    /// M x N driver values; must agree with the generic definition.
    DriverBatch driver_batch;
    /// Implicit terminal part per particle (without zeta).
    TerminalBatch terminal_batch;
};

/// Sampled constants of an assembly on an M-particle, N-step cloud.
struct AssemblyCheck {
    double theta_lipschitz = 0.0;   ///< max |dtheta| / |dx|_1 over probes
    double vartheta_at_zero = 0.0;  ///< max |vartheta(., ., ., 0, 0)|
};
AssemblyCheck check_assembly(const DriverAssembly& assembly, std::size_t particles,
                             std::size_t steps, std::uint64_t seed, std::size_t n_probes);

/// Adjoint of the control problem around the converged base solution under
/// u_star: driver (d_x b) p + (d_x sigma) q + d_x l plus the lagged cloud
/// terms of d_mu b, d_mu sigma, d_mu l for t >= delta, zeta = d_x g plus the
/// cloud term of d_mu g, and the implicit terminal integrand over
/// [T - delta, T). Cloud terms use the swapped index order: the derivative is
/// evaluated at the copy's state and control with y = this particle's state.
DriverAssembly assemble_control_adjoint(std::shared_ptr<const Linearization> lin);
DriverAssembly assemble_control_adjoint(const ProblemSpec& spec, const ParticleEnsemble& base,
                                        const Control& u_star);

/// Least-squares projections onto {1, z, ..., z^degree} of the standardized
/// state z at every node, factorized once per base ensemble. The degree is
/// lowered at nodes where the Gram matrix is numerically singular; a cloud
/// with no spread uses the constant basis without a warning.
class BackwardRegressor {
public:
    BackwardRegressor(const ParticleEnsemble& base, int basis_degree);

    std::size_t particles() const noexcept { return particles_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const PathMatrix& increments() const noexcept { return *increments_; }
    int degree(std::size_t k) const noexcept { return degrees_[k]; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    /// Fitted values of target regressed on the basis at node k.
    std::vector<double> project(std::size_t k, std::span<const double> target) const;

private:
    struct Node {
        int degree = 0;
        std::vector<double> design;  // M x (degree + 1), row-major
        std::vector<double> solve;   // (degree + 1) x M, row-major pseudo-inverse
    };

    TimeGrid grid_;
    std::size_t particles_;
    std::shared_ptr<const PathMatrix> increments_;
    std::vector<Node> nodes_;
    std::vector<int> degrees_;
    std::vector<std::string> warnings_;
};

struct InnerSolution {
    PathMatrix p;          ///< M x (N + 1)
    PathMatrix p_pred;     ///< M x (N + 1), E_k[p_{k+1}], last column p_N
    PathMatrix q;          ///< M x N
    PathMatrix driver;     ///< M x N, driver evaluated on the frozen (U, V)
    std::vector<double> terminal_implicit_part;
};

/// Standard backward regression scheme with the delayed and law arguments
/// frozen at (u, v): p_N = zeta + implicit part, and for k = N-1..0
///   p_pred_k = E_k[p_{k+1}],  q_k = E_k[(p_{k+1} - p_pred_k) dB_k] / dt,
///   p_k = p_pred_k + driver_k dt.
/// u is M x (N + 1), v is M x N.
InnerSolution inner_bsde_solve(const BackwardRegressor& regressor, const DriverAssembly& assembly,
                               const PathMatrix& u, const PathMatrix& v);

struct AdjointOptions {
    double tol = 1e-8;
    std::size_t max_iter = 200;
    int basis_degree = 2;
    /// Overrides C_rho = C^2 / rho + C (rho = 1 / (8C)) in beta = C_rho + 1.
    double c_rho_override = 0.0;
    bool throw_on_max_iter = false;
};

/// beta = C_rho + 1 with rho = 1 / (8C) and C_rho = C^2 / rho + C, unless
/// c_rho_override > 0.
double bsde_beta(double lipschitz_C, double c_rho_override = 0.0);
/// Largest lag for which the outer map provably halves the squared norm:
/// min(1 / (8C), ln(3) / beta).
double bsde_delta0(double lipschitz_C, double beta);

/// sqrt( (1/M) sum_i U_i0^2 + (1/M) sum_i sum_{k<N} dt e^{beta t_k} (U_ik^2 + V_ik^2) ).
double bsde_norm(const PathMatrix& u, const PathMatrix& v, const TimeGrid& grid, double beta);

struct AdjointSolution {
    PathMatrix p_paths;       ///< M x (N + 1)
    PathMatrix q_paths;       ///< M x N
    /// E_k[p_{k+1}] (last column p_N): the costate the Euler scheme pairs
    /// with the control gradient.
    PathMatrix p_pred;
    PathMatrix driver;        ///< M x N
    std::vector<double> zeta;
    std::vector<double> terminal_implicit_part;
    /// mean_i |p_N - zeta - implicit part recomputed from the final (p, q)|
    double terminal_residual = 0.0;
    FixedPointReport report;
    double delta0 = 0.0;
    bool delta_within_regime = true;
    std::vector<std::string> warnings;
};

/// Outer fixed point (U, V) -> (p_pred, q) of inner_bsde_solve from (0, 0),
/// stopping when the bsde_norm of successive differences is <= opts.tol.
/// Throws DivergenceError after three consecutive residual increases.
AdjointSolution solve_adjoint(const BackwardRegressor& regressor, const DriverAssembly& assembly,
                              double delta, const AdjointOptions& opts = {});
AdjointSolution solve_adjoint(const ProblemSpec& spec, const ParticleEnsemble& base,
                              const Control& u_star, const AdjointOptions& opts = {});

/// One backward sweep with the driver evaluated on the current (p_pred, q):
/// the standard regression scheme for problems without law dependence.
/// Throws ConfigError when any Lions derivative of the problem is nonzero.
InnerSolution solve_classical_adjoint(const ProblemSpec& spec, const ParticleEnsemble& base,
                                      const Control& u_star, int basis_degree);

}  // namespace amv
