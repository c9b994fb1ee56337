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
#include <memory>
#include <vector>

#include "amv/grid.hpp"
#include "amv/measure.hpp"
#include "amv/problems.hpp"

namespace amv {

/// Brownian increments for M particles on a grid, M x N.
///
/// Particle i draws from its own std::mt19937_64 stream whose seed is
/// SplitMix64 applied to (seed, i), transformed with
/// std::normal_distribution. Particle i's increments therefore do not depend
/// on M. The generator pair is fixed for a release; changing it changes
/// every regression baseline.
PathMatrix brownian_increments(const TimeGrid& grid, std::size_t particles, std::uint64_t seed);

/// Largest 5-sigma-normalized deviation of the per-step sample mean and
/// sample variance of the increments from 0 and dt. Values above 1 fail.
struct IncrementSanity {
    double mean_score = 0.0;
    double variance_score = 0.0;
    bool ok() const noexcept { return mean_score <= 1.0 && variance_score <= 1.0; }
};
IncrementSanity check_increments(const PathMatrix& increments, const TimeGrid& grid);

/// M particle paths on the grid together with the noise that produced them.
/// Queries at nodes past N read node N (X(t) = X(T) for t >= T).
class ParticleEnsemble {
public:
    ParticleEnsemble(TimeGrid grid, std::uint64_t seed, PathMatrix paths,
                     std::shared_ptr<const PathMatrix> increments);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t particles() const noexcept { return paths_.particles(); }
    const PathMatrix& paths() const noexcept { return paths_; }
    const PathMatrix& increments() const noexcept { return *increments_; }
    const std::shared_ptr<const PathMatrix>& shared_increments() const noexcept {
        return increments_;
    }

    double operator()(std::size_t i, std::size_t k) const noexcept {
        return paths_(i, std::min(k, grid_.steps()));
    }
    EmpiricalMeasure law(std::size_t k) const;

    /// Same grid and noise, different paths.
    ParticleEnsemble with_paths(PathMatrix paths) const;

private:
    TimeGrid grid_;
    std::uint64_t seed_;
    PathMatrix paths_;
    std::shared_ptr<const PathMatrix> increments_;
};

/// Empirical law of every node 0..N of a path array.
std::vector<EmpiricalMeasure> node_laws(const PathMatrix& paths);

struct FixedPointReport {
    std::size_t iterations = 0;
    std::vector<double> residuals;
    double beta = 0.0;
    bool converged = false;
    std::vector<double> contraction_estimates;
};

/// Appends r to the report and updates the contraction estimates. Throws
/// DivergenceError(divergence_message) on the third consecutive increase.
void record_residual(FixedPointReport& report, double r, const char* divergence_message);

/// Sets converged: last residual <= tol and residuals strictly decreasing.
void finalize_report(FixedPointReport& report, double tol);

enum class PicardMode {
    full,      ///< state and law arguments both from the previous iterate
    law_only,  ///< law from the previous iterate, state from the current sweep
};

struct ForwardOptions {
    double tol = 1e-8;
    std::size_t max_iter = 200;
    PicardMode mode = PicardMode::full;
    /// Throw NotConvergedError instead of returning converged = false.
    bool throw_on_max_iter = false;
};

/// sqrt( (1/M) sum_i e^{-beta T} U_i(T)^2
///       + (6/7) beta (1/M) sum_i trapezoid_k e^{-beta t_k} U_i(t_k)^2 dt ).
double weighted_norm(const PathMatrix& diff, const TimeGrid& grid, double beta);

/// One application of the Picard map to prev with prev's noise. Throws
/// NonFiniteError naming particle and step when a state blows up.
ParticleEnsemble picard_step(const ParticleEnsemble& prev, const ProblemSpec& spec,
                             const Control& control, PicardMode mode = PicardMode::full);

/// Constant path x0 carrying the noise of (grid, M, seed).
ParticleEnsemble initial_guess(const ProblemSpec& spec, const TimeGrid& grid, std::size_t particles,
                               std::uint64_t seed);

struct ForwardSolution {
    ParticleEnsemble ensemble;
    FixedPointReport report;
};

/// Iterates picard_step from the constant guess until the beta = 7C weighted
/// residual drops to opts.tol. Throws DivergenceError after three
/// consecutive residual increases.
ForwardSolution solve_forward(const ProblemSpec& spec, const Control& control,
                              std::size_t particles, std::uint64_t seed,
                              const ForwardOptions& opts = {});

/// Non-iterative Euler-Maruyama with the current-time empirical law. Only
/// meaningful for delta = 0, where it is the discrete fixed point.
ParticleEnsemble solve_direct_euler(const ProblemSpec& spec, const Control& control,
                                    std::size_t particles, std::uint64_t seed);

/// Ratios ||Phi(U1) - Phi(U2)|| / ||U1 - U2|| in the beta = 7C norm for
/// n_pairs random path pairs sharing the noise of seed. Pairs with a zero
/// denominator are skipped.
std::vector<double> contraction_probe(const ProblemSpec& spec, const Control& control,
                                      std::size_t particles, std::uint64_t seed,
                                      std::size_t n_pairs);

}  // namespace amv
