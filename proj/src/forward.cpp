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
#include "amv/forward.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "amv/error.hpp"
#include "amv/parallel.hpp"
#include "amv/rng.hpp"

namespace amv {

PathMatrix brownian_increments(const TimeGrid& grid, std::size_t particles, std::uint64_t seed) {
    const std::size_t n = grid.steps();
    const double scale = std::sqrt(grid.dt());
    PathMatrix out(particles, n);
    parallel_for(particles, [&](std::size_t i) {
        auto gen = substream(seed, i);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t k = 0; k < n; ++k) out(i, k) = scale * normal(gen);
    });
    return out;
}

IncrementSanity check_increments(const PathMatrix& increments, const TimeGrid& grid) {
    IncrementSanity s;
    const std::size_t m = increments.particles();
    if (m < 2) return s;
    const double dt = grid.dt();
    const auto md = static_cast<double>(m);
    for (std::size_t k = 0; k < increments.nodes(); ++k) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            sum += increments(i, k);
            sum_sq += increments(i, k) * increments(i, k);
        }
        const double mean = sum / md;
        const double var = sum_sq / md;
        s.mean_score = std::max(s.mean_score, std::abs(mean) / (5.0 * std::sqrt(dt / md)));
        s.variance_score =
            std::max(s.variance_score, std::abs(var / dt - 1.0) / (5.0 * std::sqrt(2.0 / md)));
    }
    return s;
}

ParticleEnsemble::ParticleEnsemble(TimeGrid grid, std::uint64_t seed, PathMatrix paths,
                                   std::shared_ptr<const PathMatrix> increments)
    : grid_(grid), seed_(seed), paths_(std::move(paths)), increments_(std::move(increments)) {
    if (paths_.nodes() != grid_.steps() + 1) {
        throw ConfigError("ensemble paths must have N + 1 nodes");
    }
    if (!increments_ || increments_->particles() != paths_.particles() ||
        increments_->nodes() != grid_.steps()) {
        throw ConfigError("ensemble increments must be M x N");
    }
}

EmpiricalMeasure ParticleEnsemble::law(std::size_t k) const {
    return EmpiricalMeasure(paths_.column(std::min(k, grid_.steps())));
}

ParticleEnsemble ParticleEnsemble::with_paths(PathMatrix paths) const {
    return ParticleEnsemble(grid_, seed_, std::move(paths), increments_);
}

std::vector<EmpiricalMeasure> node_laws(const PathMatrix& paths) {
    std::vector<std::optional<EmpiricalMeasure>> slots(paths.nodes());
    parallel_for(paths.nodes(), [&](std::size_t k) { slots[k].emplace(paths.column(k)); });
    std::vector<EmpiricalMeasure> laws;
    laws.reserve(slots.size());
    for (auto& s : slots) laws.push_back(std::move(*s));
    return laws;
}

double weighted_norm(const PathMatrix& diff, const TimeGrid& grid, double beta) {
    if (!(beta >= 0.0)) throw ConfigError("weighted norm needs beta >= 0");
    const std::size_t n = grid.steps();
    if (diff.nodes() != n + 1) throw ConfigError("weighted norm: path length must be N + 1");
    const std::size_t m = diff.particles();
    std::vector<double> weight(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const double trap = (k == 0 || k == n) ? 0.5 : 1.0;
        weight[k] = (6.0 / 7.0) * beta * trap * std::exp(-beta * grid.time(k)) * grid.dt();
    }
    weight[n] += std::exp(-beta * grid.horizon());

    std::vector<double> per_particle(m);
    parallel_for(m, [&](std::size_t i) {
        double acc = 0.0;
        const auto row = diff.row(i);
        for (std::size_t k = 0; k <= n; ++k) acc += weight[k] * row[k] * row[k];
        per_particle[i] = acc;
    });
    double total = 0.0;
    for (double v : per_particle) total += v;
    const double out = std::sqrt(total / static_cast<double>(m));
    if (!std::isfinite(out)) throw NonFiniteError("weighted norm is not finite");
    return out;
}

void record_residual(FixedPointReport& report, double r, const char* divergence_message) {
    ++report.iterations;
    std::size_t increases = 0;
    if (!report.residuals.empty()) {
        const double last = report.residuals.back();
        report.contraction_estimates.push_back(last > 0.0 ? r / last : 0.0);
        for (std::size_t j = report.residuals.size(); j-- > 0;) {
            const double newer = j + 1 < report.residuals.size() ? report.residuals[j + 1] : r;
            if (newer > report.residuals[j]) {
                ++increases;
            } else {
                break;
            }
        }
    }
    report.residuals.push_back(r);
    if (increases >= 3) throw DivergenceError(divergence_message);
}

void finalize_report(FixedPointReport& report, double tol) {
    bool decreasing = true;
    for (std::size_t j = 1; j < report.residuals.size(); ++j) {
        decreasing = decreasing && report.residuals[j] < report.residuals[j - 1];
    }
    report.converged = !report.residuals.empty() && report.residuals.back() <= tol && decreasing;
}

namespace {

void check_shapes(const ParticleEnsemble& e, const Control& control) {
    if (!(control.grid() == e.grid())) throw ConfigError("control and ensemble grids differ");
}

}  // namespace

ParticleEnsemble picard_step(const ParticleEnsemble& prev, const ProblemSpec& spec,
                             const Control& control, PicardMode mode) {
    check_shapes(prev, control);
    const TimeGrid& grid = prev.grid();
    const std::size_t n = grid.steps();
    const std::size_t m = prev.particles();
    const double dt = grid.dt();
    const auto laws = node_laws(prev.paths());
    const PathMatrix& noise = prev.increments();
    const PathMatrix& u_paths = prev.paths();

    PathMatrix next(m, n + 1);
    parallel_for(m, [&](std::size_t i) {
        double v = spec.x0;
        next(i, 0) = v;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = grid.time(k);
            const double arg = mode == PicardMode::full ? u_paths(i, k) : v;
            const EmpiricalMeasure& mu = laws[grid.ahead(k)];
            v += spec.b(t, arg, mu, control[k]) * dt + spec.sigma(t, arg, mu, control[k]) * noise(i, k);
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "non-finite state at particle " << i << ", step " << k + 1;
                throw NonFiniteError(msg.str());
            }
            next(i, k + 1) = v;
        }
    });
    return prev.with_paths(std::move(next));
}

ParticleEnsemble initial_guess(const ProblemSpec& spec, const TimeGrid& grid, std::size_t particles,
                               std::uint64_t seed) {
    auto noise = std::make_shared<const PathMatrix>(brownian_increments(grid, particles, seed));
    return ParticleEnsemble(grid, seed, PathMatrix(particles, grid.steps() + 1, spec.x0),
                            std::move(noise));
}

ForwardSolution solve_forward(const ProblemSpec& spec, const Control& control,
                              std::size_t particles, std::uint64_t seed,
                              const ForwardOptions& opts) {
    if (particles < 2) throw ConfigError("at least two particles are required");
    if (!(opts.tol > 0.0)) throw ConfigError("picard tolerance must be positive");
    const TimeGrid& grid = control.grid();
    if (std::abs(grid.horizon() - spec.horizon) > 1e-12 * spec.horizon ||
        std::abs(grid.delta() - spec.delta) > 1e-12 * std::max(1.0, spec.delta)) {
        throw ConfigError("grid horizon/delta do not match the problem");
    }

    ForwardSolution sol{initial_guess(spec, grid, particles, seed), {}};
    FixedPointReport& rep = sol.report;
    rep.beta = 7.0 * spec.lipschitz_C;
    while (rep.iterations < opts.max_iter) {
        ParticleEnsemble next = picard_step(sol.ensemble, spec, control, opts.mode);
        const double r = weighted_norm(next.paths() - sol.ensemble.paths(), grid, rep.beta);
        sol.ensemble = std::move(next);
        record_residual(rep, r, "Picard divergence — check δ ≤ 1/(7C)");
        if (r <= opts.tol) break;
    }
    finalize_report(rep, opts.tol);
    if (!rep.converged && opts.throw_on_max_iter) {
        std::ostringstream msg;
        msg << "forward Picard iteration did not converge in " << rep.iterations
            << " iterations (last residual "
            << (rep.residuals.empty() ? 0.0 : rep.residuals.back()) << ")";
        throw NotConvergedError(msg.str());
    }
    return sol;
}

ParticleEnsemble solve_direct_euler(const ProblemSpec& spec, const Control& control,
                                    std::size_t particles, std::uint64_t seed) {
    const TimeGrid& grid = control.grid();
    ParticleEnsemble base = initial_guess(spec, grid, particles, seed);
    const PathMatrix& noise = base.increments();
    const std::size_t n = grid.steps();
    const double dt = grid.dt();
    PathMatrix x(particles, n + 1, spec.x0);
    for (std::size_t k = 0; k < n; ++k) {
        const EmpiricalMeasure mu(x.column(k));
        const double t = grid.time(k);
        parallel_for(particles, [&](std::size_t i) {
            const double xi = x(i, k);
            x(i, k + 1) =
                xi + spec.b(t, xi, mu, control[k]) * dt + spec.sigma(t, xi, mu, control[k]) * noise(i, k);
        });
    }
    return base.with_paths(std::move(x));
}

std::vector<double> contraction_probe(const ProblemSpec& spec, const Control& control,
                                      std::size_t particles, std::uint64_t seed,
                                      std::size_t n_pairs) {
    const TimeGrid& grid = control.grid();
    const ParticleEnsemble base = initial_guess(spec, grid, particles, seed);
    const double beta = 7.0 * spec.lipschitz_C;
    const std::size_t n = grid.steps();
    const double sqdt = std::sqrt(grid.dt());

    auto random_paths = [&](std::mt19937_64& gen) {
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> amp(0.1, 2.0);
        const double a = amp(gen);
        PathMatrix p(particles, n + 1);
        for (std::size_t i = 0; i < particles; ++i) {
            double v = spec.x0 + normal(gen);
            for (std::size_t k = 0; k <= n; ++k) {
                p(i, k) = v;
                v += a * sqdt * normal(gen);
            }
        }
        return p;
    };

    std::vector<double> ratios;
    for (std::size_t pair = 0; pair < n_pairs; ++pair) {
        auto gen = substream(seed ^ 0xA5A5A5A5ULL, pair);
        const ParticleEnsemble u1 = base.with_paths(random_paths(gen));
        const ParticleEnsemble u2 = base.with_paths(random_paths(gen));
        const double den = weighted_norm(u1.paths() - u2.paths(), grid, beta);
        if (den == 0.0) continue;
        const ParticleEnsemble v1 = picard_step(u1, spec, control);
        const ParticleEnsemble v2 = picard_step(u2, spec, control);
        ratios.push_back(weighted_norm(v1.paths() - v2.paths(), grid, beta) / den);
    }
    return ratios;
}

}  // namespace amv
