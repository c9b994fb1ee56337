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
#include "amv/variational.hpp"

#include <cmath>
#include <sstream>

#include "amv/error.hpp"
#include "amv/parallel.hpp"

namespace amv {

namespace {

VariationalSolution iterate(const Linearization& lin, const PathMatrix& noise,
                            const std::vector<double>& direction, const ForwardOptions& opts) {
    const TimeGrid& grid = lin.grid();
    const std::size_t n = grid.steps();
    const std::size_t m = lin.particles();
    if (direction.size() != n) throw ConfigError("direction length must equal the cell count");
    if (!(opts.tol > 0.0)) throw ConfigError("tolerance must be positive");
    const double dt = grid.dt();
    const CoefficientJet& jb = lin.b();
    const CoefficientJet& js = lin.sigma();

    VariationalSolution sol;
    sol.ensemble.direction = direction;
    sol.ensemble.y_paths = PathMatrix(m, n + 1);
    FixedPointReport& rep = sol.report;
    rep.beta = 7.0 * lin.spec().lipschitz_C;

    bool zero_direction = true;
    for (double v : direction) zero_direction = zero_direction && v == 0.0;
    if (zero_direction) {
        rep.residuals.push_back(0.0);
        rep.iterations = 1;
        rep.converged = true;
        return sol;
    }

    while (rep.iterations < opts.max_iter) {
        const PathMatrix& prev = sol.ensemble.y_paths;
        const PathMatrix cloud_b = lin.forward_cloud(jb, prev);
        const PathMatrix cloud_s = lin.forward_cloud(js, prev);
        PathMatrix next(m, n + 1);
        parallel_for(m, [&](std::size_t i) {
            double y = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double arg = opts.mode == PicardMode::full ? prev(i, k) : y;
                const double drift = jb.dx(i, k) * arg + cloud_b(i, k) + jb.du(i, k) * direction[k];
                const double diff = js.dx(i, k) * arg + cloud_s(i, k) + js.du(i, k) * direction[k];
                y += drift * dt + diff * noise(i, k);
                if (!std::isfinite(y)) {
                    std::ostringstream msg;
                    msg << "non-finite variational state at particle " << i << ", step " << k + 1;
                    throw NonFiniteError(msg.str());
                }
                next(i, k + 1) = y;
            }
        });
        const double r = weighted_norm(next - prev, grid, rep.beta);
        sol.ensemble.y_paths = std::move(next);
        record_residual(rep, r, "Picard divergence — check δ ≤ 1/(7C)");
        if (r <= opts.tol) break;
    }
    finalize_report(rep, opts.tol);
    if (!rep.converged && opts.throw_on_max_iter) {
        throw NotConvergedError("variational Picard iteration did not converge");
    }
    return sol;
}

std::vector<double> direction_of(const Control& u_star, const Control& u) {
    if (!(u_star.grid() == u.grid())) throw ConfigError("controls live on different grids");
    std::vector<double> d(u.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = u[k] - u_star[k];
    return d;
}

}  // namespace

VariationalSolution solve_variational(const ProblemSpec& spec, const ParticleEnsemble& base,
                                      const Control& u_star, const Control& u,
                                      const ForwardOptions& opts) {
    const Linearization lin(spec, base, u_star);
    return iterate(lin, base.increments(), direction_of(u_star, u), opts);
}

VariationalSolution solve_variational(const Linearization& lin, const std::vector<double>& direction,
                                      const ForwardOptions& opts) {
    return iterate(lin, lin.increments(), direction, opts);
}

DifferenceQuotientReport difference_quotient_check(const ProblemSpec& spec, const Control& u_star,
                                                   const Control& u,
                                                   const std::vector<double>& thetas,
                                                   std::size_t particles, std::uint64_t seed,
                                                   const ForwardOptions& opts) {
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        if (!(thetas[j] > 0.0 && thetas[j] <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
        if (j > 0 && !(thetas[j] < thetas[j - 1])) throw ConfigError("thetas must strictly decrease");
    }
    DifferenceQuotientReport rep;
    rep.thetas = thetas;
    rep.scope = spec.driftless_state_free_diffusion ? "proved case" : "conjectured extension";

    const ForwardSolution base = solve_forward(spec, u_star, particles, seed, opts);
    const VariationalSolution var = solve_variational(spec, base.ensemble, u_star, u, opts);
    const PathMatrix& y = var.ensemble.y_paths;
    const std::size_t n = u.grid().steps();

    for (double theta : thetas) {
        const Control u_theta = u_star.interpolate(u, theta);
        const ForwardSolution moved = solve_forward(spec, u_theta, particles, seed, opts);
        std::vector<double> sup(particles, 0.0);
        parallel_for(particles, [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t k = 0; k <= n; ++k) {
                const double zeta = (moved.ensemble.paths()(i, k) - base.ensemble.paths()(i, k)) / theta;
                const double e = y(i, k) - zeta;
                s = std::max(s, e * e);
            }
            sup[i] = s;
        });
        double acc = 0.0;
        for (double s : sup) acc += s;
        rep.errors.push_back(acc / static_cast<double>(particles));
    }
    return rep;
}

}  // namespace amv
