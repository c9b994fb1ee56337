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
#include "amv/optimizer.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "amv/error.hpp"
#include "amv/parallel.hpp"

namespace amv {

double hamiltonian(const ProblemSpec& spec, double t, double x, const EmpiricalMeasure& mu, double u,
                   double p, double q) {
    const double h = spec.l(t, x, mu, u) + spec.b(t, x, mu, u) * p + spec.sigma(t, x, mu, u) * q;
    if (!std::isfinite(h)) throw NonFiniteError("non-finite Hamiltonian");
    return h;
}

double hamiltonian_u_gradient(const ProblemSpec& spec, double t, double x,
                              const EmpiricalMeasure& mu, double u, double p, double q) {
    const double h =
        spec.dl_du(t, x, mu, u) + spec.db_du(t, x, mu, u) * p + spec.dsigma_du(t, x, mu, u) * q;
    if (!std::isfinite(h)) throw NonFiniteError("non-finite Hamiltonian gradient");
    return h;
}

CostEstimate evaluate_cost(const ProblemSpec& spec, const ParticleEnsemble& ensemble,
                           const Control& control) {
    const TimeGrid& grid = ensemble.grid();
    if (!(control.grid() == grid)) throw ConfigError("control and ensemble grids differ");
    const std::size_t m = ensemble.particles();
    const std::size_t n = grid.steps();
    const auto laws = node_laws(ensemble.paths());
    std::vector<double> per(m);
    parallel_for(m, [&](std::size_t i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc += spec.l(grid.time(k), ensemble(i, k), laws[grid.ahead(k)], control[k]) * grid.dt();
        }
        acc += spec.g(ensemble(i, n), laws[n]);
        if (!std::isfinite(acc)) {
            std::ostringstream msg;
            msg << "non-finite cost for particle " << i;
            throw NonFiniteError(msg.str());
        }
        per[i] = acc;
    });
    const auto md = static_cast<double>(m);
    double mean = 0.0;
    for (double v : per) mean += v;
    mean /= md;
    double ss = 0.0;
    for (double v : per) ss += (v - mean) * (v - mean);
    CostEstimate c;
    c.value = mean;
    c.standard_error = m > 1 ? std::sqrt(ss / (md - 1.0) / md) : 0.0;
    return c;
}

namespace {

ForwardSolution converged_forward(const ProblemSpec& spec, const Control& control,
                                  std::size_t particles, std::uint64_t seed,
                                  const ForwardOptions& opts) {
    ForwardSolution sol = solve_forward(spec, control, particles, seed, opts);
    if (!sol.report.converged) {
        std::ostringstream msg;
        msg << "forward Picard iteration did not converge in " << sol.report.iterations
            << " iterations";
        throw NotConvergedError(msg.str());
    }
    return sol;
}

struct Stage {
    std::shared_ptr<const Linearization> lin;
    AdjointSolution adjoint;
    std::vector<double> gradient;
};

Stage adjoint_stage(const ProblemSpec& spec, const ParticleEnsemble& ensemble, const Control& u,
                    const AdjointOptions& opts) {
    Stage s;
    s.lin = std::make_shared<const Linearization>(spec, ensemble, u);
    const BackwardRegressor reg(ensemble, opts.basis_degree);
    const DriverAssembly assembly = assemble_control_adjoint(s.lin);
    s.adjoint = solve_adjoint(reg, assembly, spec.delta, opts);
    if (!s.adjoint.report.converged) {
        throw NotConvergedError("adjoint outer iteration did not converge");
    }
    s.gradient = control_gradient(*s.lin, s.adjoint);
    return s;
}

double directional(const TimeGrid& grid, const std::vector<double>& g, const std::vector<double>& v) {
    double acc = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) acc += g[k] * v[k];
    return acc * grid.dt();
}

std::vector<double> difference(const Control& a, const Control& b) {
    std::vector<double> d(a.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = a[k] - b[k];
    return d;
}

double cloud_mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

}  // namespace

CostEstimate evaluate_cost(const ProblemSpec& spec, const Control& control, std::size_t particles,
                           std::uint64_t seed, const ForwardOptions& opts) {
    const ForwardSolution sol = converged_forward(spec, control, particles, seed, opts);
    return evaluate_cost(spec, sol.ensemble, control);
}

std::vector<double> control_gradient(const Linearization& lin, const AdjointSolution& adjoint) {
    const std::size_t m = lin.particles();
    const std::size_t n = lin.grid().steps();
    std::vector<double> g(n, 0.0);
    const auto& jb = lin.b();
    const auto& js = lin.sigma();
    const auto& jl = lin.l();
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            acc += jl.du(i, k) + jb.du(i, k) * adjoint.p_pred(i, k) + js.du(i, k) * adjoint.q_paths(i, k);
        }
        g[k] = acc / static_cast<double>(m);
    }
    return g;
}

OptimalityReport optimality_report(const Control& control, const std::vector<double>& gradient,
                                   double grad_tol) {
    if (gradient.size() != control.size()) throw ConfigError("gradient length differs from control");
    OptimalityReport r;
    const std::size_t n = control.size();
    r.gradient = gradient;
    r.grad_tol = grad_tol;
    r.violated.assign(n, false);
    r.at_lower.assign(n, false);
    r.at_upper.assign(n, false);
    r.passed = true;
    for (std::size_t k = 0; k < n; ++k) {
        const double g = gradient[k];
        double violation = 0.0;
        if (control[k] <= control.lo()) {
            r.at_lower[k] = true;
            violation = std::max(0.0, -g);
        }
        if (control[k] >= control.hi()) {
            r.at_upper[k] = true;
            violation = r.at_lower[k] ? 0.0 : std::max(0.0, g);
        }
        if (!r.at_lower[k] && !r.at_upper[k]) {
            violation = std::abs(g);
            r.max_interior_gradient = std::max(r.max_interior_gradient, violation);
        }
        r.violated[k] = violation > grad_tol;
        r.max_violation = std::max(r.max_violation, violation);
        r.passed = r.passed && !r.violated[k];
    }
    return r;
}

OptimizeResult optimize(const ProblemSpec& spec, const Control& u_init, std::size_t particles,
                        std::uint64_t seed, const OptimizeOptions& opts) {
    const TimeGrid& grid = u_init.grid();
    OptimizeResult res{u_init, {}, {}, 1.0, false};
    ForwardSolution fwd = converged_forward(spec, res.control, particles, seed, opts.forward);
    CostEstimate cost = evaluate_cost(spec, fwd.ensemble, res.control);
    res.scale = 1.0 + std::abs(cost.value);
    const double grad_tol = opts.grad_tol_rel * res.scale;

    double last_step = 0.0;
    for (std::size_t iter = 0;; ++iter) {
        const Stage stage = adjoint_stage(spec, fwd.ensemble, res.control, opts.adjoint);
        res.report = optimality_report(res.control, stage.gradient, grad_tol);
        res.trace.push_back({iter, cost.value, cost.standard_error, res.report.max_violation, last_step});
        if (res.report.passed || iter >= opts.max_outer) break;

        bool accepted = false;
        double step = opts.step0;
        for (std::size_t h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
            std::vector<double> trial(res.control.size());
            for (std::size_t k = 0; k < trial.size(); ++k) {
                trial[k] = res.control[k] - step * stage.gradient[k];
            }
            Control candidate = Control::clamped(grid, std::move(trial), res.control.lo(), res.control.hi());
            const double decrease = directional(grid, stage.gradient, difference(candidate, res.control));
            ForwardSolution cand_fwd = converged_forward(spec, candidate, particles, seed, opts.forward);
            const CostEstimate cand_cost = evaluate_cost(spec, cand_fwd.ensemble, candidate);
            if (cand_cost.value <= cost.value + opts.armijo_c * decrease) {
                res.control = std::move(candidate);
                fwd = std::move(cand_fwd);
                cost = cand_cost;
                last_step = step;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.stalled = true;
            break;
        }
    }
    return res;
}

GradientCheckReport gateaux_gradient_check(const ProblemSpec& spec, const Control& u_star,
                                           const Control& u, std::size_t particles,
                                           std::uint64_t seed, const std::vector<double>& thetas,
                                           const OptimizeOptions& opts) {
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        if (!(thetas[j] > 0.0 && thetas[j] <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
        if (j > 0 && !(thetas[j] < thetas[j - 1])) throw ConfigError("thetas must strictly decrease");
    }
    const TimeGrid& grid = u_star.grid();
    const std::size_t m = particles;
    const std::size_t n = grid.steps();
    const double dt = grid.dt();
    const ForwardSolution base = converged_forward(spec, u_star, particles, seed, opts.forward);
    const CostEstimate j0 = evaluate_cost(spec, base.ensemble, u_star);
    const Stage stage = adjoint_stage(spec, base.ensemble, u_star, opts.adjoint);
    const std::vector<double> v = difference(u, u_star);

    GradientCheckReport rep;
    rep.adjoint_directional = directional(grid, stage.gradient, v);
    rep.scale = 1.0 + std::abs(j0.value);
    rep.noise_floor = 5.0 / std::sqrt(static_cast<double>(m)) * rep.scale;

    const VariationalSolution var = solve_variational(*stage.lin, v, opts.forward);
    const PathMatrix& y = var.ensemble.y_paths;
    const PathMatrix cloud_l = stage.lin->forward_cloud(stage.lin->l(), y);
    const auto& jl = stage.lin->l();
    std::vector<double> per(m);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = stage.adjoint.zeta[i] * y(i, n);
        for (std::size_t k = 0; k < n; ++k) {
            acc += (jl.dx(i, k) * y(i, k) + cloud_l(i, k) + jl.du(i, k) * v[k]) * dt;
        }
        per[i] = acc;
    }
    rep.variational_directional = cloud_mean(per);

    for (double theta : thetas) {
        const Control moved = u_star.interpolate(u, theta);
        const CostEstimate jt = evaluate_cost(spec, moved, particles, seed, opts.forward);
        const double fd = (jt.value - j0.value) / theta;
        rep.rows.push_back({theta, fd, std::abs(fd - rep.adjoint_directional)});
    }

    rep.ratio_test_passed = !rep.rows.empty();
    const double rounding = 1e-7 * rep.scale;
    for (std::size_t j = 1; j < rep.rows.size(); ++j) {
        const double prev = rep.rows[j - 1].gap;
        const double cur = rep.rows[j].gap;
        const double ratio = prev > 0.0 ? cur / prev : 0.0;
        rep.gap_ratios.push_back(ratio);
        const double expected = rep.rows[j].theta / rep.rows[j - 1].theta;
        const bool linear = ratio >= expected * (2.0 / 3.0) && ratio <= expected * 1.5;
        rep.ratio_test_passed = rep.ratio_test_passed && (linear || cur <= rounding);
    }
    return rep;
}

DualityReport duality_check(const ProblemSpec& spec, const Control& u_star, const Control& u,
                            std::size_t particles, std::uint64_t seed, const OptimizeOptions& opts) {
    const TimeGrid& grid = u_star.grid();
    const std::size_t m = particles;
    const std::size_t n = grid.steps();
    const double dt = grid.dt();
    const ForwardSolution base = converged_forward(spec, u_star, particles, seed, opts.forward);
    const Stage stage = adjoint_stage(spec, base.ensemble, u_star, opts.adjoint);
    const std::vector<double> v = difference(u, u_star);
    const VariationalSolution var = solve_variational(*stage.lin, v, opts.forward);
    const PathMatrix& y = var.ensemble.y_paths;
    const Linearization& lin = *stage.lin;
    const AdjointSolution& adj = stage.adjoint;

    const PathMatrix cb = lin.swapped_cloud(lin.b(), &adj.p_pred);
    const PathMatrix cs = lin.swapped_cloud(lin.sigma(), &adj.q_paths);
    std::vector<double> lhs(m), rhs(m), mag(m);
    for (std::size_t i = 0; i < m; ++i) {
        lhs[i] = adj.p_paths(i, n) * y(i, n);
        mag[i] = std::abs(lhs[i]);
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double p = adj.p_pred(i, k);
            const double q = adj.q_paths(i, k);
            acc += (lin.b().dx(i, k) * p + lin.sigma().dx(i, k) * q) * y(i, k) * dt;
            acc += (cb(i, k) + cs(i, k)) * y(i, grid.ahead(k)) * dt;
            acc -= adj.driver(i, k) * y(i, k) * dt;
            acc += (lin.b().du(i, k) * p + lin.sigma().du(i, k) * q) * v[k] * dt;
        }
        rhs[i] = acc;
    }
    DualityReport r;
    r.lhs = cloud_mean(lhs);
    r.rhs = cloud_mean(rhs);
    r.gap = std::abs(r.lhs - r.rhs);
    r.scale = 1.0 + cloud_mean(mag);
    r.tolerance = 5.0 / std::sqrt(static_cast<double>(m)) * r.scale;
    r.passed = r.gap <= r.tolerance;
    return r;
}

}  // namespace amv
