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
#include "amv/adjoint.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "amv/error.hpp"
#include "amv/parallel.hpp"
#include "amv/rng.hpp"

namespace amv {

namespace {

double cloud_mean(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

std::size_t first_terminal_cell(const TimeGrid& grid) {
    const std::size_t n = grid.steps();
    const std::size_t d = grid.delta_steps();
    return d >= n ? 0 : n - d;
}

void require_finite(double v, const char* what, std::size_t i, std::size_t k) {
    if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-finite " << what << " at particle " << i << ", step " << k;
        throw NonFiniteError(msg.str());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Assemblies

AssemblyCheck check_assembly(const DriverAssembly& assembly, std::size_t particles,
                             std::size_t steps, std::uint64_t seed, std::size_t n_probes) {
    AssemblyCheck out;
    if (!assembly.theta || !assembly.vartheta || particles == 0 || steps == 0) return out;
    auto gen = substream(seed, 0x5EED);
    std::uniform_int_distribution<std::size_t> cell(0, steps - 1);
    std::uniform_int_distribution<std::size_t> particle(0, particles - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t n = 0; n < n_probes; ++n) {
        const std::size_t k = cell(gen);
        const std::size_t i = particle(gen);
        const std::size_t j = particle(gen);
        double x[4];
        double y[4];
        double dist = 0.0;
        for (int a = 0; a < 4; ++a) {
            x[a] = normal(gen);
            y[a] = normal(gen);
            dist += std::abs(x[a] - y[a]);
        }
        const double dtheta = std::abs(assembly.theta(k, i, j, x[0], x[1], x[2], x[3]) -
                                       assembly.theta(k, i, j, y[0], y[1], y[2], y[3]));
        if (dist > 0.0) out.theta_lipschitz = std::max(out.theta_lipschitz, dtheta / dist);
        out.vartheta_at_zero =
            std::max(out.vartheta_at_zero, std::abs(assembly.vartheta(k, i, j, 0.0, 0.0)));
    }
    return out;
}

DriverAssembly assemble_control_adjoint(std::shared_ptr<const Linearization> lin) {
    const ProblemSpec& spec = lin->spec();
    const TimeGrid& grid = lin->grid();
    const std::size_t m = lin->particles();
    const std::size_t n = grid.steps();
    const std::size_t d = grid.delta_steps();
    const PathMatrix& x = lin->paths();
    const EmpiricalMeasure& mu_T = lin->laws()[n];

    DriverAssembly a;
    a.lipschitz_C = spec.lipschitz_C;

    // zeta_i = d_x g(X_iN) + (1/M) sum_j d_mu g(X_jN; y = X_iN)
    a.zeta.assign(m, 0.0);
    std::vector<double> cloud_g(m, 0.0);
    const LionsDerivative& dgm = spec.dg_dmu;
    const double horizon = grid.horizon();
    if (dgm.is_separable()) {
        std::vector<double> outer(m);
        for (std::size_t j = 0; j < m; ++j) outer[j] = dgm.outer(horizon, x(j, n), mu_T, 0.0);
        const double avg = cloud_mean(outer);
        const auto inner = dgm.inner_values(horizon, mu_T, x.column(n));
        for (std::size_t i = 0; i < m; ++i) cloud_g[i] = avg * inner[i];
    } else if (!dgm.is_zero()) {
        parallel_for(m, [&](std::size_t i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += dgm(horizon, x(j, n), mu_T, x(i, n), 0.0);
            cloud_g[i] = acc / static_cast<double>(m);
        });
    }
    for (std::size_t i = 0; i < m; ++i) {
        a.zeta[i] = spec.dg_dx(x(i, n), mu_T) + cloud_g[i];
        require_finite(a.zeta[i], "terminal adjoint value", i, n);
    }

    auto cloud_l = std::make_shared<const PathMatrix>(lin->swapped_cloud(lin->l(), nullptr));

    a.theta = [lin, d](std::size_t k, std::size_t i, std::size_t j, double x1, double x2,
                       double x3, double x4) {
        const auto& jb = lin->b();
        const auto& js = lin->sigma();
        const auto& jl = lin->l();
        double v = jb.dx(i, k) * x1 + js.dx(i, k) * x2 + jl.dx(i, k);
        if (k >= d) {
            const std::size_t c = k - d;
            v += lin->pair_dmu(jb, j, c, i) * x3 + lin->pair_dmu(js, j, c, i) * x4 +
                 lin->pair_dmu(jl, j, c, i);
        }
        return v;
    };
    a.vartheta = [lin](std::size_t c, std::size_t i, std::size_t j, double x3, double x4) {
        return lin->pair_dmu(lin->b(), j, c, i) * x3 + lin->pair_dmu(lin->sigma(), j, c, i) * x4 +
               lin->pair_dmu(lin->l(), j, c, i);
    };

    a.driver_batch = [lin, cloud_l, d](const PathMatrix& u, const PathMatrix& v) {
        const std::size_t m = lin->particles();
        const std::size_t n = lin->grid().steps();
        const auto& jb = lin->b();
        const auto& js = lin->sigma();
        const PathMatrix cb = lin->swapped_cloud(jb, &u);
        const PathMatrix cs = lin->swapped_cloud(js, &v);
        const PathMatrix& cl = *cloud_l;
        const auto& lx = lin->l().dx;
        PathMatrix out(m, n);
        parallel_for(m, [&](std::size_t i) {
            for (std::size_t k = 0; k < n; ++k) {
                double val = jb.dx(i, k) * u(i, k) + js.dx(i, k) * v(i, k) + lx(i, k);
                if (k >= d) val += cb(i, k - d) + cs(i, k - d) + cl(i, k - d);
                out(i, k) = val;
            }
        });
        return out;
    };
    a.terminal_batch = [lin, cloud_l](const PathMatrix& u, const PathMatrix& v) {
        const std::size_t m = lin->particles();
        const TimeGrid& g = lin->grid();
        const std::size_t n = g.steps();
        std::vector<double> out(m, 0.0);
        const std::size_t c0 = first_terminal_cell(g);
        if (c0 >= n) return out;
        const PathMatrix cb = lin->swapped_cloud(lin->b(), &u);
        const PathMatrix cs = lin->swapped_cloud(lin->sigma(), &v);
        const PathMatrix& cl = *cloud_l;
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t c = c0; c < n; ++c) acc += (cb(i, c) + cs(i, c) + cl(i, c)) * g.dt();
            out[i] = acc;
        }
        return out;
    };
    return a;
}

DriverAssembly assemble_control_adjoint(const ProblemSpec& spec, const ParticleEnsemble& base,
                                        const Control& u_star) {
    return assemble_control_adjoint(std::make_shared<const Linearization>(spec, base, u_star));
}

// ---------------------------------------------------------------------------
// Regression

BackwardRegressor::BackwardRegressor(const ParticleEnsemble& base, int basis_degree)
    : grid_(base.grid()),
      particles_(base.particles()),
      increments_(base.shared_increments()),
      nodes_(base.grid().steps()),
      degrees_(base.grid().steps(), 0) {
    if (basis_degree < 0) throw ConfigError("basis_degree must be nonnegative");
    const std::size_t m = particles_;
    const auto md = static_cast<double>(m);
    std::vector<std::string> node_warnings(nodes_.size());

    parallel_for(nodes_.size(), [&](std::size_t k) {
        const std::vector<double> x = base.paths().column(k);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= md;
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / md);

        int degree = sd <= 1e-12 * std::max(1.0, std::abs(mean)) ? 0 : basis_degree;
        const int requested = degree;
        Node node;
        for (;; --degree) {
            const auto p = static_cast<Eigen::Index>(degree + 1);
            Eigen::MatrixXd phi(static_cast<Eigen::Index>(m), p);
            for (std::size_t i = 0; i < m; ++i) {
                const double z = degree == 0 ? 0.0 : (x[i] - mean) / sd;
                double power = 1.0;
                for (Eigen::Index c = 0; c < p; ++c) {
                    phi(static_cast<Eigen::Index>(i), c) = power;
                    power *= z;
                }
            }
            const Eigen::MatrixXd gram = (phi.transpose() * phi) / md;
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
            const double lo = eig.eigenvalues().minCoeff();
            const double hi = eig.eigenvalues().maxCoeff();
            if (degree > 0 && !(lo > 1e-12 * hi)) continue;
            const Eigen::MatrixXd solve = gram.ldlt().solve(phi.transpose()) / md;
            node.degree = degree;
            node.design.resize(m * static_cast<std::size_t>(p));
            node.solve.resize(m * static_cast<std::size_t>(p));
            for (std::size_t i = 0; i < m; ++i) {
                for (Eigen::Index c = 0; c < p; ++c) {
                    node.design[i * static_cast<std::size_t>(p) + static_cast<std::size_t>(c)] =
                        phi(static_cast<Eigen::Index>(i), c);
                    node.solve[static_cast<std::size_t>(c) * m + i] =
                        solve(c, static_cast<Eigen::Index>(i));
                }
            }
            break;
        }
        if (node.degree != requested) {
            std::ostringstream msg;
            msg << "regression at node " << k << ": rank-deficient basis, degree lowered from "
                << requested << " to " << node.degree;
            node_warnings[k] = msg.str();
        }
        degrees_[k] = node.degree;
        nodes_[k] = std::move(node);
    });
    for (auto& w : node_warnings) {
        if (!w.empty()) warnings_.push_back(std::move(w));
    }
}

std::vector<double> BackwardRegressor::project(std::size_t k, std::span<const double> target) const {
    const Node& node = nodes_[k];
    const std::size_t m = particles_;
    const auto p = static_cast<std::size_t>(node.degree + 1);
    std::vector<double> coef(p, 0.0);
    for (std::size_t c = 0; c < p; ++c) {
        const double* row = node.solve.data() + c * m;
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += row[i] * target[i];
        coef[c] = acc;
    }
    std::vector<double> fitted(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = node.design.data() + i * p;
        double acc = 0.0;
        for (std::size_t c = 0; c < p; ++c) acc += row[c] * coef[c];
        fitted[i] = acc;
    }
    return fitted;
}

// ---------------------------------------------------------------------------
// Backward sweeps

namespace {

PathMatrix generic_driver(const DriverAssembly& a, const TimeGrid& grid, const PathMatrix& u,
                          const PathMatrix& v) {
    const std::size_t m = u.particles();
    const std::size_t n = grid.steps();
    const std::size_t d = grid.delta_steps();
    PathMatrix out(m, n);
    parallel_for(m, [&](std::size_t i) {
        std::vector<double> vals(m);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t j = 0; j < m; ++j) {
                const double x3 = k >= d ? u(j, k - d) : u(j, 0);
                const double x4 = k >= d ? v(j, k - d) : 0.0;
                vals[j] = a.theta(k, i, j, u(i, k), v(i, k), x3, x4);
            }
            out(i, k) = a.phi ? a.phi(vals) : cloud_mean(vals);
        }
    });
    return out;
}

std::vector<double> generic_terminal(const DriverAssembly& a, const TimeGrid& grid,
                                     const PathMatrix& u, const PathMatrix& v) {
    const std::size_t m = u.particles();
    const std::size_t n = grid.steps();
    std::vector<double> out(m, 0.0);
    if (!a.vartheta) return out;
    const std::size_t c0 = first_terminal_cell(grid);
    parallel_for(m, [&](std::size_t i) {
        std::vector<double> vals(m);
        double acc = 0.0;
        for (std::size_t c = c0; c < n; ++c) {
            for (std::size_t j = 0; j < m; ++j) vals[j] = a.vartheta(c, i, j, u(j, c), v(j, c));
            acc += (a.psi ? a.psi(vals) : cloud_mean(vals)) * grid.dt();
        }
        out[i] = acc;
    });
    return out;
}

std::vector<double> terminal_part(const DriverAssembly& a, const TimeGrid& grid,
                                  const PathMatrix& u, const PathMatrix& v) {
    if (grid.delta_steps() == 0) return std::vector<double>(u.particles(), 0.0);
    return a.terminal_batch ? a.terminal_batch(u, v) : generic_terminal(a, grid, u, v);
}

// One backward regression step from p_{k+1}; fills p_pred(., k) and q(., k).
void regress_step(const BackwardRegressor& reg, std::size_t k, const PathMatrix& p,
                  PathMatrix& p_pred, PathMatrix& q) {
    const std::size_t m = reg.particles();
    const double dt = reg.grid().dt();
    const PathMatrix& noise = reg.increments();
    const auto next = p.column(k + 1);
    const auto pred = reg.project(k, next);
    std::vector<double> target(m);
    for (std::size_t i = 0; i < m; ++i) target[i] = (next[i] - pred[i]) * noise(i, k);
    const auto qk = reg.project(k, target);
    for (std::size_t i = 0; i < m; ++i) {
        p_pred(i, k) = pred[i];
        q(i, k) = qk[i] / dt;
        require_finite(pred[i], "adjoint state", i, k);
        require_finite(q(i, k), "adjoint martingale integrand", i, k);
    }
}

}  // namespace

InnerSolution inner_bsde_solve(const BackwardRegressor& regressor, const DriverAssembly& assembly,
                               const PathMatrix& u, const PathMatrix& v) {
    const TimeGrid& grid = regressor.grid();
    const std::size_t m = regressor.particles();
    const std::size_t n = grid.steps();
    if (u.particles() != m || u.nodes() != n + 1 || v.particles() != m || v.nodes() != n) {
        throw ConfigError("frozen adjoint candidate has the wrong shape");
    }
    if (assembly.zeta.size() != m) throw ConfigError("zeta must have one value per particle");
    if (!assembly.driver_batch && !assembly.theta) throw ConfigError("assembly has no driver");

    InnerSolution s;
    s.driver = assembly.driver_batch ? assembly.driver_batch(u, v) : generic_driver(assembly, grid, u, v);
    s.terminal_implicit_part = terminal_part(assembly, grid, u, v);
    s.p = PathMatrix(m, n + 1);
    s.p_pred = PathMatrix(m, n + 1);
    s.q = PathMatrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        s.p(i, n) = assembly.zeta[i] + s.terminal_implicit_part[i];
        s.p_pred(i, n) = s.p(i, n);
        require_finite(s.p(i, n), "adjoint terminal value", i, n);
    }
    const double dt = grid.dt();
    for (std::size_t k = n; k-- > 0;) {
        regress_step(regressor, k, s.p, s.p_pred, s.q);
        for (std::size_t i = 0; i < m; ++i) s.p(i, k) = s.p_pred(i, k) + s.driver(i, k) * dt;
    }
    return s;
}

double bsde_beta(double lipschitz_C, double c_rho_override) {
    if (!(lipschitz_C > 0.0)) throw ConfigError("lipschitz_C must be positive");
    const double rho = 1.0 / (8.0 * lipschitz_C);
    const double c_rho =
        c_rho_override > 0.0 ? c_rho_override : lipschitz_C * lipschitz_C / rho + lipschitz_C;
    return c_rho + 1.0;
}

double bsde_delta0(double lipschitz_C, double beta) {
    return std::min(1.0 / (8.0 * lipschitz_C), std::log(3.0) / beta);
}

double bsde_norm(const PathMatrix& u, const PathMatrix& v, const TimeGrid& grid, double beta) {
    const std::size_t m = u.particles();
    const std::size_t n = grid.steps();
    std::vector<double> weight(n);
    for (std::size_t k = 0; k < n; ++k) weight[k] = grid.dt() * std::exp(beta * grid.time(k));
    std::vector<double> per(m);
    parallel_for(m, [&](std::size_t i) {
        double acc = u(i, 0) * u(i, 0);
        for (std::size_t k = 0; k < n; ++k) acc += weight[k] * (u(i, k) * u(i, k) + v(i, k) * v(i, k));
        per[i] = acc;
    });
    double total = 0.0;
    for (double x : per) total += x;
    const double out = std::sqrt(total / static_cast<double>(m));
    if (!std::isfinite(out)) throw NonFiniteError("adjoint norm is not finite");
    return out;
}

AdjointSolution solve_adjoint(const BackwardRegressor& regressor, const DriverAssembly& assembly,
                              double delta, const AdjointOptions& opts) {
    if (!(opts.tol > 0.0)) throw ConfigError("bsde tolerance must be positive");
    const TimeGrid& grid = regressor.grid();
    const std::size_t m = regressor.particles();
    const std::size_t n = grid.steps();

    AdjointSolution sol;
    sol.report.beta = bsde_beta(assembly.lipschitz_C, opts.c_rho_override);
    sol.delta0 = bsde_delta0(assembly.lipschitz_C, sol.report.beta);
    sol.delta_within_regime = delta <= sol.delta0 * (1.0 + 1e-12);
    if (!sol.delta_within_regime) {
        std::ostringstream msg;
        msg << "delta = " << delta << " exceeds the adjoint contraction regime delta0 = " << sol.delta0;
        sol.warnings.push_back(msg.str());
    }
    for (const auto& w : regressor.warnings()) sol.warnings.push_back(w);

    PathMatrix u(m, n + 1);
    PathMatrix v(m, n);
    InnerSolution inner;
    while (sol.report.iterations < opts.max_iter) {
        inner = inner_bsde_solve(regressor, assembly, u, v);
        const double r = bsde_norm(inner.p_pred - u, inner.q - v, grid, sol.report.beta);
        u = inner.p_pred;
        v = inner.q;
        record_residual(sol.report, r, "BSDE outer divergence — check δ ≤ δ₀");
        if (r <= opts.tol) break;
    }
    finalize_report(sol.report, opts.tol);
    if (!sol.report.converged && opts.throw_on_max_iter) {
        throw NotConvergedError("adjoint outer iteration did not converge");
    }

    const auto implicit_now = terminal_part(assembly, grid, u, v);
    double resid = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        resid += std::abs(inner.p(i, n) - assembly.zeta[i] - implicit_now[i]);
    }
    sol.terminal_residual = resid / static_cast<double>(m);
    sol.p_paths = std::move(inner.p);
    sol.q_paths = std::move(inner.q);
    sol.p_pred = std::move(inner.p_pred);
    sol.driver = std::move(inner.driver);
    sol.zeta = assembly.zeta;
    sol.terminal_implicit_part = std::move(inner.terminal_implicit_part);
    return sol;
}

AdjointSolution solve_adjoint(const ProblemSpec& spec, const ParticleEnsemble& base,
                              const Control& u_star, const AdjointOptions& opts) {
    const BackwardRegressor regressor(base, opts.basis_degree);
    const DriverAssembly assembly = assemble_control_adjoint(spec, base, u_star);
    return solve_adjoint(regressor, assembly, spec.delta, opts);
}

InnerSolution solve_classical_adjoint(const ProblemSpec& spec, const ParticleEnsemble& base,
                                      const Control& u_star, int basis_degree) {
    if (!spec.db_dmu.is_zero() || !spec.dsigma_dmu.is_zero() || !spec.dl_dmu.is_zero() ||
        !spec.dg_dmu.is_zero()) {
        throw ConfigError("classical adjoint requires a problem without law dependence");
    }
    const Linearization lin(spec, base, u_star);
    const BackwardRegressor reg(base, basis_degree);
    const TimeGrid& grid = base.grid();
    const std::size_t m = base.particles();
    const std::size_t n = grid.steps();
    const double dt = grid.dt();
    const EmpiricalMeasure& mu_T = lin.laws()[n];

    InnerSolution s;
    s.p = PathMatrix(m, n + 1);
    s.p_pred = PathMatrix(m, n + 1);
    s.q = PathMatrix(m, n);
    s.driver = PathMatrix(m, n);
    s.terminal_implicit_part.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        s.p(i, n) = spec.dg_dx(base.paths()(i, n), mu_T);
        s.p_pred(i, n) = s.p(i, n);
    }
    for (std::size_t k = n; k-- > 0;) {
        regress_step(reg, k, s.p, s.p_pred, s.q);
        for (std::size_t i = 0; i < m; ++i) {
            s.driver(i, k) = lin.b().dx(i, k) * s.p_pred(i, k) + lin.sigma().dx(i, k) * s.q(i, k) +
                             lin.l().dx(i, k);
            s.p(i, k) = s.p_pred(i, k) + s.driver(i, k) * dt;
        }
    }
    return s;
}

}  // namespace amv
