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
#include "amv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <CLI11.hpp>

#include "amv/error.hpp"
#include "amv/io.hpp"
#include "amv/parallel.hpp"
#include "amv/rng.hpp"

namespace amv {

using nlohmann::json;

// ---------------------------------------------------------------- config --

void to_json(json& j, const RunConfig& cfg) {
    j = json{{"problem", {{"name", cfg.problem.name}, {"params", cfg.problem.params}}},
             {"grid", {{"T", cfg.grid.T}, {"N", cfg.grid.N}}},
             {"delta", cfg.delta},
             {"particles", cfg.particles},
             {"seed", cfg.seed},
             {"tolerances",
              {{"picard_tol", cfg.tolerances.picard_tol},
               {"bsde_tol", cfg.tolerances.bsde_tol},
               {"grad_tol", cfg.tolerances.grad_tol}}},
             {"picard_mode", cfg.picard_mode},
             {"basis_degree", cfg.basis_degree},
             {"max_iter", cfg.max_iter},
             {"c_rho", cfg.c_rho},
             {"simulate", {{"control", cfg.simulate.control}, {"adjoint", cfg.simulate.adjoint}}},
             {"optimize",
              {{"u_init", cfg.optimize.u_init},
               {"max_outer", cfg.optimize.max_outer},
               {"step0", cfg.optimize.step0}}},
             {"verify",
              {{"pairs", cfg.verify.pairs},
               {"thetas_lemma", cfg.verify.thetas_lemma},
               {"thetas_gradient", cfg.verify.thetas_gradient},
               {"seeds", cfg.verify.seeds},
               {"amplitude", cfg.verify.amplitude},
               {"frequency", cfg.verify.frequency},
               {"refine", cfg.verify.refine}}}};
}

namespace {

void require_object(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError((path.empty() ? "config" : path) + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) throw ConfigError("unknown config key " + path + item.key());
    }
}

template <class T>
void read(const json& j, const char* key, T& dst, const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        dst = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key " + path + key + " has the wrong type");
    }
}

void read_count(const json& j, const char* key, std::size_t& dst, const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number_unsigned()) {
        throw ConfigError("config key " + path + key + " must be a nonnegative integer");
    }
    dst = it->get<std::size_t>();
}

// Scalar or array of reals.
void read_values(const json& j, const char* key, std::vector<double>& dst, const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    if (it->is_number()) {
        dst = {it->get<double>()};
        return;
    }
    read(j, key, dst, path);
    if (dst.empty()) throw ConfigError("config key " + path + key + " must not be empty");
}

}  // namespace

void from_json(const json& j, RunConfig& cfg) {
    require_object(j, "",
                   {"problem", "grid", "delta", "particles", "seed", "tolerances", "picard_mode",
                    "basis_degree", "max_iter", "c_rho", "simulate", "optimize", "verify"});
    if (auto it = j.find("problem"); it != j.end()) {
        require_object(*it, "problem.", {"name", "params"});
        read(*it, "name", cfg.problem.name, "problem.");
        read(*it, "params", cfg.problem.params, "problem.");
    }
    if (auto it = j.find("grid"); it != j.end()) {
        require_object(*it, "grid.", {"T", "N"});
        read(*it, "T", cfg.grid.T, "grid.");
        read_count(*it, "N", cfg.grid.N, "grid.");
    }
    read(j, "delta", cfg.delta, "");
    read_count(j, "particles", cfg.particles, "");
    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned()) throw ConfigError("config key seed must be a nonnegative integer");
        cfg.seed = it->get<std::uint64_t>();
    }
    if (auto it = j.find("tolerances"); it != j.end()) {
        require_object(*it, "tolerances.", {"picard_tol", "bsde_tol", "grad_tol"});
        read(*it, "picard_tol", cfg.tolerances.picard_tol, "tolerances.");
        read(*it, "bsde_tol", cfg.tolerances.bsde_tol, "tolerances.");
        read(*it, "grad_tol", cfg.tolerances.grad_tol, "tolerances.");
    }
    read(j, "picard_mode", cfg.picard_mode, "");
    read(j, "basis_degree", cfg.basis_degree, "");
    read_count(j, "max_iter", cfg.max_iter, "");
    read(j, "c_rho", cfg.c_rho, "");
    if (auto it = j.find("simulate"); it != j.end()) {
        require_object(*it, "simulate.", {"control", "adjoint"});
        read_values(*it, "control", cfg.simulate.control, "simulate.");
        read(*it, "adjoint", cfg.simulate.adjoint, "simulate.");
    }
    if (auto it = j.find("optimize"); it != j.end()) {
        require_object(*it, "optimize.", {"u_init", "max_outer", "step0"});
        read_values(*it, "u_init", cfg.optimize.u_init, "optimize.");
        read_count(*it, "max_outer", cfg.optimize.max_outer, "optimize.");
        read(*it, "step0", cfg.optimize.step0, "optimize.");
    }
    if (auto it = j.find("verify"); it != j.end()) {
        require_object(*it, "verify.",
                       {"pairs", "thetas_lemma", "thetas_gradient", "seeds", "amplitude", "frequency",
                        "refine"});
        read_count(*it, "pairs", cfg.verify.pairs, "verify.");
        read_values(*it, "thetas_lemma", cfg.verify.thetas_lemma, "verify.");
        read_values(*it, "thetas_gradient", cfg.verify.thetas_gradient, "verify.");
        read_count(*it, "seeds", cfg.verify.seeds, "verify.");
        read(*it, "amplitude", cfg.verify.amplitude, "verify.");
        read(*it, "frequency", cfg.verify.frequency, "verify.");
        read_count(*it, "refine", cfg.verify.refine, "verify.");
    }
}

namespace {

PicardMode picard_mode(const std::string& name) {
    if (name == "full") return PicardMode::full;
    if (name == "law-only") return PicardMode::law_only;
    throw ConfigError("picard_mode must be full or law-only, got " + name);
}

std::map<std::string, double> problem_params(const RunConfig& cfg) {
    std::map<std::string, double> params = cfg.problem.params;
    if (params.count("T") || params.count("delta")) {
        throw ConfigError("set T in grid and delta at top level, not in problem.params");
    }
    params["T"] = cfg.grid.T;
    params["delta"] = cfg.delta;
    return params;
}

}  // namespace

void check_config(const RunConfig& cfg) {
    if (cfg.particles < 2) throw ConfigError("particles must be at least 2");
    const auto& t = cfg.tolerances;
    if (!(t.picard_tol > 0.0) || !(t.bsde_tol > 0.0) || !(t.grad_tol > 0.0)) {
        throw ConfigError("tolerances must be positive");
    }
    if (cfg.basis_degree < 0) throw ConfigError("basis_degree must be nonnegative");
    if (cfg.max_iter == 0) throw ConfigError("max_iter must be positive");
    if (!(cfg.c_rho >= 0.0)) throw ConfigError("c_rho must be nonnegative (0 selects the default)");
    if (!(cfg.optimize.step0 > 0.0)) throw ConfigError("optimize.step0 must be positive");
    if (cfg.verify.refine == 0) throw ConfigError("verify.refine must be positive");
    picard_mode(cfg.picard_mode);
    TimeGrid(cfg.grid.T, cfg.grid.N, cfg.delta);
    builtin(cfg.problem.name, problem_params(cfg));
}

RunConfig parse_config(const json& j, const std::vector<std::string>& overrides) {
    json doc = j;
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + ov);
        std::string key = ov.substr(0, eq);
        const std::string raw = ov.substr(eq + 1);
        std::replace(key.begin(), key.end(), '.', '/');
        json value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;
        try {
            doc[json::json_pointer("/" + key)] = value;
        } catch (const json::exception&) {
            throw ConfigError("cannot apply override " + ov);
        }
    }
    RunConfig cfg;
    from_json(doc, cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
    return parse_config(j, overrides);
}

std::filesystem::path default_output_dir() {
    const char* env = std::getenv("AMV_OUTPUT_DIR");
    if (env != nullptr && *env != '\0') return env;
    return "amv-out";
}

// --------------------------------------------------------------- commands --

namespace {

struct Setup {
    ProblemSpec spec;
    TimeGrid grid;
    OptimizeOptions opts;
};

Setup make_setup(const RunConfig& cfg) {
    check_config(cfg);
    Setup s{builtin(cfg.problem.name, problem_params(cfg)), TimeGrid(cfg.grid.T, cfg.grid.N, cfg.delta), {}};
    s.opts.forward.tol = cfg.tolerances.picard_tol;
    s.opts.forward.max_iter = cfg.max_iter;
    s.opts.forward.mode = picard_mode(cfg.picard_mode);
    s.opts.forward.throw_on_max_iter = true;
    s.opts.adjoint.tol = cfg.tolerances.bsde_tol;
    s.opts.adjoint.max_iter = cfg.max_iter;
    s.opts.adjoint.basis_degree = cfg.basis_degree;
    s.opts.adjoint.c_rho_override = cfg.c_rho;
    s.opts.adjoint.throw_on_max_iter = true;
    s.opts.grad_tol_rel = cfg.tolerances.grad_tol;
    s.opts.max_outer = cfg.optimize.max_outer;
    s.opts.step0 = cfg.optimize.step0;
    return s;
}

// values holds one entry, N entries, or N / refine entries that are
// repeated on the refined grid.
Control control_on(const TimeGrid& grid, const std::vector<double>& values, const ProblemSpec& spec,
                   const char* what) {
    const std::size_t n = grid.steps();
    if (values.size() == 1) return Control(grid, std::vector<double>(n, values[0]), spec.control_lo, spec.control_hi);
    if (values.size() == n) return Control(grid, values, spec.control_lo, spec.control_hi);
    if (!values.empty() && n % values.size() == 0) {
        const std::size_t factor = n / values.size();
        std::vector<double> expanded(n);
        for (std::size_t k = 0; k < n; ++k) expanded[k] = values[k / factor];
        return Control(grid, std::move(expanded), spec.control_lo, spec.control_hi);
    }
    throw ConfigError(std::string(what) + " needs 1 or N values");
}

Control perturbed(const Control& base, const RunConfig& cfg) {
    std::vector<double> v(base.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = base[k] + cfg.verify.amplitude * std::sin(cfg.verify.frequency * base.grid().time(k));
    }
    return Control::clamped(base.grid(), std::move(v), base.lo(), base.hi());
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        err << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const NonFiniteError& e) {
        err << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const NotConvergedError& e) {
        err << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

json report_json(const AdjointSolution& adj) {
    return {{"report", to_json(adj.report)},
            {"terminal_residual", adj.terminal_residual},
            {"delta0", adj.delta0},
            {"delta_within_regime", adj.delta_within_regime},
            {"warnings", adj.warnings}};
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out,
                 std::ostream& err) {
    return guarded(err, [&] {
        const Setup s = make_setup(cfg);
        const Control control = control_on(s.grid, cfg.simulate.control, s.spec, "simulate.control");
        const ForwardSolution fwd = solve_forward(s.spec, control, cfg.particles, cfg.seed, s.opts.forward);

        const std::size_t n = s.grid.steps();
        const EmpiricalMeasure terminal = fwd.ensemble.law(n);
        const std::vector<double> last = fwd.ensemble.paths().column(n);
        const std::size_t half = last.size() / 2;
        const double w2_halves =
            wasserstein2(EmpiricalMeasure(std::span<const double>(last.data(), half)),
                         EmpiricalMeasure(std::span<const double>(last.data() + half, half)));

        write_ensemble_csv(out_dir / "ensemble.csv", fwd.ensemble);
        write_json(out_dir / "ensemble.json", {{"problem", cfg.problem.name},
                                               {"seed", cfg.seed},
                                               {"particles", cfg.particles},
                                               {"grid", to_json(s.grid)},
                                               {"report", to_json(fwd.report)}});
        json summary{{"mean", terminal.mean()},
                     {"variance", terminal.variance()},
                     {"w2_halves", w2_halves},
                     {"iterations", fwd.report.iterations},
                     {"converged", fwd.report.converged}};
        if (cfg.simulate.adjoint) {
            const AdjointSolution adj = solve_adjoint(s.spec, fwd.ensemble, control, s.opts.adjoint);
            write_adjoint_csv(out_dir / "adjoint.csv", s.grid, adj);
            write_json(out_dir / "adjoint.json", report_json(adj));
            summary["adjoint_iterations"] = adj.report.iterations;
        }
        write_json(out_dir / "summary.json", summary);
        out << "simulate " << cfg.problem.name << ": mean(X_T)=" << format_double(terminal.mean())
            << " var(X_T)=" << format_double(terminal.variance())
            << " W2(halves)=" << format_double(w2_halves) << " picard_iterations=" << fwd.report.iterations
            << '\n';
        return kExitOk;
    });
}

int cmd_optimize(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out,
                 std::ostream& err) {
    return guarded(err, [&] {
        const Setup s = make_setup(cfg);
        const Control init = control_on(s.grid, cfg.optimize.u_init, s.spec, "optimize.u_init");
        const OptimizeResult res = optimize(s.spec, init, cfg.particles, cfg.seed, s.opts);

        write_trace_csv(out_dir / "trace.csv", res.trace);
        write_control_csv(out_dir / "control.csv", res.control);
        json report = to_json(res.report);
        report["stalled"] = res.stalled;
        report["scale"] = res.scale;
        report["iterations"] = res.trace.empty() ? 0 : res.trace.back().iteration;
        report["cost"] = res.trace.empty() ? 0.0 : res.trace.back().cost;
        write_json(out_dir / "optimality.json", report);

        const TraceRow& lastrow = res.trace.back();
        out << "optimize " << cfg.problem.name << ": J=" << format_double(lastrow.cost)
            << " SE=" << format_double(lastrow.standard_error) << " iterations=" << lastrow.iteration
            << " max_violation=" << format_double(res.report.max_violation)
            << " grad_tol=" << format_double(res.report.grad_tol)
            << (res.report.passed ? " KKT passed" : res.stalled ? " line search stalled" : " KKT failed")
            << '\n';
        if (res.report.passed) return kExitOk;
        if (res.stalled) {
            err << "optimizer stalled: no Armijo step after " << s.opts.max_halvings << " halvings\n";
            return kExitStall;
        }
        std::size_t violated = 0;
        for (bool v : res.report.violated) violated += v ? 1 : 0;
        err << "KKT conditions fail on " << violated << " cells\n";
        return kExitCheckFailed;
    });
}

// ----------------------------------------------------------------- verify --

namespace {

struct Checks {
    json items = json::array();
    bool passed = true;

    void add(const std::string& name, double measured, double bound, bool ok) {
        items.push_back({{"name", name}, {"measured", measured}, {"bound", bound}, {"passed", ok}});
        passed = passed && ok;
    }
    void at_most(const std::string& name, double measured, double bound) {
        add(name, measured, bound, measured <= bound);
    }
};

double max_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

double brute_force_w2(std::vector<double> a, const std::vector<double>& b) {
    std::sort(a.begin(), a.end());
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        best = std::min(best, s);
    } while (std::next_permutation(a.begin(), a.end()));
    return std::sqrt(best / static_cast<double>(a.size()));
}

json suite_wasserstein(const RunConfig& cfg, Checks& checks) {
    std::mt19937_64 gen = substream(cfg.seed, 0);
    std::normal_distribution<double> normal;
    auto draw = [&](std::size_t m) {
        std::vector<double> v(m);
        for (double& x : v) x = normal(gen);
        return v;
    };

    double brute_gap = 0.0;
    for (std::size_t pair = 0; pair < 100; ++pair) {
        const std::size_t m = 1 + pair % 6;
        const auto a = draw(m);
        const auto b = draw(m);
        brute_gap = std::max(brute_gap, std::abs(wasserstein2(EmpiricalMeasure(a), EmpiricalMeasure(b)) -
                                                 brute_force_w2(a, b)));
    }
    checks.at_most("brute_force_gap", brute_gap, 1e-12);

    double identity = 0.0, symmetry = 0.0, triangle = 0.0, negative = 0.0;
    for (std::size_t t = 0; t < 100; ++t) {
        const std::size_t m = 2 + t % 49;
        const EmpiricalMeasure a(draw(m)), b(draw(m)), c(draw(m));
        const double ab = wasserstein2(a, b), ba = wasserstein2(b, a);
        const double bc = wasserstein2(b, c), ac = wasserstein2(a, c);
        identity = std::max(identity, wasserstein2(a, a));
        symmetry = std::max(symmetry, std::abs(ab - ba));
        triangle = std::max(triangle, ac - (ab + bc));
        negative = std::max(negative, -std::min({ab, bc, ac}));
    }
    checks.at_most("identity", identity, 1e-12);
    checks.at_most("symmetry", symmetry, 1e-12);
    checks.at_most("triangle_excess", triangle, 1e-12);
    checks.at_most("negativity", negative, 0.0);

    struct Family {
        const char* name;
        StatisticFunctional phi;
    };
    auto id = [](double x) { return x; };
    auto one = [](double) { return 1.0; };
    const std::vector<Family> families{
        {"mean", StatisticFunctional::mean()},
        {"second_moment", {[](double x) { return x * x; }, [](double x) { return 2.0 * x; }, id, one}},
        {"exp_of_mean_sin",
         {[](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
          [](double s) { return std::exp(s); }, [](double s) { return std::exp(s); }}},
    };
    const auto zeta = draw(64);
    const auto eta = draw(64);
    json lions = json::array();
    for (const Family& f : families) {
        const auto [fd1, lifted1] = lifted_directional_derivative_check(f.phi, zeta, eta, 1e-3);
        const auto [fd2, lifted2] = lifted_directional_derivative_check(f.phi, zeta, eta, 5e-4);
        const double e1 = std::abs(fd1 - lifted1), e2 = std::abs(fd2 - lifted2);
        const double floor = 1e-9 * (1.0 + std::abs(lifted1));
        const double ratio = e1 > floor ? e2 / e1 : 0.5;
        // first-order remainder: halving eps halves the error
        checks.add(std::string("lions_eps_ratio_") + f.name, ratio, 0.5,
                   e2 <= floor || (ratio >= 0.35 && ratio <= 0.65));
        lions.push_back({{"family", f.name}, {"errors", {e1, e2}}});
    }
    return {{"lions", lions}};
}

json suite_contraction_forward(const RunConfig& cfg, const Setup& s, Checks& checks) {
    const double bound = std::sqrt(2.0 / 3.0);
    const TimeGrid fine(cfg.grid.T, cfg.grid.N * cfg.verify.refine, cfg.delta);
    const auto coarse_ratios = contraction_probe(
        s.spec, control_on(s.grid, cfg.simulate.control, s.spec, "simulate.control"), cfg.particles,
        cfg.seed, cfg.verify.pairs);
    const auto fine_ratios = contraction_probe(
        s.spec, control_on(fine, cfg.simulate.control, s.spec, "simulate.control"), cfg.particles, cfg.seed,
        cfg.verify.pairs);
    const double c_max = max_of(coarse_ratios), f_max = max_of(fine_ratios);
    checks.at_most("max_ratio_N", c_max, bound + 0.05);
    checks.at_most("max_ratio_refined", f_max, bound + 0.05);
    // the excess over the bound may not grow under refinement
    checks.at_most("excess_refined", std::max(0.0, f_max - bound), std::max(0.0, c_max - bound));
    checks.add("pairs_measured", static_cast<double>(std::min(coarse_ratios.size(), fine_ratios.size())),
               static_cast<double>(cfg.verify.pairs),
               coarse_ratios.size() == cfg.verify.pairs && fine_ratios.size() == cfg.verify.pairs);
    return {{"bound", bound},
            {"delta0", s.spec.forward_delta0()},
            {"ratios_N", coarse_ratios},
            {"ratios_refined", fine_ratios},
            {"N_refined", fine.steps()}};
}

json suite_contraction_bsde(const RunConfig& cfg, const Setup& s, Checks& checks) {
    const Control control = control_on(s.grid, cfg.simulate.control, s.spec, "simulate.control");
    const ForwardSolution fwd = solve_forward(s.spec, control, cfg.particles, cfg.seed, s.opts.forward);
    const AdjointSolution adj = solve_adjoint(s.spec, fwd.ensemble, control, s.opts.adjoint);
    checks.at_most("max_outer_ratio", max_of(adj.report.contraction_estimates), 1.0 / std::sqrt(2.0) + 0.1);
    checks.at_most("terminal_residual", adj.terminal_residual, 10.0 * cfg.tolerances.bsde_tol);
    checks.at_most("delta", cfg.delta, adj.delta0);
    checks.add("converged", adj.report.converged ? 1.0 : 0.0, 1.0, adj.report.converged);
    return report_json(adj);
}

json suite_lemma(const RunConfig& cfg, const Setup& s, Checks& checks) {
    const Control u_star = control_on(s.grid, cfg.simulate.control, s.spec, "simulate.control");
    const DifferenceQuotientReport rep = difference_quotient_check(
        s.spec, u_star, perturbed(u_star, cfg), cfg.verify.thetas_lemma, cfg.particles, cfg.seed,
        s.opts.forward);
    const double worst = max_of(rep.errors);
    bool monotone = true;
    for (std::size_t j = 1; j < rep.errors.size(); ++j) monotone = monotone && rep.errors[j] < rep.errors[j - 1];
    const double ratio = rep.errors.front() > 0.0 ? rep.errors.back() / rep.errors.front() : 0.0;
    // Affine dynamics make the quotient exact; otherwise the error must
    // decay with theta.
    const bool exact = worst <= 1e-10;
    checks.add("max_error_exact", worst, 1e-10, exact || (monotone && ratio <= 0.1));
    checks.add("monotone_decrease", monotone ? 1.0 : 0.0, 1.0, exact || monotone);
    checks.add("final_initial_ratio", ratio, 0.1, exact || ratio <= 0.1);
    return {{"thetas", rep.thetas}, {"errors", rep.errors}, {"scope", rep.scope},
            {"regime", exact ? "exact" : "decaying"}};
}

json suite_duality(const RunConfig& cfg, const Setup& s, Checks& checks) {
    const Control u_star = control_on(s.grid, cfg.simulate.control, s.spec, "simulate.control");
    const Control u = perturbed(u_star, cfg);
    json rows = json::array();
    for (std::size_t r = 0; r < cfg.verify.seeds; ++r) {
        const std::uint64_t seed = cfg.seed + r;
        const DualityReport d = duality_check(s.spec, u_star, u, cfg.particles, seed, s.opts);
        checks.at_most("gap_seed_" + std::to_string(seed), d.gap, d.tolerance);
        rows.push_back({{"seed", seed}, {"lhs", d.lhs}, {"rhs", d.rhs}, {"gap", d.gap},
                        {"scale", d.scale}, {"tolerance", d.tolerance}});
    }
    return {{"seeds", rows}};
}

json suite_gradient(const RunConfig& cfg, const Setup& s, Checks& checks) {
    const Control u_star = control_on(s.grid, cfg.simulate.control, s.spec, "simulate.control");
    const GradientCheckReport rep = gateaux_gradient_check(
        s.spec, u_star, perturbed(u_star, cfg), cfg.particles, cfg.seed, cfg.verify.thetas_gradient, s.opts);
    const double slope = rep.rows.front().gap / rep.rows.front().theta;
    double excess = 0.0;
    json rows = json::array();
    for (const auto& row : rep.rows) {
        excess = std::max(excess, row.gap - (slope * row.theta + rep.noise_floor));
        rows.push_back({{"theta", row.theta}, {"finite_difference", row.finite_difference}, {"gap", row.gap}});
    }
    checks.at_most("gap_excess_over_linear", excess, 0.0);
    checks.add("ratio_test", rep.ratio_test_passed ? 1.0 : 0.0, 1.0, rep.ratio_test_passed);

    // Central differences of d_u H at random probes: the error must shrink
    // like eps^2 or sit at rounding level.
    std::mt19937_64 gen = substream(cfg.seed, 1);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    double worst_ratio = 0.0;
    const double eps = 1e-3;
    for (std::size_t probe = 0; probe < 100; ++probe) {
        const double t = unit(gen) * cfg.grid.T;
        const double x = normal(gen);
        std::vector<double> samples(8);
        for (double& y : samples) y = normal(gen);
        const EmpiricalMeasure mu(samples);
        const double u = s.spec.control_lo + (s.spec.control_hi - s.spec.control_lo) * (0.1 + 0.8 * unit(gen));
        const double p = normal(gen), q = normal(gen);
        const double g = hamiltonian_u_gradient(s.spec, t, x, mu, u, p, q);
        auto central = [&](double h) {
            return (hamiltonian(s.spec, t, x, mu, u + h, p, q) - hamiltonian(s.spec, t, x, mu, u - h, p, q)) /
                   (2.0 * h);
        };
        const double e1 = std::abs(central(eps) - g), e2 = std::abs(central(eps / 2) - g);
        const double floor = 1e-8 * (1.0 + std::abs(g));
        if (e2 > floor) worst_ratio = std::max(worst_ratio, e2 / e1);
    }
    checks.at_most("hamiltonian_fd_ratio", worst_ratio, 0.3);
    return {{"rows", rows},
            {"adjoint_directional", rep.adjoint_directional},
            {"variational_directional", rep.variational_directional},
            {"scale", rep.scale},
            {"noise_floor", rep.noise_floor},
            {"slope", slope},
            {"gap_ratios", rep.gap_ratios}};
}

}  // namespace

std::vector<std::string> verify_suites() {
    return {"wasserstein", "contraction-forward", "contraction-bsde", "lemma-diffquot", "duality", "gradient"};
}

int cmd_verify(const RunConfig& cfg, const std::string& suite, const std::filesystem::path& out_dir,
               std::ostream& out, std::ostream& err) {
    const auto suites = verify_suites();
    if (std::find(suites.begin(), suites.end(), suite) == suites.end()) {
        err << "unknown suite \"" << suite << "\"; available:";
        for (const auto& name : suites) err << ' ' << name;
        err << '\n';
        return kExitConfig;
    }
    return guarded(err, [&] {
        Checks checks;
        json details;
        if (suite == "wasserstein") {
            details = suite_wasserstein(cfg, checks);
        } else {
            const Setup s = make_setup(cfg);
            if (suite == "contraction-forward") details = suite_contraction_forward(cfg, s, checks);
            if (suite == "contraction-bsde") details = suite_contraction_bsde(cfg, s, checks);
            if (suite == "lemma-diffquot") details = suite_lemma(cfg, s, checks);
            if (suite == "duality") details = suite_duality(cfg, s, checks);
            if (suite == "gradient") details = suite_gradient(cfg, s, checks);
        }
        write_json(out_dir / ("verify_" + suite + ".json"),
                   {{"suite", suite}, {"passed", checks.passed}, {"checks", checks.items}, {"details", details}});
        for (const auto& c : checks.items) {
            out << (c["passed"].get<bool>() ? "ok   " : "FAIL ") << suite << ' ' << c["name"].get<std::string>()
                << " measured=" << format_double(c["measured"].get<double>())
                << " bound=" << format_double(c["bound"].get<double>()) << '\n';
        }
        return checks.passed ? kExitOk : kExitCheckFailed;
    });
}

// -------------------------------------------------------------------- cli --

int run_cli(int argc, char** argv) {
    CLI::App app{"Anticipating McKean-Vlasov simulation, adjoint and control optimization"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::string out_dir;
    std::string suite;
    std::vector<std::string> overrides;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker thread cap (default: hardware)");
        sub->add_option("--out", out_dir, "output directory (default: $AMV_OUTPUT_DIR or amv-out)");
        sub->add_option("--set", overrides, "override a config key, e.g. --set grid.N=200");
    };
    CLI::App* simulate = app.add_subcommand("simulate", "solve the forward particle system");
    CLI::App* optimize_cmd = app.add_subcommand("optimize", "projected-gradient control optimization");
    CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
    common(simulate);
    common(optimize_cmd);
    common(verify);
    verify->add_option("--suite", suite, "one of: wasserstein contraction-forward contraction-bsde "
                                         "lemma-diffquot duality gradient")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    RunConfig cfg;
    try {
        cfg = load_config(config_path, overrides);
        if (simulate->count("--seed") + optimize_cmd->count("--seed") + verify->count("--seed") > 0) cfg.seed = seed;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    set_thread_count(threads);
    const std::filesystem::path dir = out_dir.empty() ? default_output_dir() : std::filesystem::path(out_dir);

    if (simulate->parsed()) return cmd_simulate(cfg, dir, std::cout, std::cerr);
    if (optimize_cmd->parsed()) return cmd_optimize(cfg, dir, std::cout, std::cerr);
    return cmd_verify(cfg, suite, dir, std::cout, std::cerr);
}

}  // namespace amv
