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
#include "amv/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "amv/error.hpp"

namespace amv {

// ---------------------------------------------------------------------------
// LionsDerivative

LionsDerivative LionsDerivative::separable(Outer outer, Inner inner) {
    LionsDerivative d;
    d.outer_ = std::move(outer);
    d.inner_ = std::move(inner);
    return d;
}

LionsDerivative LionsDerivative::general(General fn) {
    LionsDerivative d;
    d.general_ = std::move(fn);
    return d;
}

LionsDerivative LionsDerivative::statistic(Outer outer_dm, StatisticFunctional phi) {
    auto shared = std::make_shared<const StatisticFunctional>(std::move(phi));
    auto inner = [shared](double, const EmpiricalMeasure& mu, double y) {
        return lions_derivative_statistic(*shared, mu, y);
    };
    LionsDerivative d = separable(std::move(outer_dm), std::move(inner));
    d.statistic_ = std::move(shared);
    return d;
}

std::vector<double> LionsDerivative::inner_values(double t, const EmpiricalMeasure& mu,
                                                  std::span<const double> ys) const {
    std::vector<double> out(ys.size(), 0.0);
    if (statistic_) {
        const double scale = statistic_->dg(amv::statistic(mu, statistic_->f));
        for (std::size_t i = 0; i < ys.size(); ++i) out[i] = scale * statistic_->df(ys[i]);
    } else if (inner_) {
        for (std::size_t i = 0; i < ys.size(); ++i) out[i] = inner_(t, mu, ys[i]);
    }
    return out;
}

double LionsDerivative::operator()(double t, double x, const EmpiricalMeasure& mu, double y,
                                   double u) const {
    if (outer_) return outer_(t, x, mu, u) * inner_(t, mu, y);
    if (general_) return general_(t, x, mu, y, u);
    return 0.0;
}

double LionsDerivative::outer(double t, double x, const EmpiricalMeasure& mu, double u) const {
    return outer_ ? outer_(t, x, mu, u) : 0.0;
}

double LionsDerivative::inner(double t, const EmpiricalMeasure& mu, double y) const {
    return inner_ ? inner_(t, mu, y) : 0.0;
}

// ---------------------------------------------------------------------------
// ProblemSpec / Control

void ProblemSpec::check_complete() const {
    const std::pair<const char*, bool> required[] = {
        {"b", static_cast<bool>(b)},
        {"sigma", static_cast<bool>(sigma)},
        {"l", static_cast<bool>(l)},
        {"g", static_cast<bool>(g)},
        {"db_dx", static_cast<bool>(db_dx)},
        {"dsigma_dx", static_cast<bool>(dsigma_dx)},
        {"dl_dx", static_cast<bool>(dl_dx)},
        {"db_du", static_cast<bool>(db_du)},
        {"dsigma_du", static_cast<bool>(dsigma_du)},
        {"dl_du", static_cast<bool>(dl_du)},
        {"dg_dx", static_cast<bool>(dg_dx)},
    };
    for (const auto& [field, present] : required) {
        if (!present) throw ConfigError(std::string("problem is missing coefficient ") + field);
    }
    if (!(lipschitz_C > 0.0)) throw ConfigError("lipschitz_C must be positive");
    if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
    if (!(delta >= 0.0)) throw ConfigError("delta must be nonnegative");
    if (!(control_lo <= control_hi)) throw ConfigError("control_lo must not exceed control_hi");
}

Control::Control(TimeGrid grid, std::vector<double> values, double lo, double hi)
    : grid_(grid), values_(std::move(values)), lo_(lo), hi_(hi) {
    if (!(lo <= hi)) throw ConfigError("control bounds must satisfy lo <= hi");
    if (values_.size() != grid_.steps()) {
        throw ConfigError("control length must equal the number of grid cells");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!(values_[k] >= lo && values_[k] <= hi)) {
            std::ostringstream msg;
            msg << "control value " << values_[k] << " at cell " << k << " lies outside [" << lo
                << ", " << hi << "]";
            throw ConfigError(msg.str());
        }
    }
}

Control Control::constant(const TimeGrid& grid, double value, double lo, double hi) {
    return Control(grid, std::vector<double>(grid.steps(), value), lo, hi);
}

Control Control::constant(const TimeGrid& grid, double value, const ProblemSpec& spec) {
    return constant(grid, value, spec.control_lo, spec.control_hi);
}

Control Control::clamped(const TimeGrid& grid, std::vector<double> values, double lo, double hi) {
    for (double& v : values) v = std::clamp(v, lo, hi);
    return Control(grid, std::move(values), lo, hi);
}

Control Control::interpolate(const Control& other, double theta) const {
    if (!(other.grid_ == grid_)) throw ConfigError("controls live on different grids");
    std::vector<double> v(values_.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = values_[k] + theta * (other.values_[k] - values_[k]);
    }
    // Rounding can push a convex combination one ulp past a bound.
    return clamped(grid_, std::move(v), lo_, hi_);
}

// ---------------------------------------------------------------------------
// validate

namespace {

std::string probe_point(double t, double x, double u) {
    std::ostringstream s;
    s.precision(17);
    s << "(t=" << t << ", x=" << x << ", u=" << u << ")";
    return s.str();
}

double checked(const char* name, double v, double t, double x, double u) {
    if (!std::isfinite(v)) {
        throw NonFiniteError(std::string("coefficient ") + name + " returned a non-finite value at " +
                             probe_point(t, x, u));
    }
    return v;
}

struct Tracker {
    std::vector<DerivativeCheck> checks;
    void record(const std::string& name, double err) {
        auto it = std::find_if(checks.begin(), checks.end(),
                               [&](const DerivativeCheck& c) { return c.name == name; });
        if (it == checks.end()) {
            checks.push_back({name, err});
        } else {
            it->max_abs_error = std::max(it->max_abs_error, err);
        }
    }
};

}  // namespace

ValidationReport validate(const ProblemSpec& spec, std::uint64_t rng_seed, std::size_t n_probes) {
    spec.check_complete();
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    constexpr std::size_t kSample = 8;
    auto random_sample = [&](double centre) {
        const double spread = 0.2 + unit(rng);
        std::vector<double> s(kSample);
        for (auto& v : s) v = centre + spread * normal(rng);
        return s;
    };

    ValidationReport report;
    Tracker tracker;

    const std::pair<const char*, const Coefficient*> state_coeffs[] = {
        {"b", &spec.b}, {"sigma", &spec.sigma}, {"l", &spec.l}};
    const Coefficient* dx[] = {&spec.db_dx, &spec.dsigma_dx, &spec.dl_dx};
    const Coefficient* du[] = {&spec.db_du, &spec.dsigma_du, &spec.dl_du};
    const LionsDerivative* dmu[] = {&spec.db_dmu, &spec.dsigma_dmu, &spec.dl_dmu};

    for (std::size_t probe = 0; probe < n_probes; ++probe) {
        const double t = spec.horizon * unit(rng);
        const double u = spec.control_lo + (spec.control_hi - spec.control_lo) * unit(rng);
        const double x = spec.x0 + 2.0 * normal(rng);
        double x2 = x + normal(rng);
        const auto zeta = random_sample(spec.x0 + normal(rng));
        auto zeta2 = random_sample(spec.x0 + normal(rng));
        // Alternate between moving both arguments, only x, and only mu so each
        // part of the Lipschitz bound gets exercised.
        if (probe % 3 == 1) zeta2 = zeta;
        if (probe % 3 == 2) x2 = x;
        const EmpiricalMeasure mu(zeta);
        const EmpiricalMeasure mu2(zeta2);

        const double dist = std::abs(x - x2) + wasserstein2(mu, mu2);
        if (dist > 0.0) {
            const double db = std::abs(checked("b", spec.b(t, x, mu, u), t, x, u) -
                                       checked("b", spec.b(t, x2, mu2, u), t, x2, u));
            const double ds = std::abs(checked("sigma", spec.sigma(t, x, mu, u), t, x, u) -
                                       checked("sigma", spec.sigma(t, x2, mu2, u), t, x2, u));
            report.lipschitz_ratio_b = std::max(report.lipschitz_ratio_b, db / dist);
            report.lipschitz_ratio_sigma = std::max(report.lipschitz_ratio_sigma, ds / dist);
        }

        const double hx = 1e-5 * (1.0 + std::abs(x));
        const double hu = 1e-5 * (1.0 + std::abs(u));
        std::vector<double> eta(kSample);
        for (auto& e : eta) e = normal(rng);
        const double eps = 1e-5;
        std::vector<double> plus(kSample), minus(kSample);
        for (std::size_t i = 0; i < kSample; ++i) {
            plus[i] = zeta[i] + eps * eta[i];
            minus[i] = zeta[i] - eps * eta[i];
        }
        const EmpiricalMeasure mu_plus(plus);
        const EmpiricalMeasure mu_minus(minus);

        for (std::size_t c = 0; c < 3; ++c) {
            const auto& [name, fn] = state_coeffs[c];
            const std::string n(name);
            const double fd_x = (checked(name, (*fn)(t, x + hx, mu, u), t, x + hx, u) -
                                 checked(name, (*fn)(t, x - hx, mu, u), t, x - hx, u)) /
                                (2.0 * hx);
            const double an_x = checked(("d" + n + "_dx").c_str(), (*dx[c])(t, x, mu, u), t, x, u);
            tracker.record("d" + n + "_dx", std::abs(fd_x - an_x));

            const double fd_u = (checked(name, (*fn)(t, x, mu, u + hu), t, x, u + hu) -
                                 checked(name, (*fn)(t, x, mu, u - hu), t, x, u - hu)) /
                                (2.0 * hu);
            const double an_u = checked(("d" + n + "_du").c_str(), (*du[c])(t, x, mu, u), t, x, u);
            tracker.record("d" + n + "_du", std::abs(fd_u - an_u));

            const double fd_mu = ((*fn)(t, x, mu_plus, u) - (*fn)(t, x, mu_minus, u)) / (2.0 * eps);
            double lifted = 0.0;
            for (std::size_t i = 0; i < kSample; ++i) {
                lifted += checked(("d" + n + "_dmu").c_str(), (*dmu[c])(t, x, mu, zeta[i], u), t, x,
                                  u) *
                          eta[i];
            }
            lifted /= static_cast<double>(kSample);
            tracker.record("d" + n + "_dmu", std::abs(fd_mu - lifted));
        }

        const double fd_gx = (checked("g", spec.g(x + hx, mu), spec.horizon, x + hx, 0.0) -
                              checked("g", spec.g(x - hx, mu), spec.horizon, x - hx, 0.0)) /
                             (2.0 * hx);
        tracker.record("dg_dx",
                       std::abs(fd_gx - checked("dg_dx", spec.dg_dx(x, mu), spec.horizon, x, 0.0)));
        const double fd_gmu = (spec.g(x, mu_plus) - spec.g(x, mu_minus)) / (2.0 * eps);
        double lifted_g = 0.0;
        for (std::size_t i = 0; i < kSample; ++i) {
            lifted_g += spec.dg_dmu(spec.horizon, x, mu, zeta[i], 0.0) * eta[i];
        }
        lifted_g /= static_cast<double>(kSample);
        tracker.record("dg_dmu", std::abs(fd_gmu - lifted_g));
    }

    report.derivative_checks = std::move(tracker.checks);
    for (const auto& c : report.derivative_checks) {
        report.max_derivative_mismatch = std::max(report.max_derivative_mismatch, c.max_abs_error);
    }
    report.delta0 = spec.forward_delta0();
    report.delta_within_forward_regime = spec.delta <= report.delta0 * (1.0 + 1e-12);
    return report;
}

// ---------------------------------------------------------------------------
// Built-in problems

namespace {

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void check_known_keys(const std::string& name, const std::map<std::string, double>& params,
                      std::initializer_list<const char*> extra) {
    static const char* common[] = {"x0", "T", "delta", "C", "u_lo", "u_hi"};
    for (const auto& [key, value] : params) {
        bool known = std::find(std::begin(common), std::end(common), key) != std::end(common);
        for (const char* e : extra) known = known || key == e;
        if (!known) throw ConfigError("unknown parameter '" + key + "' for problem " + name);
    }
}

void fill_common(ProblemSpec& spec, const std::map<std::string, double>& params, double default_lo,
                 double default_hi, double default_C) {
    spec.params = params;
    spec.x0 = param(params, "x0", 1.0);
    spec.horizon = param(params, "T", 1.0);
    spec.delta = param(params, "delta", 0.0);
    spec.lipschitz_C = param(params, "C", default_C);
    spec.control_lo = param(params, "u_lo", default_lo);
    spec.control_hi = param(params, "u_hi", default_hi);
}

Coefficient constant_coeff(double v) {
    return [v](double, double, const EmpiricalMeasure&, double) { return v; };
}

ProblemSpec make_constant(const std::map<std::string, double>& params) {
    check_known_keys("constant", params, {"b", "sigma"});
    ProblemSpec spec;
    spec.name = "constant";
    fill_common(spec, params, -1.0, 1.0, 1.0);
    const double b0 = param(params, "b", 1.0);
    const double s0 = param(params, "sigma", 1.0);
    spec.b = constant_coeff(b0);
    spec.sigma = constant_coeff(s0);
    spec.l = [](double, double, const EmpiricalMeasure&, double u) { return u * u; };
    spec.g = [](double x, const EmpiricalMeasure&) { return x; };
    spec.db_dx = spec.dsigma_dx = spec.dl_dx = constant_coeff(0.0);
    spec.db_du = spec.dsigma_du = constant_coeff(0.0);
    spec.dl_du = [](double, double, const EmpiricalMeasure&, double u) { return 2.0 * u; };
    spec.dg_dx = [](double, const EmpiricalMeasure&) { return 1.0; };
    spec.driftless_state_free_diffusion = b0 == 0.0;
    return spec;
}

ProblemSpec make_deterministic_mean(const std::map<std::string, double>& params) {
    check_known_keys("deterministic-mean", params, {});
    ProblemSpec spec;
    spec.name = "deterministic-mean";
    fill_common(spec, params, -1.0, 1.0, 1.0);
    spec.b = [](double, double, const EmpiricalMeasure& mu, double) { return mu.mean(); };
    spec.sigma = constant_coeff(0.0);
    spec.l = [](double, double, const EmpiricalMeasure&, double u) { return 0.5 * u * u; };
    spec.g = [](double x, const EmpiricalMeasure&) { return 0.5 * x * x; };
    spec.db_dx = spec.dsigma_dx = spec.dl_dx = constant_coeff(0.0);
    spec.db_du = spec.dsigma_du = constant_coeff(0.0);
    spec.dl_du = [](double, double, const EmpiricalMeasure&, double u) { return u; };
    spec.dg_dx = [](double x, const EmpiricalMeasure&) { return x; };
    spec.db_dmu = LionsDerivative::statistic(constant_coeff(1.0), StatisticFunctional::mean());
    return spec;
}

ProblemSpec make_linear_quadratic(const std::string& name,
                                  const std::map<std::string, double>& params, bool with_mean) {
    if (with_mean) {
        check_known_keys(name, params, {"a", "abar", "c", "sigma0", "lambda", "kappa", "sin_amp"});
    } else {
        check_known_keys(name, params, {"a", "c", "sigma0", "lambda", "kappa", "sin_amp"});
    }
    const double a = param(params, "a", 0.5);
    const double abar = with_mean ? param(params, "abar", 0.5) : 0.0;
    const double c = param(params, "c", 1.0);
    const double s0 = param(params, "sigma0", 0.3);
    const double lambda = param(params, "lambda", 1.0);
    const double kappa = param(params, "kappa", 1.0);
    const double sin_amp = param(params, "sin_amp", 0.0);

    // Honest for both the forward bound |x - x'| + W2 and the Euclidean
    // Lipschitz bound of the adjoint driver in (p, q, p~, q~).
    double honest_C = std::abs(a) + std::abs(abar) + std::abs(sin_amp);
    if (honest_C == 0.0) honest_C = 1.0;

    ProblemSpec spec;
    spec.name = name;
    fill_common(spec, params, -5.0, 5.0, honest_C);

    spec.b = [=](double, double x, const EmpiricalMeasure& mu, double u) {
        return a * x + abar * mu.mean() + c * u + sin_amp * std::sin(x);
    };
    spec.sigma = constant_coeff(s0);
    spec.l = [=](double, double x, const EmpiricalMeasure&, double u) {
        return 0.5 * (lambda * x * x + u * u);
    };
    spec.g = [=](double x, const EmpiricalMeasure&) { return 0.5 * kappa * x * x; };

    spec.db_dx = [=](double, double x, const EmpiricalMeasure&, double) {
        return a + sin_amp * std::cos(x);
    };
    spec.dsigma_dx = constant_coeff(0.0);
    spec.dl_dx = [=](double, double x, const EmpiricalMeasure&, double) { return lambda * x; };
    spec.db_du = constant_coeff(c);
    spec.dsigma_du = constant_coeff(0.0);
    spec.dl_du = [](double, double, const EmpiricalMeasure&, double u) { return u; };
    spec.dg_dx = [=](double x, const EmpiricalMeasure&) { return kappa * x; };
    if (abar != 0.0) {
        spec.db_dmu = LionsDerivative::statistic(constant_coeff(abar), StatisticFunctional::mean());
    }
    return spec;
}

}  // namespace

std::vector<std::string> builtin_names() {
    return {"lq-anticipating-mean", "deterministic-mean", "constant", "decoupled"};
}

ProblemSpec builtin(const std::string& name, const std::map<std::string, double>& params) {
    ProblemSpec spec;
    if (name == "constant") {
        spec = make_constant(params);
    } else if (name == "deterministic-mean") {
        spec = make_deterministic_mean(params);
    } else if (name == "decoupled") {
        spec = make_linear_quadratic(name, params, false);
    } else if (name == "lq-anticipating-mean") {
        spec = make_linear_quadratic(name, params, true);
    } else {
        std::string list;
        for (const auto& n : builtin_names()) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("unknown problem '" + name + "'; available: " + list);
    }
    spec.check_complete();
    return spec;
}

}  // namespace amv
