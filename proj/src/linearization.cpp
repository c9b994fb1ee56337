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
#include "amv/linearization.hpp"

#include <cmath>
#include <sstream>

#include "amv/error.hpp"
#include "amv/parallel.hpp"

namespace amv {

namespace {

void require_finite(double v, const char* what, std::size_t i, std::size_t k) {
    if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-finite " << what << " at particle " << i << ", step " << k;
        throw NonFiniteError(msg.str());
    }
}

}  // namespace

Linearization::Linearization(const ProblemSpec& spec, const ParticleEnsemble& base,
                             const Control& control)
    : spec_(&spec),
      grid_(base.grid()),
      paths_(base.paths()),
      increments_(base.shared_increments()),
      laws_(node_laws(base.paths())),
      control_(control.values()) {
    if (!(control.grid() == grid_)) throw ConfigError("control and ensemble grids differ");
    b_ = make_jet(spec.db_dx, spec.db_du, spec.db_dmu);
    sigma_ = make_jet(spec.dsigma_dx, spec.dsigma_du, spec.dsigma_dmu);
    l_ = make_jet(spec.dl_dx, spec.dl_du, spec.dl_dmu);
}

CoefficientJet Linearization::make_jet(const Coefficient& dx, const Coefficient& du,
                                       const LionsDerivative& dmu) const {
    const std::size_t m = particles();
    const std::size_t n = grid_.steps();
    CoefficientJet jet;
    jet.dx = PathMatrix(m, n);
    jet.du = PathMatrix(m, n);
    jet.dmu = &dmu;
    const bool separable = dmu.is_separable();
    if (separable) {
        jet.mu_outer = PathMatrix(m, n);
        jet.mu_inner = PathMatrix(m, n);
    }
    parallel_for(m, [&](std::size_t i) {
        for (std::size_t k = 0; k < n; ++k) {
            const double t = grid_.time(k);
            const double x = paths_(i, k);
            const EmpiricalMeasure& mu = laws_[grid_.ahead(k)];
            const double u = control_[k];
            jet.dx(i, k) = dx(t, x, mu, u);
            jet.du(i, k) = du(t, x, mu, u);
            require_finite(jet.dx(i, k), "state derivative", i, k);
            require_finite(jet.du(i, k), "control derivative", i, k);
            if (separable) {
                jet.mu_outer(i, k) = dmu.outer(t, x, mu, u);
                require_finite(jet.mu_outer(i, k), "Lions derivative", i, k);
            }
        }
    });
    if (separable) {
        parallel_for(n, [&](std::size_t k) {
            const std::size_t a = grid_.ahead(k);
            const std::vector<double> ys = paths_.column(a);
            const auto values = dmu.inner_values(grid_.time(k), laws_[a], ys);
            for (std::size_t i = 0; i < m; ++i) {
                require_finite(values[i], "Lions derivative", i, k);
                jet.mu_inner(i, k) = values[i];
            }
        });
    }
    return jet;
}

double Linearization::pair_dmu(const CoefficientJet& h, std::size_t j, std::size_t c,
                               std::size_t i) const {
    if (h.mu_zero()) return 0.0;
    if (h.dmu->is_separable()) return h.mu_outer(j, c) * h.mu_inner(i, c);
    const std::size_t a = grid_.ahead(c);
    return (*h.dmu)(grid_.time(c), paths_(j, c), laws_[a], paths_(i, a), control_[c]);
}

PathMatrix Linearization::forward_cloud(const CoefficientJet& h, const PathMatrix& w) const {
    const std::size_t m = particles();
    const std::size_t n = grid_.steps();
    PathMatrix out(m, n);
    if (h.mu_zero()) return out;
    const auto md = static_cast<double>(m);
    if (h.dmu->is_separable()) {
        std::vector<double> avg(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t a = grid_.ahead(k);
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += h.mu_inner(j, k) * w(j, a);
            avg[k] = acc / md;
        }
        parallel_for(m, [&](std::size_t i) {
            for (std::size_t k = 0; k < n; ++k) out(i, k) = h.mu_outer(i, k) * avg[k];
        });
        return out;
    }
    parallel_for(m, [&](std::size_t i) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t a = grid_.ahead(k);
            const double t = grid_.time(k);
            const EmpiricalMeasure& mu = laws_[a];
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                acc += (*h.dmu)(t, paths_(i, k), mu, paths_(j, a), control_[k]) * w(j, a);
            }
            out(i, k) = acc / md;
            require_finite(out(i, k), "Lions derivative", i, k);
        }
    });
    return out;
}

PathMatrix Linearization::swapped_cloud(const CoefficientJet& h, const PathMatrix* w) const {
    const std::size_t m = particles();
    const std::size_t n = grid_.steps();
    PathMatrix out(m, n);
    if (h.mu_zero()) return out;
    const auto md = static_cast<double>(m);
    auto weight = [&](std::size_t j, std::size_t k) { return w ? (*w)(j, k) : 1.0; };
    if (h.dmu->is_separable()) {
        std::vector<double> avg(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += h.mu_outer(j, k) * weight(j, k);
            avg[k] = acc / md;
        }
        parallel_for(m, [&](std::size_t i) {
            for (std::size_t k = 0; k < n; ++k) out(i, k) = h.mu_inner(i, k) * avg[k];
        });
        return out;
    }
    parallel_for(m, [&](std::size_t i) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t a = grid_.ahead(k);
            const double t = grid_.time(k);
            const EmpiricalMeasure& mu = laws_[a];
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                acc += (*h.dmu)(t, paths_(j, k), mu, paths_(i, a), control_[k]) * weight(j, k);
            }
            out(i, k) = acc / md;
            require_finite(out(i, k), "Lions derivative", i, k);
        }
    });
    return out;
}

}  // namespace amv
