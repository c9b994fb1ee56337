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

#include <vector>

#include "amv/forward.hpp"

namespace amv {

/// Partials of one coefficient h along a base ensemble. Cell (i, k), k < N,
/// is evaluated at (t_k, X_ik, mu_{ahead(k)}, u_k), the arguments the Euler
/// step from t_k uses.
struct CoefficientJet {
    PathMatrix dx;  ///< M x N
    PathMatrix du;  ///< M x N
    const LionsDerivative* dmu = nullptr;
    /// Separable Lions derivative only: outer at cell (i, k) and inner at
    /// y = X_{i, ahead(k)}, both M x N.
    PathMatrix mu_outer;
    PathMatrix mu_inner;

    bool mu_zero() const noexcept { return dmu == nullptr || dmu->is_zero(); }
};

/// Everything the linearized forward and adjoint equations need from a
/// converged forward solution, evaluated once. Keeps a pointer to spec,
/// which must outlive it.
class Linearization {
public:
    Linearization(const ProblemSpec& spec, const ParticleEnsemble& base, const Control& control);

    const ProblemSpec& spec() const noexcept { return *spec_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const PathMatrix& paths() const noexcept { return paths_; }
    const PathMatrix& increments() const noexcept { return *increments_; }
    const std::vector<EmpiricalMeasure>& laws() const noexcept { return laws_; }
    const std::vector<double>& control() const noexcept { return control_; }
    std::size_t particles() const noexcept { return paths_.particles(); }

    const CoefficientJet& b() const noexcept { return b_; }
    const CoefficientJet& sigma() const noexcept { return sigma_; }
    const CoefficientJet& l() const noexcept { return l_; }

    /// out(i, k) = (1/M) sum_j d_mu h(cell (i, k); y = X_{j, ahead(k)}) w(j, ahead(k))
    /// for k < N. w must have at least N + 1 columns.
    PathMatrix forward_cloud(const CoefficientJet& h, const PathMatrix& w) const;

    /// out(i, k) = (1/M) sum_j d_mu h(cell (j, k); y = X_{i, ahead(k)}) w(j, k)
    /// for k < N: the tilde expectation with the roles of the particle and
    /// its copy swapped. w must have at least N columns; a null w means w = 1.
    PathMatrix swapped_cloud(const CoefficientJet& h, const PathMatrix* w) const;

    /// d_mu h(t_c, X_jc, mu_{ahead(c)}, X_{i, ahead(c)}, u_c).
    double pair_dmu(const CoefficientJet& h, std::size_t j, std::size_t c, std::size_t i) const;

private:
    CoefficientJet make_jet(const Coefficient& dx, const Coefficient& du,
                            const LionsDerivative& dmu) const;

    const ProblemSpec* spec_;
    TimeGrid grid_;
    PathMatrix paths_;
    std::shared_ptr<const PathMatrix> increments_;
    std::vector<EmpiricalMeasure> laws_;
    std::vector<double> control_;
    CoefficientJet b_;
    CoefficientJet sigma_;
    CoefficientJet l_;
};

}  // namespace amv
