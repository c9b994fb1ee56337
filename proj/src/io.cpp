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
#include "amv/io.hpp"

#include <cstdio>
#include <fstream>

#include "amv/error.hpp"

namespace amv {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json to_json(const FixedPointReport& report) {
    return {{"iterations", report.iterations},
            {"residuals", report.residuals},
            {"beta", report.beta},
            {"converged", report.converged},
            {"contraction_estimates", report.contraction_estimates}};
}

nlohmann::json to_json(const TimeGrid& grid) {
    return {{"T", grid.horizon()},
            {"N", grid.steps()},
            {"dt", grid.dt()},
            {"delta", grid.delta()},
            {"delta_steps", grid.delta_steps()}};
}

nlohmann::json to_json(const OptimalityReport& report) {
    std::vector<std::size_t> violated;
    for (std::size_t k = 0; k < report.violated.size(); ++k) {
        if (report.violated[k]) violated.push_back(k);
    }
    std::vector<std::string> state(report.gradient.size(), "interior");
    for (std::size_t k = 0; k < state.size(); ++k) {
        if (report.at_lower[k]) state[k] = "lower";
        if (report.at_upper[k]) state[k] = report.at_lower[k] ? "fixed" : "upper";
    }
    return {{"passed", report.passed},
            {"grad_tol", report.grad_tol},
            {"max_interior_gradient", report.max_interior_gradient},
            {"max_violation", report.max_violation},
            {"violated_cells", violated},
            {"gradient", report.gradient},
            {"cell_state", state}};
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

void write_ensemble_csv(const std::filesystem::path& path, const ParticleEnsemble& ensemble) {
    auto out = open_out(path);
    const TimeGrid& grid = ensemble.grid();
    out << "particle,t,X\n";
    for (std::size_t i = 0; i < ensemble.particles(); ++i) {
        for (std::size_t k = 0; k <= grid.steps(); ++k) {
            out << i << ',' << format_double(grid.time(k)) << ',' << format_double(ensemble(i, k))
                << '\n';
        }
    }
    close_out(out, path);
}

void write_adjoint_csv(const std::filesystem::path& path, const TimeGrid& grid,
                       const AdjointSolution& adjoint) {
    auto out = open_out(path);
    const std::size_t n = grid.steps();
    out << "particle,t,p,q\n";
    for (std::size_t i = 0; i < adjoint.p_paths.particles(); ++i) {
        for (std::size_t k = 0; k <= n; ++k) {
            out << i << ',' << format_double(grid.time(k)) << ',' << format_double(adjoint.p_paths(i, k))
                << ',';
            if (k < n) out << format_double(adjoint.q_paths(i, k));
            out << '\n';
        }
    }
    close_out(out, path);
}

void write_control_csv(const std::filesystem::path& path, const Control& control) {
    auto out = open_out(path);
    out << "t,u\n";
    for (std::size_t k = 0; k < control.size(); ++k) {
        out << format_double(control.grid().time(k)) << ',' << format_double(control[k]) << '\n';
    }
    close_out(out, path);
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
    auto out = open_out(path);
    out << "iteration,J,SE,max_grad,step_size\n";
    for (const auto& r : trace) {
        out << r.iteration << ',' << format_double(r.cost) << ',' << format_double(r.standard_error)
            << ',' << format_double(r.max_grad) << ',' << format_double(r.step_size) << '\n';
    }
    close_out(out, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    auto out = open_out(path);
    out << value.dump(2) << '\n';
    close_out(out, path);
}

}  // namespace amv
