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

#include <filesystem>
#include <string>

#include <json.hpp>

#include "amv/adjoint.hpp"
#include "amv/forward.hpp"
#include "amv/optimizer.hpp"

namespace amv {

/// "%.17g"; round-trips every finite double.
std::string format_double(double v);

nlohmann::json to_json(const FixedPointReport& report);
nlohmann::json to_json(const TimeGrid& grid);
nlohmann::json to_json(const OptimalityReport& report);

/// Columns particle,t,X; one row per particle and node.
void write_ensemble_csv(const std::filesystem::path& path, const ParticleEnsemble& ensemble);
/// Columns particle,t,p,q; q is empty at t = T.
void write_adjoint_csv(const std::filesystem::path& path, const TimeGrid& grid,
                       const AdjointSolution& adjoint);
/// Columns t,u with t the left end of each cell.
void write_control_csv(const std::filesystem::path& path, const Control& control);
/// Columns iteration,J,SE,max_grad,step_size.
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);
/// Pretty-printed with a trailing newline. Throws Error when the file cannot
/// be written.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

}  // namespace amv
