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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "amv/optimizer.hpp"

namespace amv {

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitSolver = 2,  ///< divergence, non-finite state, or max_iter without convergence
    kExitStall = 3,
    kExitCheckFailed = 4,  ///< KKT report or a verification bound failed
};

struct RunConfig {
    struct Problem {
        std::string name = "lq-anticipating-mean";
        /// Problem keys other than T and delta, which come from grid/delta.
        std::map<std::string, double> params;
        bool operator==(const Problem&) const = default;
    };
    struct Grid {
        double T = 1.0;
        std::size_t N = 100;
        bool operator==(const Grid&) const = default;
    };
    struct Tolerances {
        double picard_tol = 1e-8;
        double bsde_tol = 1e-8;
        /// relative; the KKT tolerance is grad_tol * (1 + |J(u_init)|)
        double grad_tol = 1e-3;
        bool operator==(const Tolerances&) const = default;
    };
    struct Simulate {
        /// One value (constant control) or one value per cell.
        std::vector<double> control{0.0};
        bool adjoint = false;
        bool operator==(const Simulate&) const = default;
    };
    struct Optimize {
        std::vector<double> u_init{0.0};
        std::size_t max_outer = 100;
        double step0 = 1.0;
        bool operator==(const Optimize&) const = default;
    };
    struct Verify {
        std::size_t pairs = 20;
        std::vector<double> thetas_lemma{0.5, 0.25, 0.125, 0.0625};
        std::vector<double> thetas_gradient{0.2, 0.1, 0.05};
        std::size_t seeds = 3;
        /// direction u - u* = amplitude sin(frequency t) around simulate.control
        double amplitude = 1.0;
        double frequency = 3.0;
        /// grid refinement factor for the forward contraction suite
        std::size_t refine = 4;
        bool operator==(const Verify&) const = default;
    };

    Problem problem;
    Grid grid;
    double delta = 0.0;
    std::size_t particles = 1000;
    std::uint64_t seed = 1;
    Tolerances tolerances;
    std::string picard_mode = "full";
    int basis_degree = 2;
    std::size_t max_iter = 200;
    /// 0 selects the default C_rho of the adjoint outer norm.
    double c_rho = 0.0;
    Simulate simulate;
    Optimize optimize;
    Verify verify;

    bool operator==(const RunConfig&) const = default;
};

/// Every field is written, so the output parses back to an equal config.
void to_json(nlohmann::json& j, const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw ConfigError naming
/// the key path.
void from_json(const nlohmann::json& j, RunConfig& cfg);

/// Throws ConfigError on a broken invariant: M >= 2, positive tolerances,
/// delta a multiple of T/N, known problem and picard_mode.
void check_config(const RunConfig& cfg);

/// Parses a JSON file and applies "a.b.c=value" overrides in order. The
/// value is read as JSON when it parses, else as a string.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
RunConfig parse_config(const nlohmann::json& j, const std::vector<std::string>& overrides = {});

/// Suite names accepted by cmd_verify.
std::vector<std::string> verify_suites();

/// Each command writes its artifacts under out_dir, prints a summary to
/// out and errors to err, and returns an ExitCode.
int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out,
                 std::ostream& err);
int cmd_optimize(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out,
                 std::ostream& err);
int cmd_verify(const RunConfig& cfg, const std::string& suite, const std::filesystem::path& out_dir,
               std::ostream& out, std::ostream& err);

/// AMV_OUTPUT_DIR when set and non-empty, else "amv-out".
std::filesystem::path default_output_dir();

/// Entry point of the amv tool.
int run_cli(int argc, char** argv);

}  // namespace amv
