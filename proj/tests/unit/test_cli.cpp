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
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "amv/cli.hpp"
#include "amv/error.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "amv-cli-tests" / name;
    fs::remove_all(dir);
    return dir;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

amv::RunConfig small(const std::string& problem, double delta, std::size_t n, std::size_t m) {
    amv::RunConfig cfg;
    cfg.problem.name = problem;
    cfg.grid.N = n;
    cfg.delta = delta;
    cfg.particles = m;
    return cfg;
}

}  // namespace

TEST_CASE("config round-trips through JSON text") {
    amv::RunConfig cfg = small("decoupled", 0.1, 40, 300);
    cfg.problem.params = {{"sin_amp", 0.25}, {"a", -0.3}};
    cfg.seed = 18446744073709551615ull;
    cfg.picard_mode = "law-only";
    cfg.simulate.control = {0.1, 0.2};
    cfg.verify.thetas_lemma = {0.3, 0.1};
    cfg.tolerances.bsde_tol = 1.0 / 3.0;
    const json j = cfg;
    const amv::RunConfig back = amv::parse_config(json::parse(j.dump()));
    CHECK(back == cfg);
    CHECK(json(back).dump() == j.dump());
    CHECK(amv::parse_config(json(amv::RunConfig{})) == amv::RunConfig{});
}

TEST_CASE("config rejects unknown keys and wrong types") {
    CHECK_THROWS_WITH_AS(amv::parse_config(json::parse(R"({"grid": {"T": 1, "M": 3}})")),
                         "unknown config key grid.M", amv::ConfigError);
    CHECK_THROWS_AS(amv::parse_config(json::parse(R"({"partcles": 3})")), amv::ConfigError);
    CHECK_THROWS_AS(amv::parse_config(json::parse(R"({"particles": -3})")), amv::ConfigError);
    CHECK_THROWS_AS(amv::parse_config(json::parse(R"({"delta": "x"})")), amv::ConfigError);
    CHECK_THROWS_AS(amv::parse_config(json::parse(R"([1, 2])")), amv::ConfigError);
}

TEST_CASE("overrides edit nested keys") {
    const auto cfg = amv::parse_config(json::object(), {"grid.N=200", "problem.name=decoupled",
                                                        "simulate.control=[0.5, 0.25]", "problem.params.a=0.1",
                                                        "simulate.adjoint=true"});
    CHECK(cfg.grid.N == 200);
    CHECK(cfg.problem.name == "decoupled");
    CHECK(cfg.simulate.control == std::vector<double>{0.5, 0.25});
    CHECK(cfg.problem.params.at("a") == doctest::Approx(0.1));
    CHECK(cfg.simulate.adjoint);
    CHECK_THROWS_AS(amv::parse_config(json::object(), {"grid.N"}), amv::ConfigError);
}

TEST_CASE("config invariants") {
    amv::RunConfig cfg = small("constant", 0.0, 10, 1);
    CHECK_THROWS_AS(amv::check_config(cfg), amv::ConfigError);
    cfg.particles = 2;
    CHECK_NOTHROW(amv::check_config(cfg));
    cfg.tolerances.grad_tol = 0.0;
    CHECK_THROWS_AS(amv::check_config(cfg), amv::ConfigError);
    cfg.tolerances.grad_tol = 1e-3;
    cfg.picard_mode = "semi";
    CHECK_THROWS_AS(amv::check_config(cfg), amv::ConfigError);
    cfg.picard_mode = "full";
    cfg.delta = 0.05;
    CHECK_THROWS_WITH_AS(amv::check_config(cfg), "delta must be an integer multiple of dt", amv::ConfigError);
    cfg.delta = 0.0;
    cfg.problem.params = {{"delta", 0.1}};
    CHECK_THROWS_AS(amv::check_config(cfg), amv::ConfigError);
}

TEST_CASE("simulate: constant problem") {
    const fs::path dir = scratch("simulate-constant");
    std::ostringstream out, err;
    REQUIRE(amv::cmd_simulate(small("constant", 0.0, 10, 5), dir, out, err) == amv::kExitOk);
    const json rep = read_json(dir / "ensemble.json");
    CHECK(rep["report"]["iterations"].get<int>() <= 2);
    CHECK(rep["report"]["converged"].get<bool>());
    const auto lines = read_lines(dir / "ensemble.csv");
    CHECK(lines.front() == "particle,t,X");
    CHECK(lines.size() == 1 + 5 * 11);
    CHECK(out.str().find("mean(X_T)=") != std::string::npos);
    CHECK(fs::exists(dir / "summary.json"));
}

TEST_CASE("simulate: delta off the grid is a config error") {
    std::ostringstream out, err;
    CHECK(amv::cmd_simulate(small("constant", 0.15, 10, 5), scratch("bad-delta"), out, err) == amv::kExitConfig);
    CHECK(err.str().find("delta must be an integer multiple of dt") != std::string::npos);
}

TEST_CASE("simulate: deterministic mean matches the scalar oracle") {
    const fs::path dir = scratch("simulate-detmean");
    std::ostringstream out, err;
    REQUIRE(amv::cmd_simulate(small("deterministic-mean", 0.1, 1000, 2), dir, out, err) == amv::kExitOk);
    const double mean = read_json(dir / "summary.json")["mean"].get<double>();
    CHECK(std::abs(mean - oracle::kDeterministicMeanDelta01) <= 2e-3);
}

TEST_CASE("simulate: solver failures exit with the solver code") {
    std::ostringstream out, err;
    amv::RunConfig cfg = small("lq-anticipating-mean", 0.0, 10, 10);
    cfg.max_iter = 1;
    CHECK(amv::cmd_simulate(cfg, scratch("max-iter"), out, err) == amv::kExitSolver);

    amv::RunConfig div = small("lq-anticipating-mean", 1.0, 10, 10);
    div.problem.params = {{"a", 0.0}, {"abar", 5.0}};
    std::ostringstream err2;
    CHECK(amv::cmd_simulate(div, scratch("divergent"), out, err2) == amv::kExitSolver);
    CHECK(err2.str().find("Picard divergence") != std::string::npos);
}

TEST_CASE("simulate: adjoint artifacts") {
    const fs::path dir = scratch("simulate-adjoint");
    amv::RunConfig cfg = small("lq-anticipating-mean", 0.1, 20, 50);
    cfg.simulate.adjoint = true;
    std::ostringstream out, err;
    REQUIRE(amv::cmd_simulate(cfg, dir, out, err) == amv::kExitOk);
    const auto lines = read_lines(dir / "adjoint.csv");
    CHECK(lines.front() == "particle,t,p,q");
    CHECK(lines.size() == 1 + 50 * 21);
    CHECK(lines[21].back() == ',');  // q is undefined at T
    CHECK(read_json(dir / "adjoint.json")["report"]["converged"].get<bool>());
}

TEST_CASE("optimize: optimal start exits at once") {
    const fs::path dir = scratch("optimize-optimal");
    std::ostringstream out, err;
    CHECK(amv::cmd_optimize(small("constant", 0.0, 10, 50), dir, out, err) == amv::kExitOk);
    CHECK(read_json(dir / "optimality.json")["iterations"].get<int>() <= 1);
    CHECK(read_lines(dir / "trace.csv").front() == "iteration,J,SE,max_grad,step_size");
}

TEST_CASE("optimize: zero-lag LQ control matches Riccati") {
    const fs::path dir = scratch("optimize-lq");
    std::ostringstream out, err;
    REQUIRE(amv::cmd_optimize(small("lq-anticipating-mean", 0.0, 40, 500), dir, out, err) == amv::kExitOk);
    const auto lines = read_lines(dir / "control.csv");
    REQUIRE(lines.size() == 41);
    std::vector<double> u;
    for (std::size_t k = 1; k < lines.size(); ++k) u.push_back(std::stod(lines[k].substr(lines[k].find(',') + 1)));
    CHECK(oracle::rms(u, oracle::riccati_open_loop(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 40)) <= 5e-2);
}

TEST_CASE("optimize: forced failure reports violated cells") {
    const fs::path dir = scratch("optimize-forced");
    amv::RunConfig cfg = small("lq-anticipating-mean", 0.0, 20, 100);
    cfg.optimize.max_outer = 0;
    cfg.optimize.u_init = {2.0};
    std::ostringstream out, err;
    CHECK(amv::cmd_optimize(cfg, dir, out, err) == amv::kExitCheckFailed);
    const json rep = read_json(dir / "optimality.json");
    CHECK_FALSE(rep["passed"].get<bool>());
    CHECK_FALSE(rep["violated_cells"].empty());
}

TEST_CASE("optimize: a line search that only reaches the box corners stalls") {
    amv::RunConfig cfg = small("lq-anticipating-mean", 0.0, 10, 50);
    // 30 halvings of 1e12 still overshoot to the bounds
    cfg.optimize.step0 = 1e12;
    std::ostringstream out, err;
    CHECK(amv::cmd_optimize(cfg, scratch("optimize-stall"), out, err) == amv::kExitStall);
}

TEST_CASE("verify: suite dispatch") {
    std::ostringstream out, err;
    CHECK(amv::cmd_verify(amv::RunConfig{}, "nope", scratch("verify-unknown"), out, err) == amv::kExitConfig);
    for (const auto& name : amv::verify_suites()) CHECK(err.str().find(name) != std::string::npos);

    const fs::path dir = scratch("verify");
    CHECK(amv::cmd_verify(small("constant", 0.0, 10, 5), "wasserstein", dir, out, err) == amv::kExitOk);
    CHECK(read_json(dir / "verify_wasserstein.json")["passed"].get<bool>());

    amv::RunConfig lq = small("lq-anticipating-mean", 1.0 / 7.0, 35, 200);
    CHECK(amv::cmd_verify(lq, "contraction-forward", dir, out, err) == amv::kExitOk);
    lq.delta = 0.0;
    lq.grid.N = 20;
    CHECK(amv::cmd_verify(lq, "duality", dir, out, err) == amv::kExitOk);
    CHECK(read_json(dir / "verify_duality.json")["checks"].size() == 3);
}

TEST_CASE("output directory default") {
    ::setenv("AMV_OUTPUT_DIR", "/tmp/amv-env-out", 1);
    CHECK(amv::default_output_dir() == fs::path("/tmp/amv-env-out"));
    ::unsetenv("AMV_OUTPUT_DIR");
    CHECK(amv::default_output_dir() == fs::path("amv-out"));
}

TEST_CASE("command line entry point") {
    const fs::path dir = scratch("run-cli");
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"problem": {"name": "constant"}, "grid": {"T": 1, "N": 10}, "particles": 4})";
    }
    const std::string config = (dir / "cfg.json").string();
    const std::string out1 = (dir / "a").string(), out2 = (dir / "b").string();
    std::vector<std::string> args1{"amv", "simulate", "--config", config, "--seed", "5", "--out", out1};
    std::vector<std::string> args2{"amv", "simulate", "--config", config, "--set", "seed=5", "--threads", "2",
                                   "--out", out2};
    auto run = [](std::vector<std::string>& args) {
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return amv::run_cli(static_cast<int>(argv.size()), argv.data());
    };
    CHECK(run(args1) == amv::kExitOk);
    CHECK(run(args2) == amv::kExitOk);
    CHECK(read_lines(dir / "a" / "ensemble.csv") == read_lines(dir / "b" / "ensemble.csv"));
    CHECK(read_json(dir / "a" / "ensemble.json")["seed"].get<int>() == 5);

    std::vector<std::string> missing{"amv", "simulate", "--config", (dir / "nope.json").string()};
    CHECK(run(missing) == amv::kExitConfig);
    std::vector<std::string> no_command{"amv"};
    CHECK(run(no_command) == amv::kExitConfig);
}
