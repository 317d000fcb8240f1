// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "pipeplan/cli.hpp"
#include "pipeplan/io.hpp"

using namespace pipeplan;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = 0;
  std::string out;
  std::string err;
};

RunResult run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"pipeplan"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  RunResult r;
  r.status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "pipeplan_cli_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream f(p);
    f << content;
    return p.string();
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

const char* kProfile = R"({
  "profile_batch_size": 8,
  "layers": [
    {"fwd_time_us": 1000, "bwd_time_us": 2000, "activation_bytes": 4194304, "param_bytes": 8388608},
    {"fwd_time_us": 1100, "bwd_time_us": 2200, "activation_bytes": 4194304, "param_bytes": 8388608},
    {"fwd_time_us": 900,  "bwd_time_us": 1800, "activation_bytes": 2097152, "param_bytes": 8388608},
    {"fwd_time_us": 1000, "bwd_time_us": 2000, "activation_bytes": 2097152, "param_bytes": 8388608}
  ]
})";

const char* kCluster = R"({
  "seps": [2, 2],
  "intra_bw_gbps": 80,
  "inter_bw_gbps": 8,
  "intra_latency_us": 1,
  "inter_latency_us": 10,
  "per_gpu_memory_gb": 16
})";

}  // namespace

TEST_CASE("plan subcommand writes a plan and a summary") {
  TempDir tmp;
  const auto profile = tmp.file("profile.json", kProfile);
  const auto cluster = tmp.file("cluster.json", kCluster);
  const auto plan_path = tmp.file("plan.json");

  const RunResult r = run({"plan", "--profile", profile, "--cluster", cluster,
                           "--gbs", "64", "--micro-batch-size", "8",
                           "--output", plan_path});
  CAPTURE(r.err);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("stages") != std::string::npos);
  CHECK(r.out.find("speedup") != std::string::npos);

  const PipelinePlan plan = load_plan_file(plan_path);
  CHECK(!plan.stages.empty());
  CHECK(plan.sim_latency.has_value());
}

TEST_CASE("missing input files fail with the path in the message") {
  TempDir tmp;
  const auto cluster = tmp.file("cluster.json", kCluster);
  const RunResult r = run({"plan", "--profile", (tmp.path / "nope.json").string(),
                           "--cluster", cluster, "--micro-batches", "4"});
  CHECK(r.status != 0);
  CHECK(r.err.find("nope.json") != std::string::npos);
}

TEST_CASE("simulate reproduces the latency recorded in the plan") {
  TempDir tmp;
  const auto profile = tmp.file("profile.json", kProfile);
  const auto cluster = tmp.file("cluster.json", kCluster);
  const auto plan_path = tmp.file("plan.json");

  REQUIRE(run({"plan", "--profile", profile, "--cluster", cluster, "--micro-batches", "8",
               "--output", plan_path, "--format", "json"})
              .status == 0);
  const PipelinePlan plan = load_plan_file(plan_path);
  REQUIRE(plan.sim_latency.has_value());

  const auto csv_path = tmp.file("timeline.csv");
  const RunResult r = run({"simulate", "--profile", profile, "--cluster", cluster,
                           "--plan", plan_path, "--micro-batches", "8",
                           "--output", csv_path});
  CAPTURE(r.err);
  REQUIRE(r.status == 0);

  std::ostringstream want;
  want << "batch latency   : " << *plan.sim_latency * 1e6 << " us";
  CHECK(r.out.find(want.str()) != std::string::npos);

  std::ifstream csv(csv_path);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "stage,micro_batch,kind,start_us,end_us");
}

TEST_CASE("simulate honors the schedule and phi flags") {
  TempDir tmp;
  const auto profile = tmp.file("profile.json", kProfile);
  const auto cluster = tmp.file("cluster.json", kCluster);
  const auto plan_path = tmp.file("plan.json");
  REQUIRE(run({"plan", "--profile", profile, "--cluster", cluster, "--micro-batches", "6",
               "--output", plan_path, "--format", "json"})
              .status == 0);

  SUBCASE("gpipe peaks grow to M") {
    const RunResult r = run({"simulate", "--profile", profile, "--cluster", cluster,
                             "--plan", plan_path, "--micro-batches", "6",
                             "--schedule", "gpipe"});
    REQUIRE(r.status == 0);
    CHECK(r.out.find("schedule        : gpipe") != std::string::npos);
    CHECK(r.out.find("stage0=6") != std::string::npos);
  }
  SUBCASE("phi override is echoed") {
    const PipelinePlan plan = load_plan_file(plan_path);
    std::string phi_flag;
    for (int k = 0; k < plan.compute_stage_count(); ++k) {
      phi_flag += (k ? "," : "");
      phi_flag += "1";
    }
    const RunResult r = run({"simulate", "--profile", profile, "--cluster", cluster,
                             "--plan", plan_path, "--micro-batches", "6", "--phi", phi_flag});
    REQUIRE(r.status == 0);
    CHECK(r.out.find("phi             : [1") != std::string::npos);
  }
}

TEST_CASE("gantt emits an SVG") {
  TempDir tmp;
  const auto profile = tmp.file("profile.json", kProfile);
  const auto cluster = tmp.file("cluster.json", kCluster);
  const RunResult r = run({"gantt", "--profile", profile, "--cluster", cluster,
                           "--micro-batches", "4", "--output", "-"});
  CAPTURE(r.err);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("<svg") != std::string::npos);
  CHECK(r.out.find("allreduce") != std::string::npos);
}

TEST_CASE("estimate prints the phase breakdown") {
  TempDir tmp;
  const auto profile = tmp.file("profile.json", kProfile);
  const auto cluster = tmp.file("cluster.json", kCluster);
  const auto plan_path = tmp.file("plan.json");
  REQUIRE(run({"plan", "--profile", profile, "--cluster", cluster, "--micro-batches", "8",
               "--output", plan_path, "--format", "json"})
              .status == 0);
  const RunResult r = run({"estimate", "--profile", profile, "--cluster", cluster,
                           "--plan", plan_path, "--micro-batches", "8"});
  REQUIRE(r.status == 0);
  CHECK(r.out.find("warmup") != std::string::npos);
  CHECK(r.out.find("steady") != std::string::npos);
  CHECK(r.out.find("ending") != std::string::npos);
  CHECK(r.out.find("ACR") != std::string::npos);
}

TEST_CASE("validate runs the ranking experiment") {
  SUBCASE("default thresholds pass") {
    const RunResult r = run({"validate", "--pairs", "3000", "--seed", "42"});
    CAPTURE(r.err);
    CHECK(r.status == 0);
    CHECK(r.out.find("error rate") != std::string::npos);
  }
  SUBCASE("zero pairs is an argument error") {
    const RunResult r = run({"validate", "--pairs", "0"});
    CHECK(r.status != 0);
  }
  SUBCASE("fixed seeds give byte-identical reports") {
    const RunResult a = run({"validate", "--pairs", "2000", "--seed", "7", "--format", "json"});
    const RunResult b = run({"validate", "--pairs", "2000", "--seed", "7", "--format", "json"});
    CHECK(a.out == b.out);
    CHECK(a.status == b.status);
  }
  SUBCASE("an impossible threshold fails the run") {
    const RunResult r = run({"validate", "--pairs", "2000", "--seed", "11",
                             "--max-error-rate", "-1"});
    CHECK(r.status == 1);
  }
}

TEST_CASE("divisibility of the global batch size is enforced") {
  TempDir tmp;
  const auto profile = tmp.file("profile.json", kProfile);
  const auto cluster = tmp.file("cluster.json", kCluster);
  const RunResult r = run({"plan", "--profile", profile, "--cluster", cluster,
                           "--gbs", "10", "--micro-batch-size", "4"});
  CHECK(r.status != 0);
  CHECK(r.err.find("divisible") != std::string::npos);
}
