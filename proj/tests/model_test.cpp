// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "pipeplan/model.hpp"

using namespace pipeplan;

namespace {

ModelProfile profile_from(const std::string& text) {
  std::istringstream in(text);
  return load_profile(in);
}

ClusterSpec cluster_from(const std::string& text) {
  std::istringstream in(text);
  return load_cluster(in);
}

ModelProfile random_profile(std::mt19937_64& rng, int layers) {
  std::uniform_real_distribution<double> time_us(1.0, 5000.0);
  std::uniform_int_distribution<std::int64_t> bytes(0, 1 << 30);
  ModelProfile p;
  p.profile_batch_size = 8;
  for (int i = 0; i < layers; ++i) {
    LayerProfile l;
    l.index = i;
    l.fwd_time = time_us(rng) * 1e-6;
    l.bwd_time = time_us(rng) * 1e-6;
    l.activation_bytes = bytes(rng);
    l.param_bytes = bytes(rng);
    p.layers.push_back(l);
  }
  return p;
}

}  // namespace

TEST_CASE("profile loading round-trips the input") {
  const auto p = profile_from(R"({
    "profile_batch_size": 4,
    "layers": [
      {"fwd_time_us": 1000, "bwd_time_us": 2000, "activation_bytes": 10, "param_bytes": 20},
      {"fwd_time_us": 2000, "bwd_time_us": 4000, "activation_bytes": 30, "param_bytes": 40}
    ]
  })");
  CHECK(p.layer_count() == 2);
  CHECK(p.profile_batch_size == 4);
  CHECK(p.layers[0].fwd_time == doctest::Approx(1e-3));
  CHECK(p.layers[1].fwd_time == doctest::Approx(2e-3));
  CHECK(p.layers[1].bwd_time == doctest::Approx(4e-3));
  CHECK(p.layers[1].index == 1);
  CHECK(p.layers[0].activation_bytes == 10);
  CHECK(p.layers[1].param_bytes == 40);
}

TEST_CASE("profile validation rejects bad inputs") {
  CHECK_THROWS_WITH_AS(profile_from(R"({"profile_batch_size": 1, "layers": [
      {"fwd_time_us": 1, "bwd_time_us": -2, "activation_bytes": 0, "param_bytes": 0}]})"),
                       doctest::Contains("bwd_time"), std::runtime_error);
  CHECK_THROWS_WITH_AS(profile_from(R"({"profile_batch_size": 1, "layers": []})"),
                       doctest::Contains("N >= 1"), std::runtime_error);
  CHECK_THROWS_AS(profile_from("{not json"), std::runtime_error);
  CHECK_THROWS_AS(profile_from(R"({"layers": [{"fwd_time_us": 1}]})"), std::runtime_error);
}

TEST_CASE("profile serialization is inverted by the loader") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 20; ++round) {
    const ModelProfile p = random_profile(rng, 1 + round % 9);
    const ModelProfile q = profile_from(profile_to_json(p));
    REQUIRE(q.layer_count() == p.layer_count());
    CHECK(q.profile_batch_size == p.profile_batch_size);
    for (int i = 0; i < p.layer_count(); ++i) {
      CHECK(q.layers[i].fwd_time == doctest::Approx(p.layers[i].fwd_time).epsilon(1e-12));
      CHECK(q.layers[i].bwd_time == doctest::Approx(p.layers[i].bwd_time).epsilon(1e-12));
      CHECK(q.layers[i].activation_bytes == p.layers[i].activation_bytes);
      CHECK(q.layers[i].param_bytes == p.layers[i].param_bytes);
    }
  }
}

TEST_CASE("cluster loading converts units") {
  const auto c = cluster_from(R"({
    "seps": [8, 8],
    "intra_bw_gbps": 100,
    "inter_bw_gbps": 3.125,
    "intra_latency_us": 2,
    "inter_latency_us": 10,
    "per_gpu_memory_gb": 16
  })");
  CHECK(c.gpu_count() == 16);
  CHECK(c.intra_bw == doctest::Approx(100e9));
  CHECK(c.inter_bw == doctest::Approx(3.125e9));
  CHECK(c.intra_latency == doctest::Approx(2e-6));
  CHECK(c.inter_latency == doctest::Approx(10e-6));
  CHECK(c.per_gpu_memory == std::int64_t{16} * 1024 * 1024 * 1024);
  CHECK(c.server_of(0) == 0);
  CHECK(c.server_of(7) == 0);
  CHECK(c.server_of(8) == 1);
  CHECK(c.server_of(15) == 1);
  CHECK_THROWS_AS(c.server_of(16), std::out_of_range);

  const ClusterSpec back = cluster_from(cluster_to_json(c));
  CHECK(back.seps == c.seps);
  CHECK(back.inter_bw == doctest::Approx(c.inter_bw));
}

TEST_CASE("cluster validation rejects bad inputs") {
  CHECK_THROWS_AS(cluster_from(R"({"seps": [], "intra_bw_gbps": 1, "inter_bw_gbps": 1,
    "intra_latency_us": 0, "inter_latency_us": 0, "per_gpu_memory_gb": 1})"),
                  std::runtime_error);
  CHECK_THROWS_AS(cluster_from(R"({"seps": [2], "intra_bw_gbps": 0, "inter_bw_gbps": 1,
    "intra_latency_us": 0, "inter_latency_us": 0, "per_gpu_memory_gb": 1})"),
                  std::runtime_error);
}

TEST_CASE("aggregate_stage sums a range") {
  ModelProfile p;
  p.layers = {{0, 1.0, 2.0, 100, 10}, {1, 3.0, 6.0, 200, 30}};

  SUBCASE("plain summation") {
    const StageCost c = aggregate_stage(p, 0, 2, 1);
    CHECK(c.fwd == 4.0);
    CHECK(c.bwd == 8.0);
    CHECK(c.param_bytes == 40);
    CHECK(c.activation_out_bytes == 200);
    CHECK(c.allreduce_time == 0.0);
    CHECK(c.kind == StageKind::compute);
  }
  SUBCASE("replication divides compute, not parameters") {
    const StageCost c = aggregate_stage(p, 0, 2, 2);
    CHECK(c.fwd == 2.0);
    CHECK(c.bwd == 4.0);
    CHECK(c.param_bytes == 40);
    CHECK(c.activation_out_bytes == 200);
  }
  SUBCASE("single layer is the identity") {
    const StageCost c = aggregate_stage(p, 0, 1, 1);
    CHECK(c.fwd == p.layers[0].fwd_time);
    CHECK(c.bwd == p.layers[0].bwd_time);
    CHECK(c.param_bytes == p.layers[0].param_bytes);
    CHECK(c.activation_out_bytes == p.layers[0].activation_bytes);
  }
  SUBCASE("bad ranges and replication throw") {
    CHECK_THROWS_AS(aggregate_stage(p, 0, 0, 1), std::out_of_range);
    CHECK_THROWS_AS(aggregate_stage(p, 1, 3, 1), std::out_of_range);
    CHECK_THROWS_AS(aggregate_stage(p, 0, 1, 0), std::invalid_argument);
  }
}

TEST_CASE("aggregate_stage is additive and scales exactly with replication") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 50; ++round) {
    const ModelProfile p = random_profile(rng, 3 + static_cast<int>(rng() % 7));
    const int n = p.layer_count();
    const int a = static_cast<int>(rng() % (n - 1));
    const int b = a + 1 + static_cast<int>(rng() % (n - a - 1));
    const int c = b + static_cast<int>(rng() % (n - b)) + 1;

    const StageCost whole = aggregate_stage(p, a, c, 1);
    const StageCost left = aggregate_stage(p, a, b, 1);
    const StageCost right = aggregate_stage(p, b, c, 1);
    CHECK(whole.fwd == doctest::Approx(left.fwd + right.fwd).epsilon(1e-12));
    CHECK(whole.bwd == doctest::Approx(left.bwd + right.bwd).epsilon(1e-12));
    CHECK(whole.param_bytes == left.param_bytes + right.param_bytes);
    CHECK(whole.activation_out_bytes == right.activation_out_bytes);

    const int r = 1 + static_cast<int>(rng() % 8);
    const StageCost replicated = aggregate_stage(p, a, c, r);
    CHECK(replicated.fwd == whole.fwd / r);  // exact division by construction
    CHECK(replicated.bwd == whole.bwd / r);
    CHECK(replicated.param_bytes == whole.param_bytes);
  }
}
