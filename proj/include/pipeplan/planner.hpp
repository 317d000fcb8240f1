// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "pipeplan/model.hpp"
#include "pipeplan/simulator.hpp"

namespace pipeplan {

/// Allocation context the placement policies act on. GPUs within a server
/// are interchangeable; allocations always take the lowest free ids of a
/// server, so per-server free counts fully describe the state.
struct DeviceState {
  std::vector<int> seps;
  std::vector<int> free;

  explicit DeviceState(const ClusterSpec& cluster)
      : seps(cluster.seps), free(cluster.seps) {}

  int total_free() const;
  bool server_fresh(int server) const { return free[server] == seps[server]; }
  bool server_used(int server) const { return free[server] < seps[server]; }
  /// Takes `count` GPUs from `server` and returns their global ids.
  std::vector<int> allocate(int server, int count);
};

/// Candidate device sets for a stage of `gpu_count` GPUs, one per placement
/// policy, deduplicated:
///   fresh-first   fills whole unused servers first
///   append-first  fills partially-used servers first
///   scatter-first spreads evenly over used servers (or all, when all fresh)
std::vector<std::vector<int>> enumerate_placements(const DeviceState& state,
                                                   int gpu_count);

/// Memory check for one stage replica: optimizer state for the full stage
/// parameters plus `injected` in-flight micro-batch activations must fit.
/// The working set per micro-batch is the stage's boundary activation.
bool memory_feasible(const StageCost& stage, int injected, std::int64_t capacity,
                     double optimizer_multiplier = 8.0);

struct PlannerOptions {
  PhiStrategy phi_strategy = PhiStrategy::preset_a;
  double optimizer_multiplier = 8.0;
  int top_k = 8;  // candidates re-scored with the simulator
};

/// One search candidate with both scores, for reporting.
struct RankedPlan {
  PipelinePlan plan;
  double est_latency = 0.0;
  double sim_latency = 0.0;
};

struct SearchReport {
  std::vector<RankedPlan> top;
  long long states_evaluated = 0;
};

/// Finds the stage partition, replication and placement minimizing the
/// estimated latency of one global batch of M micro-batches. Candidates are
/// scored with the closed-form estimator; the returned plan additionally
/// carries the injection vector and the simulated latency. Ties prefer fewer
/// stages, then lexicographically smaller split points.
PipelinePlan plan(const ModelProfile& profile, const ClusterSpec& cluster,
                  int micro_batches, const PlannerOptions& opts = {},
                  SearchReport* report = nullptr);

/// Exhaustive oracle over every split vector and every disjoint device
/// assignment (not just the policies); limited to N <= 8 layers and
/// G <= 4 GPUs. Uses the same latency evaluation as plan().
PipelinePlan brute_force_plan(const ModelProfile& profile, const ClusterSpec& cluster,
                              int micro_batches, const PlannerOptions& opts = {});

/// Rebuilds a plan's cost sequence and simulates it end to end. This is the
/// code path both the planner and the CLI use to attach sim_latency, so a
/// written plan re-simulates to the identical number.
struct PlanSimulation {
  StageCostSequence seq;
  Timeline timeline;
  double latency = 0.0;
};

PlanSimulation simulate_plan(const PipelinePlan& plan, const ModelProfile& profile,
                             const ClusterSpec& cluster, int micro_batches,
                             ScheduleKind kind = ScheduleKind::dapple,
                             bool recompute = false);

}  // namespace pipeplan
