// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pipeplan/model.hpp"

namespace pipeplan {

enum class BlockKind { forward, backward };

/// One scheduled forward or backward execution of a micro-batch on a stage.
struct Block {
  int stage = 0;
  int micro_batch = 0;
  BlockKind kind = BlockKind::forward;
  double start = 0.0;
  double end = 0.0;
};

/// The complete schedule of M micro-batches over S stages: one forward and
/// one backward block per (micro-batch, stage) pair.
struct Timeline {
  int micro_batches = 0;  // M
  int stage_count = 0;    // S
  std::vector<int> phi;   // injection vector the schedule was built with
  std::vector<Block> blocks;

  const Block& forward(int micro_batch, int stage) const;
  const Block& backward(int micro_batch, int stage) const;
  Block& forward(int micro_batch, int stage);
  Block& backward(int micro_batch, int stage);
};

enum class ScheduleKind { dapple, gpipe };

/// One-forward-one-backward schedule with early backward execution. Block
/// times are the exact fixpoint of
///   f[i,x].s = max(b[i-phi[x],x].e, f[i-1,x].e, f[i,x-1].e)
///   b[i,x].s = max(f[i+phi[x]-1,x].e, b[i-1,x].e, b[i,x+1].e)
/// with out-of-range constraints dropped. phi must be non-increasing with
/// phi[S-1] == 1 and 1 <= phi[x] <= M; this guarantees the dependency graph
/// is acyclic.
Timeline dapple_schedule(const StageCostSequence& seq, int micro_batches,
                         const std::vector<int>& phi);

/// Baseline that injects all micro-batches at once: on every stage all
/// forwards run before any backward.
Timeline gpipe_schedule(const StageCostSequence& seq, int micro_batches);

/// Wall time of one global batch: the slowest stage's last backward end plus
/// that stage's AllReduce.
double batch_latency(const Timeline& timeline, const StageCostSequence& seq);

/// Per-stage maximum number of micro-batches whose forward output is alive,
/// i.e. produced but not yet consumed by the matching backward.
std::vector<int> peak_activations(const Timeline& timeline);

enum class PhiStrategy { preset_a, preset_b, search };

struct PhiResult {
  std::vector<int> phi;
  double latency = 0.0;  // simulated batch latency under phi
};

/// Chooses the injection vector for a stage sequence. The presets are
///   A: phi[i] = min(S - i, D, M)
///   B: phi[i] = min(2*(S - i) - 1, D, M)
/// and `search` simulates every valid non-increasing vector bounded by
/// preset B, returning the fastest (ties prefer fewer injections).
/// `max_injection` is the memory-feasible cap D.
PhiResult optimize_phi(const StageCostSequence& seq, int micro_batches,
                       PhiStrategy strategy, int max_injection);

/// Expands a per-compute-stage injection vector over an alternating
/// compute/communication sequence: the communication stage between compute
/// stages k and k+1 inherits the injection count of stage k+1.
std::vector<int> expand_plan_phi(const std::vector<int>& compute_phi);

/// Re-computation cost model: discarded activations are recomputed during
/// backward, inflating every stage's backward time by its forward time.
StageCostSequence apply_recompute(StageCostSequence seq);

}  // namespace pipeplan
