// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pipeplan/model.hpp"

namespace pipeplan {

/// Batch latency decomposed into the three phases of a synchronous pipeline
/// iteration. total = warmup + steady + ending and
/// steady = (M-1) * (F_pivot + B_pivot).
struct LatencyBreakdown {
  double warmup = 0.0;
  double steady = 0.0;
  double ending = 0.0;
  double total = 0.0;
  int pivot = 0;
};

/// Expands a plan into the alternating compute/communication cost sequence:
/// each compute stage carries its gradient AllReduce time, and every stage
/// boundary becomes a communication stage whose forward and backward costs
/// both equal the split-concat transfer of the boundary activation.
StageCostSequence build_stage_sequence(const PipelinePlan& plan,
                                       const ModelProfile& profile,
                                       const ClusterSpec& cluster);

/// Picks the pivot stage anchoring the steady phase. Starting from the top,
/// a lower stage takes over when its own steady phase strictly dominates the
/// current pivot's steady phase plus the forward/backward costs in between.
/// Ties keep the higher stage index.
int select_pivot(const StageCostSequence& seq, int micro_batches);

/// Closed-form batch latency: forwards up to the pivot, M-1 pivot rounds,
/// then the slowest drain-plus-AllReduce path over all stages.
LatencyBreakdown estimate_latency(const StageCostSequence& seq, int micro_batches);

/// Activation communication ratio: mean communication-stage cost over mean
/// compute-stage cost (forward+backward each). 0 when nothing communicates.
double compute_acr(const StageCostSequence& seq);

}  // namespace pipeplan
