// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeplan/estimator.hpp"

#include <algorithm>
#include <stdexcept>

#include "pipeplan/costmodel.hpp"

namespace pipeplan {

StageCostSequence build_stage_sequence(const PipelinePlan& plan,
                                       const ModelProfile& profile,
                                       const ClusterSpec& cluster) {
  plan.validate(profile, cluster);
  StageCostSequence seq;
  seq.reserve(2 * plan.stages.size() - 1);
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const Stage& stage = plan.stages[s];
    StageCost cost = aggregate_stage(profile, stage.layer_lo, stage.layer_hi,
                                     stage.replication());
    cost.allreduce_time = allreduce_time(cost.param_bytes, stage.devices, cluster);
    seq.push_back(cost);
    if (s + 1 < plan.stages.size()) {
      const double sc = splitconcat_time(cost.activation_out_bytes, stage.devices,
                                         plan.stages[s + 1].devices, cluster);
      StageCost comm;
      comm.kind = StageKind::communication;
      comm.fwd = sc;
      comm.bwd = sc;
      comm.activation_out_bytes = cost.activation_out_bytes;
      seq.push_back(comm);
    }
  }
  return seq;
}

int select_pivot(const StageCostSequence& seq, int micro_batches) {
  if (seq.empty()) throw std::invalid_argument("select_pivot: empty stage sequence");
  if (micro_batches < 1) throw std::invalid_argument("select_pivot: micro-batch count must be >= 1");
  const double m1 = micro_batches - 1;
  int q = static_cast<int>(seq.size()) - 1;
  double between = 0.0;  // sum of F+B over stages strictly between s and q
  for (int s = q - 1; s >= 0; --s) {
    if (m1 * seq[s].fwd_bwd() > m1 * seq[q].fwd_bwd() + between) {
      q = s;
      between = 0.0;
    } else {
      between += seq[s].fwd_bwd();
    }
  }
  return q;
}

LatencyBreakdown estimate_latency(const StageCostSequence& seq, int micro_batches) {
  LatencyBreakdown out;
  out.pivot = select_pivot(seq, micro_batches);
  const int q = out.pivot;
  const int stages = static_cast<int>(seq.size());

  for (int s = 0; s <= q; ++s) out.warmup += seq[s].fwd;
  out.steady = (micro_batches - 1) * seq[q].fwd_bwd();

  std::vector<double> bwd_prefix(stages + 1, 0.0);
  for (int s = 0; s < stages; ++s) bwd_prefix[s + 1] = bwd_prefix[s] + seq[s].bwd;

  // Drain: a stage at or below the pivot still owes the backwards between
  // itself and the pivot; a stage above it finished earlier by the same
  // sums. Every stage then appends its own gradient sync, and the slowest
  // path wins.
  double ending = 0.0;
  bool first = true;
  for (int s = 0; s < stages; ++s) {
    const double signed_bwd = s > q ? -(bwd_prefix[s + 1] - bwd_prefix[q])
                                    : bwd_prefix[q + 1] - bwd_prefix[s];
    const double candidate = seq[s].allreduce_time + signed_bwd;
    if (first || candidate > ending) {
      ending = candidate;
      first = false;
    }
  }
  out.ending = ending;
  out.total = out.warmup + out.steady + out.ending;
  return out;
}

double compute_acr(const StageCostSequence& seq) {
  double comm = 0.0;
  double compute = 0.0;
  int comm_n = 0;
  int compute_n = 0;
  for (const StageCost& c : seq) {
    if (c.kind == StageKind::communication) {
      comm += c.fwd_bwd();
      ++comm_n;
    } else {
      compute += c.fwd_bwd();
      ++compute_n;
    }
  }
  if (compute_n == 0) throw std::invalid_argument("compute_acr: at least one compute stage required");
  if (comm_n == 0) return 0.0;
  const double mean_comm = comm / comm_n;
  const double mean_compute = compute / compute_n;
  return mean_comm / mean_compute;
}

}  // namespace pipeplan
