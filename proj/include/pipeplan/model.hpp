// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pipeplan {

/// Per-layer measurements taken at a fixed profiling micro-batch size.
/// Times are seconds, sizes are bytes.
struct LayerProfile {
  int index = 0;
  double fwd_time = 0.0;
  double bwd_time = 0.0;
  std::int64_t activation_bytes = 0;  // output activation of this layer
  std::int64_t param_bytes = 0;
};

/// An ordered chain of profiled layers. Layer indices are contiguous from 0.
struct ModelProfile {
  std::vector<LayerProfile> layers;
  int profile_batch_size = 1;

  int layer_count() const { return static_cast<int>(layers.size()); }
  double total_fwd_time() const;
  double total_bwd_time() const;
  void validate() const;
};

/// Cluster topology: servers with `seps[i]` GPUs each, global GPU ids
/// assigned contiguously server by server. Two link classes only.
struct ClusterSpec {
  std::vector<int> seps;
  double intra_bw = 0.0;       // bytes/sec between GPUs on one server
  double inter_bw = 0.0;       // bytes/sec across servers
  double intra_latency = 0.0;  // seconds per transfer
  double inter_latency = 0.0;
  std::int64_t per_gpu_memory = 0;  // bytes

  int gpu_count() const;
  int server_of(int gpu_id) const;
  void validate() const;
};

/// A contiguous layer range [layer_lo, layer_hi) replicated over `devices`.
struct Stage {
  int layer_lo = 0;
  int layer_hi = 0;
  std::vector<int> devices;  // sorted global GPU ids

  int replication() const { return static_cast<int>(devices.size()); }
};

/// A complete parallelization plan: stage partition, placement, injection
/// counts and the latencies attached to it so far.
struct PipelinePlan {
  std::vector<Stage> stages;
  std::vector<int> phi;           // initial injections, one per compute stage
  std::vector<int> phi_expanded;  // per stage of the expanded cost sequence
                                  // (communication stages included); may be
                                  // empty until a scheduler derives it
  int pivot = 0;                  // stage index in the expanded cost sequence
  double est_latency = 0.0;       // seconds
  std::optional<double> sim_latency;

  int compute_stage_count() const { return static_cast<int>(stages.size()); }
  void validate(const ModelProfile& profile, const ClusterSpec& cluster) const;
};

enum class StageKind { compute, communication };

/// Cost entry of one stage in the expanded alternating sequence
/// compute, comm, compute, comm, ... used by the estimator and simulator.
struct StageCost {
  StageKind kind = StageKind::compute;
  double fwd = 0.0;  // seconds per micro-batch
  double bwd = 0.0;
  std::int64_t param_bytes = 0;           // full stage parameters (per replica)
  double allreduce_time = 0.0;            // gradient sync, 0 for comm stages
  std::int64_t activation_out_bytes = 0;  // boundary activation, per micro-batch

  double fwd_bwd() const { return fwd + bwd; }
};

using StageCostSequence = std::vector<StageCost>;

/// Parses and validates a profile JSON document. File times are microseconds
/// and converted to seconds here.
ModelProfile load_profile(std::istream& in);
ModelProfile load_profile_file(const std::string& path);
std::string profile_to_json(const ModelProfile& profile);

/// Parses and validates a cluster JSON document. Bandwidths are GB/s (1e9
/// bytes/sec) in files, latencies microseconds, memory GiB.
ClusterSpec load_cluster(std::istream& in);
ClusterSpec load_cluster_file(const std::string& path);
std::string cluster_to_json(const ClusterSpec& cluster);

/// Sums layer costs over [layer_lo, layer_hi) and applies the perfect-split
/// replication scaling: compute time divides by `replication`, parameter
/// bytes do not (every replica holds the full stage parameters).
StageCost aggregate_stage(const ModelProfile& profile, int layer_lo,
                          int layer_hi, int replication);

}  // namespace pipeplan
