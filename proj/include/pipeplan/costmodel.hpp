// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "pipeplan/model.hpp"

namespace pipeplan {

/// The physical link class used by a GPU pair.
struct LinkClass {
  enum class Kind { intra_server, inter_server };
  Kind kind = Kind::intra_server;
  double bandwidth = 0.0;  // bytes/sec
  double latency = 0.0;    // seconds
};

LinkClass link_between(const ClusterSpec& cluster, int gpu_a, int gpu_b);

/// Ring AllReduce cost: 2*(r-1)/r * size / bw + 2*(r-1) * latency over the
/// bottleneck link class. Returns 0 for a single device; gradient sync is
/// only needed for replicated stages.
double allreduce_time(std::int64_t size_bytes, const std::vector<int>& devices,
                      const ClusterSpec& cluster);

/// Boundary activation transfer between adjacent stages. The payload is
/// split into |src|*|dst| even flows and the transfer is bounded by the
/// slowest flow. Zero-byte transfers between distinct devices still pay the
/// link latency; a flow that stays on one device is free.
double splitconcat_time(std::int64_t size_bytes, const std::vector<int>& src,
                        const std::vector<int>& dst, const ClusterSpec& cluster);

}  // namespace pipeplan
