// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeplan/costmodel.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace pipeplan {

namespace {

void check_devices(const std::vector<int>& devices, const ClusterSpec& cluster,
                   const char* what) {
  if (devices.empty()) throw std::invalid_argument(std::string(what) + ": device set must be non-empty");
  const int gpus = cluster.gpu_count();
  for (int d : devices) {
    if (d < 0 || d >= gpus) {
      throw std::out_of_range(std::string(what) + ": unknown device id " + std::to_string(d));
    }
  }
}

bool spans_servers(const std::vector<int>& devices, const ClusterSpec& cluster) {
  const int first = cluster.server_of(devices.front());
  return std::any_of(devices.begin(), devices.end(),
                     [&](int d) { return cluster.server_of(d) != first; });
}

}  // namespace

LinkClass link_between(const ClusterSpec& cluster, int gpu_a, int gpu_b) {
  if (cluster.server_of(gpu_a) == cluster.server_of(gpu_b)) {
    return {LinkClass::Kind::intra_server, cluster.intra_bw, cluster.intra_latency};
  }
  return {LinkClass::Kind::inter_server, cluster.inter_bw, cluster.inter_latency};
}

double allreduce_time(std::int64_t size_bytes, const std::vector<int>& devices,
                      const ClusterSpec& cluster) {
  check_devices(devices, cluster, "allreduce_time");
  const auto r = static_cast<double>(devices.size());
  if (devices.size() == 1) return 0.0;
  const bool inter = spans_servers(devices, cluster);
  const double bw = inter ? cluster.inter_bw : cluster.intra_bw;
  const double latency = inter ? cluster.inter_latency : cluster.intra_latency;
  return 2.0 * (r - 1.0) / r * static_cast<double>(size_bytes) / bw + 2.0 * (r - 1.0) * latency;
}

double splitconcat_time(std::int64_t size_bytes, const std::vector<int>& src,
                        const std::vector<int>& dst, const ClusterSpec& cluster) {
  check_devices(src, cluster, "splitconcat_time");
  check_devices(dst, cluster, "splitconcat_time");
  const std::set<int> src_set(src.begin(), src.end());
  const std::set<int> dst_set(dst.begin(), dst.end());
  if (src_set == dst_set) return 0.0;  // slices already in place

  const double flows = static_cast<double>(src_set.size()) * static_cast<double>(dst_set.size());
  const double flow_bytes = static_cast<double>(size_bytes) / flows;
  double worst = 0.0;
  for (int a : src_set) {
    for (int b : dst_set) {
      if (a == b) continue;  // no link crossed
      const LinkClass link = link_between(cluster, a, b);
      worst = std::max(worst, flow_bytes / link.bandwidth + link.latency);
    }
  }
  return worst;
}

}  // namespace pipeplan
