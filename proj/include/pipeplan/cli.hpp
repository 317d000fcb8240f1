// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pipeplan/simulator.hpp"

namespace pipeplan {

/// Everything a subcommand run needs, resolved from the command line.
/// M is derived from the global batch size and the micro-batch size unless
/// --micro-batches sets it directly.
struct RunConfig {
  std::string subcommand;
  std::string profile_path;
  std::string cluster_path;
  std::string plan_path;
  long long global_batch_size = 0;
  long long micro_batch_size = 0;
  int micro_batches = 0;  // 0 = derive from the two sizes above
  std::vector<int> phi;
  PhiStrategy policy = PhiStrategy::preset_a;
  ScheduleKind schedule = ScheduleKind::dapple;
  bool recompute = false;
  std::uint64_t seed = 42;
  std::string output;  // "-" streams to stdout
  std::string svg_output;
  std::string format;  // json | text | csv | svg
  double us_per_px = 0.0;
  long long pairs = 100000;
  double total_compute = 1.0;
  double max_error_rate = 0.001;
  std::string csv_log;
  double optimizer_multiplier = 8.0;

  /// Micro-batch count for this run; validates divisibility.
  int resolve_micro_batches() const;
};

/// Parses arguments and runs the selected subcommand. Returns the process
/// exit status; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pipeplan
