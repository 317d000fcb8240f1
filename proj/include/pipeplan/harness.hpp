// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pipeplan/model.hpp"

namespace pipeplan {

/// Outcome of the estimator-vs-simulator ranking fidelity experiment.
struct RankingReport {
  long long pairs_tested = 0;
  long long errors = 0;  // pairs ranked in opposite order by the two methods
  double error_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Draws pairs of random 3-stage partitions of `total_compute` (uniform on
/// the simplex), scores both sides with the estimator and the exact
/// schedule, and counts the pairs whose ordering disagrees. Deterministic
/// for a given seed and independent of the worker count; `workers` 0 means
/// use PIPEPLAN_THREADS or the hardware default.
RankingReport ranking_experiment(long long n_pairs, int micro_batches,
                                 const std::vector<int>& phi, double total_compute,
                                 std::uint64_t seed, double fwd_fraction = 1.0 / 3.0,
                                 int workers = 0);

/// Latencies of two even partitions of the same model at matched work per
/// device: a 16-stage straight pipeline fed M micro-batches against a
/// 2-stage pipeline with 8-way stage replication fed M/8. The closed forms
/// are C*(m2/2 + 15/16) and C*(m2/2 + 1/2).
struct FewerStagesReport {
  double total_compute = 0.0;
  int m1 = 0;  // micro-batches through the 16-stage pipeline
  int m2 = 0;  // micro-batches through the 2-stage pipeline (m1/8)
  double sim_16stage = 0.0;
  double sim_2stage = 0.0;
  double analytical_16stage = 0.0;
  double analytical_2stage = 0.0;
};

FewerStagesReport insight_fewer_stages(double total_compute, int micro_batches);

/// Simulates a 3-stage pipeline partitioned 8:7:6 (largest stage at the
/// bottom) against an even 1:1:1 split of the same total compute, under both
/// schedules. Also reports whether the uneven split satisfies
/// C_s*(M-1) <= C_{s-1}*(M-1) <= C_s*M for each adjacent pair.
struct UnevenReport {
  int micro_batches = 0;
  double dapple_uneven = 0.0;
  double dapple_even = 0.0;
  double gpipe_uneven = 0.0;
  double gpipe_even = 0.0;
  bool increasing_condition = false;
};

UnevenReport insight_uneven(int micro_batches);

/// One row of the schedule comparison table.
struct ScheduleComparisonRow {
  int micro_batches = 0;
  double dapple_latency = 0.0;
  double gpipe_latency = 0.0;
  double dapple_throughput = 0.0;  // samples/sec proxy
  double gpipe_throughput = 0.0;
  std::vector<int> dapple_peaks;  // live micro-batches per stage
  std::vector<int> gpipe_peaks;
};

/// Simulates both schedules over the given stage sequence for each M.
/// With `recompute` the backward times are inflated by the forward times
/// before scheduling.
std::vector<ScheduleComparisonRow> gpipe_comparison(const StageCostSequence& seq,
                                                    const std::vector<int>& m_list,
                                                    bool recompute,
                                                    double micro_batch_size = 1.0);

// Report rendering: machine-readable JSON and aligned-column text.
std::string to_json(const RankingReport& r);
std::string to_json(const FewerStagesReport& r);
std::string to_json(const UnevenReport& r);
std::string to_json(const std::vector<ScheduleComparisonRow>& rows);
std::string to_text(const RankingReport& r);
std::string to_text(const FewerStagesReport& r);
std::string to_text(const UnevenReport& r);
std::string to_text(const std::vector<ScheduleComparisonRow>& rows);

/// Appends one line per report to a CSV log (header written when the file
/// is new or empty).
void append_ranking_csv(const std::string& path, const RankingReport& r);

}  // namespace pipeplan
