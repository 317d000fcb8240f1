// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeplan/harness.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "pipeplan/estimator.hpp"
#include "pipeplan/simulator.hpp"

namespace pipeplan {

namespace {

using nlohmann::json;

// splitmix64; decorrelates the per-pair streams from consecutive indices.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d649bb133111ebULL;
  return z ^ (z >> 31);
}

StageCostSequence three_stage_sequence(const std::array<double, 3>& compute,
                                       double fwd_fraction) {
  StageCostSequence seq(3);
  for (int s = 0; s < 3; ++s) {
    seq[s].kind = StageKind::compute;
    seq[s].fwd = compute[s] * fwd_fraction;
    seq[s].bwd = compute[s] * (1.0 - fwd_fraction);
  }
  return seq;
}

std::array<double, 3> random_partition(std::mt19937_64& rng, double total) {
  std::exponential_distribution<double> exp(1.0);
  std::array<double, 3> parts{};
  double sum = 0.0;
  for (double& p : parts) {
    p = exp(rng);
    sum += p;
  }
  for (double& p : parts) p = p / sum * total;
  return parts;
}

int default_workers() {
  if (const char* env = std::getenv("PIPEPLAN_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 8u));
}

StageCostSequence uniform_sequence(int stages, double total_compute, double fwd_fraction) {
  StageCostSequence seq(stages);
  const double per_stage = total_compute / stages;
  for (StageCost& c : seq) {
    c.kind = StageKind::compute;
    c.fwd = per_stage * fwd_fraction;
    c.bwd = per_stage * (1.0 - fwd_fraction);
  }
  return seq;
}

std::vector<int> staircase_phi(int stages, int micro_batches) {
  std::vector<int> phi(stages);
  for (int i = 0; i < stages; ++i) phi[i] = std::min(stages - i, micro_batches);
  return phi;
}

}  // namespace

RankingReport ranking_experiment(long long n_pairs, int micro_batches,
                                 const std::vector<int>& phi, double total_compute,
                                 std::uint64_t seed, double fwd_fraction, int workers) {
  if (n_pairs < 1) throw std::invalid_argument("ranking_experiment: need at least one pair");
  if (phi.size() != 3) throw std::invalid_argument("ranking_experiment: phi must have 3 entries");
  if (total_compute <= 0) throw std::invalid_argument("ranking_experiment: total compute must be > 0");
  if (fwd_fraction <= 0 || fwd_fraction >= 1) {
    throw std::invalid_argument("ranking_experiment: fwd fraction must be in (0, 1)");
  }

  auto errors_in = [&](long long lo, long long hi) {
    long long errors = 0;
    for (long long p = lo; p < hi; ++p) {
      std::mt19937_64 rng(mix(seed ^ mix(static_cast<std::uint64_t>(p))));
      const auto a = random_partition(rng, total_compute);
      const auto b = random_partition(rng, total_compute);
      const StageCostSequence seq_a = three_stage_sequence(a, fwd_fraction);
      const StageCostSequence seq_b = three_stage_sequence(b, fwd_fraction);
      const double est_a = estimate_latency(seq_a, micro_batches).total;
      const double est_b = estimate_latency(seq_b, micro_batches).total;
      const double acc_a = batch_latency(dapple_schedule(seq_a, micro_batches, phi), seq_a);
      const double acc_b = batch_latency(dapple_schedule(seq_b, micro_batches, phi), seq_b);
      if ((acc_a - acc_b) * (est_a - est_b) < 0) ++errors;
    }
    return errors;
  };

  int n_workers = workers >= 1 ? workers : default_workers();
  n_workers = static_cast<int>(std::min<long long>(n_workers, n_pairs));

  long long total_errors = 0;
  if (n_workers <= 1) {
    total_errors = errors_in(0, n_pairs);
  } else {
    std::vector<long long> partial(n_workers, 0);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    const long long chunk = (n_pairs + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
      const long long lo = w * chunk;
      const long long hi = std::min(n_pairs, lo + chunk);
      pool.emplace_back([&, w, lo, hi] { partial[w] = lo < hi ? errors_in(lo, hi) : 0; });
    }
    for (auto& t : pool) t.join();
    for (long long e : partial) total_errors += e;
  }

  RankingReport r;
  r.pairs_tested = n_pairs;
  r.errors = total_errors;
  r.error_rate = static_cast<double>(total_errors) / static_cast<double>(n_pairs);
  r.seed = seed;
  return r;
}

FewerStagesReport insight_fewer_stages(double total_compute, int micro_batches) {
  if (micro_batches < 8 || micro_batches % 8 != 0) {
    throw std::invalid_argument("insight_fewer_stages: micro-batch count must be a positive multiple of 8");
  }
  FewerStagesReport r;
  r.total_compute = total_compute;
  r.m1 = micro_batches;
  r.m2 = micro_batches / 8;

  const double fwd_fraction = 1.0 / 3.0;
  const StageCostSequence straight = uniform_sequence(16, total_compute, fwd_fraction);
  const StageCostSequence two_stage = uniform_sequence(2, total_compute, fwd_fraction);

  r.sim_16stage = batch_latency(
      dapple_schedule(straight, r.m1, staircase_phi(16, r.m1)), straight);
  r.sim_2stage = batch_latency(
      dapple_schedule(two_stage, r.m2, staircase_phi(2, r.m2)), two_stage);
  r.analytical_16stage = total_compute * (r.m2 / 2.0 + 15.0 / 16.0);
  r.analytical_2stage = total_compute * (r.m2 / 2.0 + 0.5);
  return r;
}

UnevenReport insight_uneven(int micro_batches) {
  if (micro_batches < 2) throw std::invalid_argument("insight_uneven: need at least 2 micro-batches");
  UnevenReport r;
  r.micro_batches = micro_batches;

  const double fwd_fraction = 1.0 / 3.0;
  const double total = 21.0;  // makes the 8:7:6 shares integral
  const std::array<double, 3> uneven{8.0, 7.0, 6.0};
  const std::array<double, 3> even{total / 3.0, total / 3.0, total / 3.0};

  const StageCostSequence seq_uneven = three_stage_sequence(uneven, fwd_fraction);
  const StageCostSequence seq_even = three_stage_sequence(even, fwd_fraction);
  const std::vector<int> phi = staircase_phi(3, micro_batches);

  r.dapple_uneven = batch_latency(dapple_schedule(seq_uneven, micro_batches, phi), seq_uneven);
  r.dapple_even = batch_latency(dapple_schedule(seq_even, micro_batches, phi), seq_even);
  r.gpipe_uneven = batch_latency(gpipe_schedule(seq_uneven, micro_batches), seq_uneven);
  r.gpipe_even = batch_latency(gpipe_schedule(seq_even, micro_batches), seq_even);

  r.increasing_condition = true;
  for (int s = 1; s < 3; ++s) {
    const double upper = uneven[s] * micro_batches;
    const double lower = uneven[s] * (micro_batches - 1);
    const double mid = uneven[s - 1] * (micro_batches - 1);
    if (!(lower <= mid && mid <= upper)) r.increasing_condition = false;
  }
  return r;
}

std::vector<ScheduleComparisonRow> gpipe_comparison(const StageCostSequence& seq,
                                                    const std::vector<int>& m_list,
                                                    bool recompute,
                                                    double micro_batch_size) {
  if (m_list.empty()) throw std::invalid_argument("gpipe_comparison: M list must be non-empty");
  const StageCostSequence effective = recompute ? apply_recompute(seq) : seq;
  const int stages = static_cast<int>(effective.size());

  std::vector<ScheduleComparisonRow> rows;
  rows.reserve(m_list.size());
  for (int m : m_list) {
    ScheduleComparisonRow row;
    row.micro_batches = m;

    const Timeline dapple = dapple_schedule(effective, m, staircase_phi(stages, m));
    const Timeline gpipe = gpipe_schedule(effective, m);
    row.dapple_latency = batch_latency(dapple, effective);
    row.gpipe_latency = batch_latency(gpipe, effective);
    row.dapple_throughput = m * micro_batch_size / row.dapple_latency;
    row.gpipe_throughput = m * micro_batch_size / row.gpipe_latency;
    row.dapple_peaks = peak_activations(dapple);
    row.gpipe_peaks = peak_activations(gpipe);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_json(const RankingReport& r) {
  json j{{"pairs_tested", r.pairs_tested},
         {"errors", r.errors},
         {"error_rate", r.error_rate},
         {"seed", r.seed}};
  return j.dump(2);
}

std::string to_json(const FewerStagesReport& r) {
  json j{{"total_compute", r.total_compute},
         {"m1", r.m1},
         {"m2", r.m2},
         {"sim_16stage", r.sim_16stage},
         {"sim_2stage", r.sim_2stage},
         {"analytical_16stage", r.analytical_16stage},
         {"analytical_2stage", r.analytical_2stage}};
  return j.dump(2);
}

std::string to_json(const UnevenReport& r) {
  json j{{"micro_batches", r.micro_batches},
         {"dapple_uneven", r.dapple_uneven},
         {"dapple_even", r.dapple_even},
         {"gpipe_uneven", r.gpipe_uneven},
         {"gpipe_even", r.gpipe_even},
         {"increasing_condition", r.increasing_condition}};
  return j.dump(2);
}

std::string to_json(const std::vector<ScheduleComparisonRow>& rows) {
  json arr = json::array();
  for (const auto& row : rows) {
    arr.push_back({{"micro_batches", row.micro_batches},
                   {"dapple_latency", row.dapple_latency},
                   {"gpipe_latency", row.gpipe_latency},
                   {"dapple_throughput", row.dapple_throughput},
                   {"gpipe_throughput", row.gpipe_throughput},
                   {"dapple_peaks", row.dapple_peaks},
                   {"gpipe_peaks", row.gpipe_peaks}});
  }
  return arr.dump(2);
}

std::string to_text(const RankingReport& r) {
  std::ostringstream os;
  os << "pairs tested : " << r.pairs_tested << "\n"
     << "errors       : " << r.errors << "\n"
     << "error rate   : " << r.error_rate * 100.0 << " %\n"
     << "seed         : " << r.seed << "\n";
  return os.str();
}

std::string to_text(const FewerStagesReport& r) {
  std::ostringstream os;
  os << "pipeline        simulated    analytical\n"
     << "16-stage (m=" << r.m1 << ")  " << r.sim_16stage << "  " << r.analytical_16stage << "\n"
     << "2-stage  (m=" << r.m2 << ")  " << r.sim_2stage << "  " << r.analytical_2stage << "\n";
  return os.str();
}

std::string to_text(const UnevenReport& r) {
  std::ostringstream os;
  os << "partition  dapple     gpipe\n"
     << "8:7:6      " << r.dapple_uneven << "  " << r.gpipe_uneven << "\n"
     << "1:1:1      " << r.dapple_even << "  " << r.gpipe_even << "\n"
     << "increasing-allocation condition: " << (r.increasing_condition ? "holds" : "violated")
     << "\n";
  return os.str();
}

std::string to_text(const std::vector<ScheduleComparisonRow>& rows) {
  std::ostringstream os;
  os << "M     dapple-latency  gpipe-latency  dapple-tput  gpipe-tput  dapple-peaks  gpipe-peaks\n";
  for (const auto& row : rows) {
    os << row.micro_batches << "  " << row.dapple_latency << "  " << row.gpipe_latency << "  "
       << row.dapple_throughput << "  " << row.gpipe_throughput << "  [";
    for (std::size_t i = 0; i < row.dapple_peaks.size(); ++i) {
      os << (i ? "," : "") << row.dapple_peaks[i];
    }
    os << "]  [";
    for (std::size_t i = 0; i < row.gpipe_peaks.size(); ++i) {
      os << (i ? "," : "") << row.gpipe_peaks[i];
    }
    os << "]\n";
  }
  return os.str();
}

void append_ranking_csv(const std::string& path, const RankingReport& r) {
  const bool fresh = [&] {
    std::ifstream probe(path);
    return !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
  }();
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open CSV log: " + path);
  if (fresh) out << "pairs_tested,errors,error_rate,seed\n";
  out << r.pairs_tested << ',' << r.errors << ',' << r.error_rate << ',' << r.seed << "\n";
}

}  // namespace pipeplan
