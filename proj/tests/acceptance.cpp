// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the exit status is the number of failed criteria.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pipeplan/estimator.hpp"
#include "pipeplan/harness.hpp"
#include "pipeplan/planner.hpp"
#include "pipeplan/simulator.hpp"
#include "test_support.hpp"

using namespace pipeplan;
using namespace pipeplan::testing;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

template <typename Fn>
void criterion(int id, const std::string& name, Fn&& fn) {
  try {
    std::string detail;
    const bool ok = fn(detail);
    report(id, name, ok, detail);
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0});
}

// --- criterion 6 support ------------------------------------------------

bool policy_expressible(const PipelinePlan& target, const ClusterSpec& cluster) {
  const int stages = target.compute_stage_count();
  std::vector<std::vector<int>> want;
  for (const Stage& s : target.stages) {
    std::vector<int> counts(cluster.seps.size(), 0);
    for (int d : s.devices) ++counts[cluster.server_of(d)];
    want.push_back(std::move(counts));
  }
  DeviceState state{cluster};
  for (int k = 0; k < stages; ++k) {
    const int m = target.stages[k].replication();
    if (k == stages - 1) return state.total_free() == m;
    bool matched = false;
    for (const auto& devices : enumerate_placements(state, m)) {
      std::vector<int> counts(cluster.seps.size(), 0);
      for (int d : devices) ++counts[cluster.server_of(d)];
      if (counts == want[k]) {
        matched = true;
        for (std::size_t s = 0; s < counts.size(); ++s) state.free[s] -= counts[s];
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

ClusterSpec make_cluster(std::vector<int> seps, double intra_bw, double inter_bw,
                         double intra_lat, double inter_lat) {
  ClusterSpec c;
  c.seps = std::move(seps);
  c.intra_bw = intra_bw;
  c.inter_bw = inter_bw;
  c.intra_latency = intra_lat;
  c.inter_latency = inter_lat;
  c.per_gpu_memory = std::int64_t{16} << 30;
  return c;
}

// --- criterion 7 profiles -----------------------------------------------

// Convolution-style body with a parameter-heavy classifier tail: most of the
// parameters sit in the last layer while activations shrink front to back.
ModelProfile vgg_like_profile() {
  ModelProfile p;
  const double fwd_us[8] = {8000, 8000, 8000, 8000, 8000, 8000, 8000, 2000};
  const std::int64_t act_mb[8] = {64, 48, 32, 24, 16, 8, 3, 1};
  const std::int64_t param_mb[8] = {4, 4, 4, 4, 4, 4, 4, 400};
  for (int i = 0; i < 8; ++i) {
    p.layers.push_back({i, fwd_us[i] * 1e-6, 2 * fwd_us[i] * 1e-6,
                        act_mb[i] << 20, param_mb[i] << 20});
  }
  return p;
}

// Uniform transformer-style blocks: equal compute and parameters per layer,
// small boundary activations.
ModelProfile bert_like_profile() {
  ModelProfile p;
  for (int i = 0; i < 16; ++i) {
    p.layers.push_back({i, 3000e-6, 6000e-6, std::int64_t{4} << 20, std::int64_t{60} << 20});
  }
  return p;
}

}  // namespace

int main() {
  criterion(1, "ranking fidelity at 100k pairs", [](std::string& detail) {
    const RankingReport r = ranking_experiment(100000, 16, {5, 3, 1}, 1.0, 42);
    std::ostringstream os;
    os << r.errors << " errors in " << r.pairs_tested << " pairs (rate "
       << r.error_rate * 100.0 << "%, bound 0.1%)";
    detail = os.str();
    return r.error_rate <= 0.001;
  });

  criterion(2, "even-pipeline estimates are exact", [](std::string& detail) {
    int checked = 0;
    for (int stages = 1; stages <= 8; ++stages) {
      for (int m = 1; m <= 32; ++m) {
        const auto seq = uniform_seq(stages, 0.37, 0.81);
        const double est = estimate_latency(seq, m).total;
        const double sim =
            batch_latency(dapple_schedule(seq, m, staircase_phi(stages, m)), seq);
        if (!rel_close(est, sim, 1e-12)) {
          std::ostringstream os;
          os << "mismatch at S=" << stages << " M=" << m << ": est " << est << " sim " << sim;
          detail = os.str();
          return false;
        }
        ++checked;
      }
    }
    detail = std::to_string(checked) + " (S, M) combinations within 1e-12";
    return true;
  });

  criterion(3, "fewer stages win by exactly 7C/16", [](std::string& detail) {
    const double total = 16.0;
    std::ostringstream os;
    for (int m2 : {2, 4, 8}) {
      const FewerStagesReport r = insight_fewer_stages(total, 8 * m2);
      const double gap = r.sim_16stage - r.sim_2stage;
      os << "m2=" << m2 << " gap=" << gap << " ";
      if (!rel_close(gap, 7.0 * total / 16.0, 1e-12)) {
        detail = os.str() + "(expected 7)";
        return false;
      }
      if (!rel_close(r.sim_16stage, r.analytical_16stage, 1e-12) ||
          !rel_close(r.sim_2stage, r.analytical_2stage, 1e-12)) {
        detail = "simulation disagrees with the closed form";
        return false;
      }
    }
    detail = os.str() + "(all exactly 7C/16)";
    return true;
  });

  criterion(4, "uneven partitions help 1F1B only", [](std::string& detail) {
    std::ostringstream os;
    for (int m : {8, 12, 16, 24}) {
      const UnevenReport r = insight_uneven(m);
      os << "M=" << m << " dapple " << r.dapple_uneven << "<" << r.dapple_even << " gpipe "
         << r.gpipe_uneven << ">=" << r.gpipe_even << "; ";
      if (!(r.dapple_uneven < r.dapple_even)) {
        detail = os.str() + "(1F1B regression)";
        return false;
      }
      if (!(r.gpipe_uneven >= r.gpipe_even - 1e-12)) {
        detail = os.str() + "(all-forward baseline improved unexpectedly)";
        return false;
      }
    }
    detail = "direction holds for M in {8,12,16,24}";
    return true;
  });

  criterion(5, "peak activations: phi for 1F1B, M for the baseline", [](std::string& detail) {
    const auto seq = uniform_seq(2, 1.0, 2.0);
    const std::vector<int> phi = staircase_phi(2, 16);  // [2, 1]
    std::vector<int> first;
    for (int m : {2, 8, 16}) {
      const auto dapple_peaks = peak_activations(dapple_schedule(seq, m, phi));
      const auto gpipe_peaks = peak_activations(gpipe_schedule(seq, m));
      if (first.empty()) first = dapple_peaks;
      if (dapple_peaks != first || dapple_peaks != phi) {
        detail = "1F1B peaks depend on M or differ from phi";
        return false;
      }
      if (gpipe_peaks != std::vector<int>(2, m)) {
        detail = "baseline peaks are not equal to M";
        return false;
      }
    }
    detail = "1F1B peaks fixed at [2,1]; baseline peaks 2/8/16";
    return true;
  });

  criterion(6, "planner matches the exhaustive oracle", [](std::string& detail) {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> time_us(200.0, 4000.0);
    std::uniform_int_distribution<std::int64_t> act(0, 8 << 20);
    std::uniform_int_distribution<std::int64_t> params(0, 4 << 20);
    const std::vector<std::vector<int>> topologies{{1}, {2}, {3}, {4},    {1, 1}, {2, 2},
                                                   {1, 3}, {2, 1}, {1, 1, 1}, {1, 1, 1, 1}};

    const int instances = 200;
    int expressible = 0;
    int equal = 0;
    double max_gap = 0.0;
    double max_inexpressible_gap = 0.0;

    for (int round = 0; round < instances; ++round) {
      const int n = 1 + static_cast<int>(rng() % 6);
      ModelProfile profile;
      for (int i = 0; i < n; ++i) {
        profile.layers.push_back({i, time_us(rng) * 1e-6, 2 * time_us(rng) * 1e-6,
                                  act(rng), params(rng)});
      }
      ClusterSpec cluster = make_cluster(topologies[rng() % topologies.size()], 80e9, 8e9,
                                         1e-6, 1e-5);
      const int m = 4 + static_cast<int>(rng() % 5);

      const PipelinePlan fast = plan(profile, cluster, m);
      const PipelinePlan exact = brute_force_plan(profile, cluster, m);
      const double gap = fast.est_latency / exact.est_latency - 1.0;
      max_gap = std::max(max_gap, gap);

      if (policy_expressible(exact, cluster)) {
        ++expressible;
        if (rel_close(fast.est_latency, exact.est_latency, 1e-12)) {
          ++equal;
        } else {
          std::ostringstream os;
          os << "expressible optimum missed at instance " << round << " (gap "
             << gap * 100.0 << "%)";
          detail = os.str();
          return false;
        }
      } else if (gap > 0.15) {
        std::ostringstream os;
        os << "gap " << gap * 100.0 << "% above 15% at instance " << round;
        detail = os.str();
        return false;
      } else {
        max_inexpressible_gap = std::max(max_inexpressible_gap, gap);
      }
    }

    std::ostringstream os;
    os << "gap report: " << instances << " instances, " << expressible << " expressible ("
       << equal << " equal), max gap " << max_gap * 100.0 << "%, max inexpressible gap "
       << max_inexpressible_gap * 100.0 << "%";
    detail = os.str();
    return true;
  });

  criterion(7, "plan shapes match the model families", [](std::string& detail) {
    // parameter-heavy tail on a slow flat interconnect
    const ModelProfile vgg = vgg_like_profile();
    const ClusterSpec flat = make_cluster({1, 1, 1, 1}, 1.25e9, 1.25e9, 1e-5, 1e-5);
    const PipelinePlan vgg_plan = plan(vgg, flat, 16);
    std::ostringstream os;
    os << "tail-heavy:";
    for (const auto& s : vgg_plan.stages) {
      os << " [" << s.layer_lo << "," << s.layer_hi << ")x" << s.replication();
    }
    if (vgg_plan.compute_stage_count() != 2 || vgg_plan.stages.back().replication() != 1) {
      detail = os.str() + " (wanted two stages with an unreplicated tail)";
      return false;
    }

    // uniform blocks with heavy gradients on a hierarchical interconnect
    const ModelProfile bert = bert_like_profile();
    const ClusterSpec hier = make_cluster({8, 8}, 130e9, 3.125e9, 1e-6, 1e-5);
    const PipelinePlan bert_plan = plan(bert, hier, 32);
    os << "; uniform:";
    for (const auto& s : bert_plan.stages) {
      os << " [" << s.layer_lo << "," << s.layer_hi << ")x" << s.replication();
    }
    if (bert_plan.compute_stage_count() != 2) {
      detail = os.str() + " (wanted a two-stage plan)";
      return false;
    }
    for (int k = 0; k < 2; ++k) {
      const auto& devices = bert_plan.stages[k].devices;
      const int server = hier.server_of(devices.front());
      for (int d : devices) {
        if (hier.server_of(d) != server) {
          detail = os.str() + " (a stage spans servers)";
          return false;
        }
      }
    }
    detail = os.str();
    return true;
  });

  std::printf("%d of 7 criteria passed\n", 7 - g_failures);
  return g_failures;
}
