// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeplan/simulator.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pipeplan {

namespace {

// Block node ids: forwards first, then backwards, stage-major.
inline int fwd_node(int i, int x, int m) { return x * m + i; }
inline int bwd_node(int i, int x, int m, int s) { return s * m + x * m + i; }

struct DependencySolver {
  int m;
  int s;
  int total;
  std::vector<std::vector<int>> dependents;
  std::vector<int> indegree;
  std::vector<double> start;

  DependencySolver(int micro_batches, int stages)
      : m(micro_batches),
        s(stages),
        total(2 * micro_batches * stages),
        dependents(total),
        indegree(total, 0),
        start(total, 0.0) {}

  void add_edge(int from, int to) {
    dependents[from].push_back(to);
    ++indegree[to];
  }

  // Kahn's algorithm; each block's start becomes the max end of its
  // dependencies. Touches every block and edge once.
  void solve(const std::vector<double>& duration, std::vector<double>& end) {
    end.assign(total, 0.0);
    std::vector<int> queue;
    queue.reserve(total);
    for (int v = 0; v < total; ++v) {
      if (indegree[v] == 0) queue.push_back(v);
    }
    std::size_t head = 0;
    int processed = 0;
    while (head < queue.size()) {
      const int v = queue[head++];
      ++processed;
      end[v] = start[v] + duration[v];
      for (int w : dependents[v]) {
        start[w] = std::max(start[w], end[v]);
        if (--indegree[w] == 0) queue.push_back(w);
      }
    }
    if (processed != total) {
      throw std::logic_error("schedule dependency graph has a cycle");
    }
  }
};

Timeline run_schedule(const StageCostSequence& seq, int micro_batches,
                      const std::vector<int>& phi, ScheduleKind kind) {
  const int s = static_cast<int>(seq.size());
  const int m = micro_batches;
  DependencySolver solver(m, s);

  std::vector<double> duration(solver.total);
  for (int x = 0; x < s; ++x) {
    for (int i = 0; i < m; ++i) {
      duration[fwd_node(i, x, m)] = seq[x].fwd;
      duration[bwd_node(i, x, m, s)] = seq[x].bwd;
    }
  }

  for (int x = 0; x < s; ++x) {
    for (int i = 0; i < m; ++i) {
      const int f = fwd_node(i, x, m);
      const int b = bwd_node(i, x, m, s);
      if (i > 0) solver.add_edge(fwd_node(i - 1, x, m), f);
      if (x > 0) solver.add_edge(fwd_node(i, x - 1, m), f);
      if (i > 0) solver.add_edge(bwd_node(i - 1, x, m, s), b);
      if (x + 1 < s) solver.add_edge(bwd_node(i, x + 1, m, s), b);
      if (kind == ScheduleKind::dapple) {
        if (i - phi[x] >= 0) solver.add_edge(bwd_node(i - phi[x], x, m, s), f);
        if (i + phi[x] - 1 < m) solver.add_edge(fwd_node(i + phi[x] - 1, x, m), b);
      } else {
        // All forwards precede any backward on the stage.
        solver.add_edge(fwd_node(m - 1, x, m), b);
      }
    }
  }

  std::vector<double> end;
  solver.solve(duration, end);

  Timeline tl;
  tl.micro_batches = m;
  tl.stage_count = s;
  tl.phi = phi;
  tl.blocks.resize(solver.total);
  for (int x = 0; x < s; ++x) {
    for (int i = 0; i < m; ++i) {
      const int f = fwd_node(i, x, m);
      const int b = bwd_node(i, x, m, s);
      tl.blocks[f] = {x, i, BlockKind::forward, solver.start[f], end[f]};
      tl.blocks[b] = {x, i, BlockKind::backward, solver.start[b], end[b]};
    }
  }
  return tl;
}

void check_phi(const std::vector<int>& phi, int stages, int micro_batches) {
  if (static_cast<int>(phi.size()) != stages) {
    throw std::invalid_argument("phi: expected one entry per stage, got " +
                                std::to_string(phi.size()) + " for " +
                                std::to_string(stages) + " stages");
  }
  for (int x = 0; x < stages; ++x) {
    if (phi[x] < 1 || phi[x] > micro_batches) {
      throw std::invalid_argument("phi[" + std::to_string(x) + "] must be in [1, M]");
    }
    if (x > 0 && phi[x] > phi[x - 1]) {
      throw std::invalid_argument("phi must be non-increasing toward the top stage");
    }
  }
  if (phi.back() != 1) throw std::invalid_argument("phi of the topmost stage must be 1");
}

}  // namespace

const Block& Timeline::forward(int micro_batch, int stage) const {
  return blocks[fwd_node(micro_batch, stage, micro_batches)];
}

const Block& Timeline::backward(int micro_batch, int stage) const {
  return blocks[bwd_node(micro_batch, stage, micro_batches, stage_count)];
}

Block& Timeline::forward(int micro_batch, int stage) {
  return blocks[fwd_node(micro_batch, stage, micro_batches)];
}

Block& Timeline::backward(int micro_batch, int stage) {
  return blocks[bwd_node(micro_batch, stage, micro_batches, stage_count)];
}

Timeline dapple_schedule(const StageCostSequence& seq, int micro_batches,
                         const std::vector<int>& phi) {
  if (seq.empty()) throw std::invalid_argument("dapple_schedule: empty stage sequence");
  if (micro_batches < 1) throw std::invalid_argument("dapple_schedule: M must be >= 1");
  check_phi(phi, static_cast<int>(seq.size()), micro_batches);
  return run_schedule(seq, micro_batches, phi, ScheduleKind::dapple);
}

Timeline gpipe_schedule(const StageCostSequence& seq, int micro_batches) {
  if (seq.empty()) throw std::invalid_argument("gpipe_schedule: empty stage sequence");
  if (micro_batches < 1) throw std::invalid_argument("gpipe_schedule: M must be >= 1");
  // Everything is injected immediately; record the effective injection count.
  std::vector<int> phi(seq.size(), micro_batches);
  return run_schedule(seq, micro_batches, phi, ScheduleKind::gpipe);
}

double batch_latency(const Timeline& timeline, const StageCostSequence& seq) {
  if (static_cast<int>(seq.size()) != timeline.stage_count) {
    throw std::invalid_argument("batch_latency: sequence does not match timeline");
  }
  double latest = 0.0;
  for (int x = 0; x < timeline.stage_count; ++x) {
    latest = std::max(latest, timeline.backward(timeline.micro_batches - 1, x).end +
                                  seq[x].allreduce_time);
  }
  return latest;
}

std::vector<int> peak_activations(const Timeline& timeline) {
  std::vector<int> peaks(timeline.stage_count, 0);
  std::vector<std::pair<double, int>> events;
  for (int x = 0; x < timeline.stage_count; ++x) {
    events.clear();
    events.reserve(2 * timeline.micro_batches);
    for (int i = 0; i < timeline.micro_batches; ++i) {
      events.emplace_back(timeline.forward(i, x).end, +1);   // becomes live
      events.emplace_back(timeline.backward(i, x).end, -1);  // freed
    }
    std::sort(events.begin(), events.end());
    int live = 0;
    int peak = 0;
    std::size_t e = 0;
    while (e < events.size()) {
      const double t = events[e].first;
      for (; e < events.size() && events[e].first == t; ++e) live += events[e].second;
      peak = std::max(peak, live);
    }
    peaks[x] = peak;
  }
  return peaks;
}

std::vector<int> expand_plan_phi(const std::vector<int>& compute_phi) {
  if (compute_phi.empty()) throw std::invalid_argument("expand_plan_phi: empty phi");
  std::vector<int> expanded;
  expanded.reserve(2 * compute_phi.size() - 1);
  for (std::size_t k = 0; k < compute_phi.size(); ++k) {
    expanded.push_back(compute_phi[k]);
    if (k + 1 < compute_phi.size()) expanded.push_back(compute_phi[k + 1]);
  }
  return expanded;
}

StageCostSequence apply_recompute(StageCostSequence seq) {
  for (StageCost& c : seq) {
    if (c.kind == StageKind::compute) c.bwd += c.fwd;
  }
  return seq;
}

namespace {

PhiResult evaluate_phi(const StageCostSequence& seq, int micro_batches,
                       std::vector<int> phi) {
  Timeline tl = dapple_schedule(seq, micro_batches, phi);
  return {std::move(phi), batch_latency(tl, seq)};
}

}  // namespace

PhiResult optimize_phi(const StageCostSequence& seq, int micro_batches,
                       PhiStrategy strategy, int max_injection) {
  if (seq.empty()) throw std::invalid_argument("optimize_phi: empty stage sequence");
  if (micro_batches < 1) throw std::invalid_argument("optimize_phi: M must be >= 1");
  if (max_injection < 1) throw std::invalid_argument("optimize_phi: injection cap D must be >= 1");

  const int s = static_cast<int>(seq.size());
  auto preset = [&](bool doubled) {
    std::vector<int> phi(s);
    for (int i = 0; i < s; ++i) {
      const int base = doubled ? 2 * (s - i) - 1 : s - i;
      phi[i] = std::min({base, max_injection, micro_batches});
    }
    return phi;
  };

  if (strategy == PhiStrategy::preset_a) return evaluate_phi(seq, micro_batches, preset(false));
  if (strategy == PhiStrategy::preset_b) return evaluate_phi(seq, micro_batches, preset(true));

  // Exhaustive search over non-increasing vectors bounded by preset B.
  const std::vector<int> bound = preset(true);
  std::vector<int> current(s, 1);
  PhiResult best;
  long long best_sum = 0;
  bool have_best = false;

  auto consider = [&](const std::vector<int>& phi) {
    PhiResult r = evaluate_phi(seq, micro_batches, phi);
    const long long sum = std::accumulate(phi.begin(), phi.end(), 0LL);
    const bool better =
        !have_best || r.latency < best.latency ||
        (r.latency == best.latency &&
         (sum < best_sum || (sum == best_sum && phi < best.phi)));
    if (better) {
      best = std::move(r);
      best_sum = sum;
      have_best = true;
    }
  };

  auto enumerate = [&](auto&& self, int pos) -> void {
    if (pos == s) {
      consider(current);
      return;
    }
    const int cap = pos == 0 ? bound[pos] : std::min(bound[pos], current[pos - 1]);
    for (int v = cap; v >= 1; --v) {
      current[pos] = v;
      self(self, pos + 1);
    }
  };
  enumerate(enumerate, 0);
  return best;
}

}  // namespace pipeplan
