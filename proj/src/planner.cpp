// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeplan/planner.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "pipeplan/costmodel.hpp"
#include "pipeplan/estimator.hpp"

namespace pipeplan {

namespace {

struct Draft {
  int lo = 0;
  int hi = 0;
  std::vector<int> devices;
};

struct Candidate {
  double est = 0.0;
  std::vector<Draft> stages;
};

// est ascending, then fewer stages, then smaller split points, then smaller
// device ids. Total order over distinct candidates.
bool better(const Candidate& a, const Candidate& b) {
  if (a.est != b.est) return a.est < b.est;
  if (a.stages.size() != b.stages.size()) return a.stages.size() < b.stages.size();
  for (std::size_t k = 0; k < a.stages.size(); ++k) {
    if (a.stages[k].hi != b.stages[k].hi) return a.stages[k].hi < b.stages[k].hi;
  }
  for (std::size_t k = 0; k < a.stages.size(); ++k) {
    if (a.stages[k].devices != b.stages[k].devices) {
      return a.stages[k].devices < b.stages[k].devices;
    }
  }
  return false;
}

std::vector<int> per_server_counts(const std::vector<int>& devices,
                                   const std::vector<int>& seps) {
  std::vector<int> counts(seps.size(), 0);
  int base = 0;
  std::size_t s = 0;
  for (int d : devices) {  // devices sorted ascending
    while (d >= base + seps[s]) {
      base += seps[s];
      ++s;
    }
    ++counts[s];
  }
  return counts;
}

struct Evaluator {
  const ModelProfile& profile;
  const ClusterSpec& cluster;
  int micro_batches;
  double optimizer_multiplier;

  StageCostSequence make_sequence(const std::vector<Draft>& stages) const {
    StageCostSequence seq;
    seq.reserve(2 * stages.size() - 1);
    for (std::size_t s = 0; s < stages.size(); ++s) {
      StageCost cost = aggregate_stage(profile, stages[s].lo, stages[s].hi,
                                       static_cast<int>(stages[s].devices.size()));
      cost.allreduce_time = allreduce_time(cost.param_bytes, stages[s].devices, cluster);
      seq.push_back(cost);
      if (s + 1 < stages.size()) {
        const double sc = splitconcat_time(cost.activation_out_bytes, stages[s].devices,
                                           stages[s + 1].devices, cluster);
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

  bool feasible(const StageCostSequence& seq) const {
    for (const StageCost& c : seq) {
      if (c.kind == StageKind::compute &&
          !memory_feasible(c, 1, cluster.per_gpu_memory, optimizer_multiplier)) {
        return false;
      }
    }
    return true;
  }

  std::optional<double> complete_latency(const std::vector<Draft>& stages) const {
    const StageCostSequence seq = make_sequence(stages);
    if (!feasible(seq)) return std::nullopt;
    return estimate_latency(seq, micro_batches).total;
  }
};

// Keeps the k best complete candidates, ordered by better().
struct TopK {
  std::size_t limit;
  std::vector<Candidate> entries;

  void offer(Candidate c) {
    auto pos = std::upper_bound(entries.begin(), entries.end(), c, better);
    entries.insert(pos, std::move(c));
    if (entries.size() > limit) entries.pop_back();
  }
  bool empty() const { return entries.empty(); }
  const Candidate& best() const { return entries.front(); }
};

int injection_cap(const StageCostSequence& seq, std::int64_t capacity,
                  double optimizer_multiplier, int micro_batches) {
  int cap = micro_batches;
  for (const StageCost& c : seq) {
    if (c.kind != StageKind::compute || c.activation_out_bytes == 0) continue;
    const double headroom =
        static_cast<double>(capacity) - optimizer_multiplier * static_cast<double>(c.param_bytes);
    const int stage_cap = static_cast<int>(headroom / static_cast<double>(c.activation_out_bytes));
    cap = std::min(cap, stage_cap);
  }
  return std::max(cap, 1);
}

PipelinePlan finalize_candidate(const Candidate& c, const ModelProfile& profile,
                                const ClusterSpec& cluster, int micro_batches,
                                const PlannerOptions& opts) {
  PipelinePlan plan;
  plan.stages.reserve(c.stages.size());
  for (const Draft& d : c.stages) plan.stages.push_back({d.lo, d.hi, d.devices});
  plan.est_latency = c.est;

  const StageCostSequence seq = build_stage_sequence(plan, profile, cluster);
  plan.pivot = select_pivot(seq, micro_batches);

  const int cap = injection_cap(seq, cluster.per_gpu_memory, opts.optimizer_multiplier,
                                micro_batches);
  const PhiResult phi = optimize_phi(seq, micro_batches, opts.phi_strategy, cap);
  plan.phi_expanded = phi.phi;
  plan.phi.clear();
  for (std::size_t i = 0; i < phi.phi.size(); i += 2) plan.phi.push_back(phi.phi[i]);

  plan.sim_latency = simulate_plan(plan, profile, cluster, micro_batches).latency;
  return plan;
}

// Small instances are searched without state merging so the full policy
// space is covered; beyond that, states that coincide in per-server free
// counts and in their exposed last stage are collapsed to the best one.
constexpr int kExactSearchLayers = 10;
constexpr int kExactSearchGpus = 6;

struct SearchState {
  std::vector<Draft> prefix;
  std::vector<int> free;
  int used = 0;
};

std::string state_key(const SearchState& st, const std::vector<int>& seps) {
  std::string key;
  key.reserve(32);
  const Draft& last = st.prefix.back();
  key += std::to_string(last.hi);
  key += '|';
  key += std::to_string(last.lo);
  key += '|';
  for (int f : st.free) {
    key += std::to_string(f);
    key += ',';
  }
  key += '|';
  for (int c : per_server_counts(last.devices, seps)) {
    key += std::to_string(c);
    key += ',';
  }
  return key;
}

}  // namespace

int DeviceState::total_free() const {
  return std::accumulate(free.begin(), free.end(), 0);
}

std::vector<int> DeviceState::allocate(int server, int count) {
  if (count < 0 || count > free[server]) {
    throw std::logic_error("DeviceState::allocate: not enough free GPUs on server");
  }
  int base = 0;
  for (int s = 0; s < server; ++s) base += seps[s];
  std::vector<int> ids;
  ids.reserve(count);
  const int first = base + (seps[server] - free[server]);
  for (int k = 0; k < count; ++k) ids.push_back(first + k);
  free[server] -= count;
  return ids;
}

std::vector<std::vector<int>> enumerate_placements(const DeviceState& state,
                                                   int gpu_count) {
  if (gpu_count < 1) throw std::invalid_argument("enumerate_placements: gpu count must be >= 1");
  if (gpu_count > state.total_free()) {
    throw std::runtime_error("enumerate_placements: insufficient free GPUs");
  }
  const int servers = static_cast<int>(state.seps.size());

  auto greedy_take = [&](const std::vector<int>& order) {
    std::vector<int> take(servers, 0);
    int need = gpu_count;
    for (int s : order) {
      const int t = std::min(state.free[s], need);
      take[s] = t;
      need -= t;
      if (need == 0) break;
    }
    return take;
  };

  std::vector<int> fresh_order;
  std::vector<int> append_order;
  for (int s = 0; s < servers; ++s) {
    if (state.server_fresh(s)) fresh_order.push_back(s);
  }
  for (int s = 0; s < servers; ++s) {
    if (state.server_used(s) && state.free[s] > 0) append_order.push_back(s);
  }
  // fresh-first: whole unused servers, then whatever is left on used ones.
  std::vector<int> order_a = fresh_order;
  order_a.insert(order_a.end(), append_order.begin(), append_order.end());
  // append-first: top up partially used servers before opening fresh ones.
  std::vector<int> order_b = append_order;
  order_b.insert(order_b.end(), fresh_order.begin(), fresh_order.end());

  // scatter-first: one GPU at a time round robin over the eligible servers.
  std::vector<int> eligible = append_order;
  if (eligible.empty()) {
    for (int s = 0; s < servers; ++s) {
      if (state.free[s] > 0) eligible.push_back(s);
    }
  } else {
    int available = 0;
    for (int s : eligible) available += state.free[s];
    if (available < gpu_count) {
      eligible.clear();
      for (int s = 0; s < servers; ++s) {
        if (state.free[s] > 0) eligible.push_back(s);
      }
    }
  }
  std::vector<int> scatter_take(servers, 0);
  {
    int need = gpu_count;
    while (need > 0) {
      for (int s : eligible) {
        if (need == 0) break;
        if (scatter_take[s] < state.free[s]) {
          ++scatter_take[s];
          --need;
        }
      }
    }
  }

  std::vector<std::vector<int>> takes;
  for (auto& take : {greedy_take(order_a), greedy_take(order_b), scatter_take}) {
    if (std::find(takes.begin(), takes.end(), take) == takes.end()) takes.push_back(take);
  }

  std::vector<std::vector<int>> result;
  result.reserve(takes.size());
  for (const auto& take : takes) {
    DeviceState scratch = state;
    std::vector<int> ids;
    ids.reserve(gpu_count);
    for (int s = 0; s < servers; ++s) {
      if (take[s] > 0) {
        auto part = scratch.allocate(s, take[s]);
        ids.insert(ids.end(), part.begin(), part.end());
      }
    }
    result.push_back(std::move(ids));
  }
  return result;
}

bool memory_feasible(const StageCost& stage, int injected, std::int64_t capacity,
                     double optimizer_multiplier) {
  if (capacity <= 0) throw std::invalid_argument("memory_feasible: capacity must be > 0");
  const double need =
      optimizer_multiplier * static_cast<double>(stage.param_bytes) +
      static_cast<double>(injected) * static_cast<double>(stage.activation_out_bytes);
  return need <= static_cast<double>(capacity);
}

PipelinePlan plan(const ModelProfile& profile, const ClusterSpec& cluster,
                  int micro_batches, const PlannerOptions& opts, SearchReport* report) {
  profile.validate();
  cluster.validate();
  if (micro_batches < 1) throw std::invalid_argument("plan: micro-batch count must be >= 1");

  const int n = profile.layer_count();
  const int gpus = cluster.gpu_count();
  const Evaluator ev{profile, cluster, micro_batches, opts.optimizer_multiplier};
  const bool exact = n <= kExactSearchLayers && gpus <= kExactSearchGpus;

  TopK top{static_cast<std::size_t>(std::max(opts.top_k, 1)), {}};
  long long evaluated = 0;

  auto materialize_rest = [&](const std::vector<int>& free) {
    DeviceState scratch{cluster};
    scratch.free = free;
    std::vector<int> ids;
    for (std::size_t s = 0; s < free.size(); ++s) {
      if (free[s] > 0) {
        auto part = scratch.allocate(static_cast<int>(s), free[s]);
        ids.insert(ids.end(), part.begin(), part.end());
      }
    }
    return ids;
  };

  auto submit = [&](std::vector<Draft> stages) {
    ++evaluated;
    const auto est = ev.complete_latency(stages);
    if (est) top.offer(Candidate{*est, std::move(stages)});
    return est;
  };

  // The no-split plan: the whole model replicated on every GPU.
  {
    DeviceState all{cluster};
    std::vector<Draft> single{{0, n, materialize_rest(all.free)}};
    submit(std::move(single));
  }

  std::deque<SearchState> queue;
  std::unordered_map<std::string, double> memo;

  auto push_state = [&](SearchState st, const std::optional<double>& complete_est) {
    // A prefix with an infeasible stage can never complete into a feasible
    // plan; the closing stage is the only part later splits can change.
    for (const Draft& d : st.prefix) {
      StageCost cost = aggregate_stage(profile, d.lo, d.hi, static_cast<int>(d.devices.size()));
      if (!memory_feasible(cost, 1, cluster.per_gpu_memory, opts.optimizer_multiplier)) return;
    }
    if (!exact) {
      const std::string key = state_key(st, cluster.seps);
      const double score =
          complete_est ? *complete_est : std::numeric_limits<double>::infinity();
      auto it = memo.find(key);
      if (it != memo.end() && it->second <= score) return;
      memo[key] = score;
    }
    queue.push_back(std::move(st));
  };

  auto expand_from = [&](int j, int used, const std::vector<Draft>& prefix,
                         const std::vector<int>& free) {
    DeviceState st{cluster};
    st.free = free;
    for (int jp = j + 1; jp <= n - 1; ++jp) {
      for (int mp = 1; mp <= gpus - used - 1; ++mp) {
        for (auto& devices : enumerate_placements(st, mp)) {
          SearchState next;
          next.prefix = prefix;
          next.prefix.push_back({j, jp, devices});
          next.free = free;
          const auto counts = per_server_counts(devices, cluster.seps);
          for (std::size_t s = 0; s < counts.size(); ++s) next.free[s] -= counts[s];
          next.used = used + mp;

          auto complete = next.prefix;
          complete.push_back({jp, n, materialize_rest(next.free)});
          const auto est = submit(std::move(complete));

          if (jp + 1 <= n - 1 && next.used <= gpus - 2) push_state(std::move(next), est);
        }
      }
    }
  };

  // Seed with every first split, then grow prefixes breadth first.
  {
    DeviceState fresh{cluster};
    expand_from(0, 0, {}, fresh.free);
  }
  while (!queue.empty()) {
    SearchState st = std::move(queue.front());
    queue.pop_front();
    expand_from(st.prefix.back().hi, st.used, st.prefix, st.free);
  }

  if (top.empty()) {
    throw std::runtime_error("plan: no memory-feasible plan exists for this profile and cluster");
  }

  PipelinePlan result = finalize_candidate(top.best(), profile, cluster, micro_batches, opts);
  if (report) {
    report->top.clear();
    report->states_evaluated = evaluated;
    for (const Candidate& c : top.entries) {
      RankedPlan rp;
      rp.plan = finalize_candidate(c, profile, cluster, micro_batches, opts);
      rp.est_latency = c.est;
      rp.sim_latency = *rp.plan.sim_latency;
      report->top.push_back(std::move(rp));
    }
  }
  return result;
}

PipelinePlan brute_force_plan(const ModelProfile& profile, const ClusterSpec& cluster,
                              int micro_batches, const PlannerOptions& opts) {
  profile.validate();
  cluster.validate();
  if (micro_batches < 1) throw std::invalid_argument("brute_force_plan: micro-batch count must be >= 1");
  const int n = profile.layer_count();
  const int gpus = cluster.gpu_count();
  if (n > 8 || gpus > 4) {
    throw std::invalid_argument("brute_force_plan: limits exceeded (needs N <= 8 and G <= 4)");
  }

  const Evaluator ev{profile, cluster, micro_batches, opts.optimizer_multiplier};
  TopK top{1, {}};

  const int max_stages = std::min(n, gpus);
  std::vector<int> cuts;
  for (int stage_count = 1; stage_count <= max_stages; ++stage_count) {
    // Choose stage_count-1 ascending cut points in [1, n).
    cuts.assign(stage_count - 1, 0);
    std::iota(cuts.begin(), cuts.end(), 1);
    auto next_combination = [&]() {
      int k = static_cast<int>(cuts.size());
      for (int i = k - 1; i >= 0; --i) {
        if (cuts[i] < n - 1 - (k - 1 - i)) {
          ++cuts[i];
          for (int j = i + 1; j < k; ++j) cuts[j] = cuts[j - 1] + 1;
          return true;
        }
      }
      return false;
    };

    bool more_splits = true;
    while (more_splits) {
      // Every assignment of GPUs to stages (0 leaves the GPU unused).
      std::vector<int> label(gpus, 0);
      while (true) {
        std::vector<Draft> stages(stage_count);
        for (int k = 0; k < stage_count; ++k) {
          stages[k].lo = k == 0 ? 0 : cuts[k - 1];
          stages[k].hi = k == stage_count - 1 ? n : cuts[k];
        }
        for (int g = 0; g < gpus; ++g) {
          if (label[g] > 0) stages[label[g] - 1].devices.push_back(g);
        }
        const bool all_staffed = std::all_of(stages.begin(), stages.end(),
                                             [](const Draft& d) { return !d.devices.empty(); });
        if (all_staffed) {
          if (auto est = ev.complete_latency(stages)) {
            top.offer(Candidate{*est, std::move(stages)});
          }
        }

        int pos = gpus - 1;
        while (pos >= 0 && label[pos] == stage_count) label[pos--] = 0;
        if (pos < 0) break;
        ++label[pos];
      }
      more_splits = cuts.empty() ? false : next_combination();
    }
  }

  if (top.empty()) {
    throw std::runtime_error("brute_force_plan: no memory-feasible plan exists");
  }
  return finalize_candidate(top.best(), profile, cluster, micro_batches, opts);
}

PlanSimulation simulate_plan(const PipelinePlan& plan, const ModelProfile& profile,
                             const ClusterSpec& cluster, int micro_batches,
                             ScheduleKind kind, bool recompute) {
  StageCostSequence seq = build_stage_sequence(plan, profile, cluster);
  if (recompute) seq = apply_recompute(seq);

  PlanSimulation out;
  if (kind == ScheduleKind::gpipe) {
    out.timeline = gpipe_schedule(seq, micro_batches);
  } else {
    std::vector<int> phi;
    if (plan.phi_expanded.size() == seq.size()) {
      phi = plan.phi_expanded;
    } else if (!plan.phi.empty()) {
      phi = expand_plan_phi(plan.phi);
    } else {
      phi = optimize_phi(seq, micro_batches, PhiStrategy::preset_a, micro_batches).phi;
    }
    out.timeline = dapple_schedule(seq, micro_batches, phi);
  }
  out.latency = batch_latency(out.timeline, seq);
  out.seq = std::move(seq);
  return out;
}

}  // namespace pipeplan
