// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeplan/model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pipeplan {

using nlohmann::json;

namespace {

constexpr double kMicrosToSeconds = 1e-6;
constexpr double kSecondsToMicros = 1e6;
constexpr double kGigabytesPerSecond = 1e9;
constexpr double kGibibytes = 1024.0 * 1024.0 * 1024.0;

[[noreturn]] void validation_error(const std::string& where, const std::string& what) {
  throw std::runtime_error(where + ": " + what);
}

double require_number(const json& j, const std::string& where, const char* field) {
  if (!j.contains(field) || !j.at(field).is_number()) {
    validation_error(where + "." + field, "missing or not a number");
  }
  return j.at(field).get<double>();
}

std::int64_t require_int(const json& j, const std::string& where, const char* field) {
  if (!j.contains(field) || !j.at(field).is_number_integer()) {
    validation_error(where + "." + field, "missing or not an integer");
  }
  return j.at(field).get<std::int64_t>();
}

json parse_stream(std::istream& in, const char* what) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string(what) + ": " + e.what());
  }
}

}  // namespace

double ModelProfile::total_fwd_time() const {
  return std::accumulate(layers.begin(), layers.end(), 0.0,
                         [](double acc, const LayerProfile& l) { return acc + l.fwd_time; });
}

double ModelProfile::total_bwd_time() const {
  return std::accumulate(layers.begin(), layers.end(), 0.0,
                         [](double acc, const LayerProfile& l) { return acc + l.bwd_time; });
}

void ModelProfile::validate() const {
  if (layers.empty()) validation_error("profile", "layer count must satisfy N >= 1");
  if (profile_batch_size < 1) validation_error("profile.profile_batch_size", "must be >= 1");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "profile.layers[" + std::to_string(i) + "]";
    if (l.index != static_cast<int>(i)) validation_error(where, "layer indices must be contiguous from 0");
    if (l.fwd_time < 0) validation_error(where + ".fwd_time", "must be >= 0");
    if (l.bwd_time < 0) validation_error(where + ".bwd_time", "must be >= 0");
    if (l.activation_bytes < 0) validation_error(where + ".activation_bytes", "must be >= 0");
    if (l.param_bytes < 0) validation_error(where + ".param_bytes", "must be >= 0");
  }
}

int ClusterSpec::gpu_count() const {
  return std::accumulate(seps.begin(), seps.end(), 0);
}

int ClusterSpec::server_of(int gpu_id) const {
  int base = 0;
  for (std::size_t s = 0; s < seps.size(); ++s) {
    base += seps[s];
    if (gpu_id < base) return static_cast<int>(s);
  }
  throw std::out_of_range("unknown device id " + std::to_string(gpu_id));
}

void ClusterSpec::validate() const {
  if (seps.empty()) validation_error("cluster.seps", "at least one server required");
  for (int c : seps) {
    if (c < 1) validation_error("cluster.seps", "per-server GPU counts must be >= 1");
  }
  if (intra_bw <= 0 || inter_bw <= 0) validation_error("cluster", "bandwidths must be > 0");
  if (intra_latency < 0 || inter_latency < 0) validation_error("cluster", "latencies must be >= 0");
  if (per_gpu_memory <= 0) validation_error("cluster.per_gpu_memory", "must be > 0");
}

void PipelinePlan::validate(const ModelProfile& profile, const ClusterSpec& cluster) const {
  if (stages.empty()) validation_error("plan", "at least one stage required");
  const int n = profile.layer_count();
  const int gpus = cluster.gpu_count();
  int expected_lo = 0;
  std::vector<bool> taken(gpus, false);
  int used = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& st = stages[s];
    const std::string where = "plan.stages[" + std::to_string(s) + "]";
    if (st.layer_lo != expected_lo) validation_error(where, "stage layer ranges must partition the model without gaps");
    if (st.layer_lo >= st.layer_hi) validation_error(where, "layer range must be non-empty");
    expected_lo = st.layer_hi;
    if (st.devices.empty()) validation_error(where, "device set must be non-empty");
    for (int d : st.devices) {
      if (d < 0 || d >= gpus) validation_error(where, "unknown device id " + std::to_string(d));
      if (taken[d]) validation_error(where, "device " + std::to_string(d) + " assigned to more than one stage");
      taken[d] = true;
      ++used;
    }
  }
  if (expected_lo != n) validation_error("plan", "stage layer ranges must cover all layers");
  if (used > gpus) validation_error("plan", "more devices assigned than the cluster has");
  if (!phi.empty()) {
    if (phi.size() != stages.size()) validation_error("plan.phi", "one injection count per compute stage required");
    for (std::size_t i = 0; i < phi.size(); ++i) {
      if (phi[i] < 1) validation_error("plan.phi", "injection counts must be >= 1");
      if (i > 0 && phi[i] > phi[i - 1]) validation_error("plan.phi", "injection counts must be non-increasing");
    }
    if (phi.back() != 1) validation_error("plan.phi", "topmost stage must inject exactly 1");
  }
}

ModelProfile load_profile(std::istream& in) {
  const json j = parse_stream(in, "profile");
  ModelProfile p;
  if (!j.is_object()) validation_error("profile", "top-level JSON object expected");
  p.profile_batch_size = static_cast<int>(require_int(j, "profile", "profile_batch_size"));
  if (!j.contains("layers") || !j.at("layers").is_array()) {
    validation_error("profile.layers", "missing or not an array");
  }
  int idx = 0;
  for (const auto& jl : j.at("layers")) {
    const std::string where = "profile.layers[" + std::to_string(idx) + "]";
    LayerProfile l;
    l.index = idx++;
    l.fwd_time = require_number(jl, where, "fwd_time_us") * kMicrosToSeconds;
    l.bwd_time = require_number(jl, where, "bwd_time_us") * kMicrosToSeconds;
    l.activation_bytes = require_int(jl, where, "activation_bytes");
    l.param_bytes = require_int(jl, where, "param_bytes");
    p.layers.push_back(l);
  }
  p.validate();
  return p;
}

ModelProfile load_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile file: " + path);
  return load_profile(in);
}

std::string profile_to_json(const ModelProfile& profile) {
  json j;
  j["profile_batch_size"] = profile.profile_batch_size;
  j["layers"] = json::array();
  for (const auto& l : profile.layers) {
    j["layers"].push_back({{"fwd_time_us", l.fwd_time * kSecondsToMicros},
                           {"bwd_time_us", l.bwd_time * kSecondsToMicros},
                           {"activation_bytes", l.activation_bytes},
                           {"param_bytes", l.param_bytes}});
  }
  return j.dump(2);
}

ClusterSpec load_cluster(std::istream& in) {
  const json j = parse_stream(in, "cluster");
  ClusterSpec c;
  if (!j.is_object()) validation_error("cluster", "top-level JSON object expected");
  if (!j.contains("seps") || !j.at("seps").is_array() || j.at("seps").empty()) {
    validation_error("cluster.seps", "missing or empty array");
  }
  for (const auto& s : j.at("seps")) {
    if (!s.is_number_integer()) validation_error("cluster.seps", "entries must be integers");
    c.seps.push_back(s.get<int>());
  }
  c.intra_bw = require_number(j, "cluster", "intra_bw_gbps") * kGigabytesPerSecond;
  c.inter_bw = require_number(j, "cluster", "inter_bw_gbps") * kGigabytesPerSecond;
  c.intra_latency = require_number(j, "cluster", "intra_latency_us") * kMicrosToSeconds;
  c.inter_latency = require_number(j, "cluster", "inter_latency_us") * kMicrosToSeconds;
  c.per_gpu_memory = static_cast<std::int64_t>(require_number(j, "cluster", "per_gpu_memory_gb") * kGibibytes);
  c.validate();
  return c;
}

ClusterSpec load_cluster_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cluster file: " + path);
  return load_cluster(in);
}

std::string cluster_to_json(const ClusterSpec& cluster) {
  json j;
  j["seps"] = cluster.seps;
  j["intra_bw_gbps"] = cluster.intra_bw / kGigabytesPerSecond;
  j["inter_bw_gbps"] = cluster.inter_bw / kGigabytesPerSecond;
  j["intra_latency_us"] = cluster.intra_latency * kSecondsToMicros;
  j["inter_latency_us"] = cluster.inter_latency * kSecondsToMicros;
  j["per_gpu_memory_gb"] = static_cast<double>(cluster.per_gpu_memory) / kGibibytes;
  return j.dump(2);
}

StageCost aggregate_stage(const ModelProfile& profile, int layer_lo, int layer_hi,
                          int replication) {
  if (layer_lo < 0 || layer_hi > profile.layer_count() || layer_lo >= layer_hi) {
    throw std::out_of_range("aggregate_stage: bad layer range [" + std::to_string(layer_lo) +
                            ", " + std::to_string(layer_hi) + ")");
  }
  if (replication < 1) throw std::invalid_argument("aggregate_stage: replication must be >= 1");
  StageCost cost;
  cost.kind = StageKind::compute;
  double fwd = 0.0;
  double bwd = 0.0;
  std::int64_t params = 0;
  for (int i = layer_lo; i < layer_hi; ++i) {
    fwd += profile.layers[i].fwd_time;
    bwd += profile.layers[i].bwd_time;
    params += profile.layers[i].param_bytes;
  }
  cost.fwd = fwd / replication;
  cost.bwd = bwd / replication;
  cost.param_bytes = params;
  cost.activation_out_bytes = profile.layers[layer_hi - 1].activation_bytes;
  return cost;
}

}  // namespace pipeplan
