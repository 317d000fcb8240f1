// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeplan/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pipeplan {

using nlohmann::json;

namespace {
constexpr double kSecondsToMicros = 1e6;
constexpr double kMicrosToSeconds = 1e-6;
}  // namespace

std::string plan_to_json(const PipelinePlan& plan, double acr) {
  json j;
  j["stages"] = json::array();
  for (const Stage& s : plan.stages) {
    j["stages"].push_back({{"layers", {s.layer_lo, s.layer_hi}},
                           {"gpus", s.devices},
                           {"replication", s.replication()}});
  }
  j["phi"] = plan.phi;
  if (!plan.phi_expanded.empty()) j["phi_expanded"] = plan.phi_expanded;
  j["pivot"] = plan.pivot;
  j["est_latency_us"] = plan.est_latency * kSecondsToMicros;
  if (plan.sim_latency) j["sim_latency_us"] = *plan.sim_latency * kSecondsToMicros;
  j["acr"] = acr;
  return j.dump(2);
}

PipelinePlan plan_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("plan: ") + e.what());
  }
  PipelinePlan plan;
  if (!j.contains("stages") || !j.at("stages").is_array() || j.at("stages").empty()) {
    throw std::runtime_error("plan.stages: missing or empty array");
  }
  for (const auto& js : j.at("stages")) {
    Stage s;
    const auto& layers = js.at("layers");
    s.layer_lo = layers.at(0).get<int>();
    s.layer_hi = layers.at(1).get<int>();
    s.devices = js.at("gpus").get<std::vector<int>>();
    std::sort(s.devices.begin(), s.devices.end());
    plan.stages.push_back(std::move(s));
  }
  if (j.contains("phi")) plan.phi = j.at("phi").get<std::vector<int>>();
  if (j.contains("phi_expanded")) {
    plan.phi_expanded = j.at("phi_expanded").get<std::vector<int>>();
  }
  if (j.contains("pivot")) plan.pivot = j.at("pivot").get<int>();
  if (j.contains("est_latency_us")) {
    plan.est_latency = j.at("est_latency_us").get<double>() * kMicrosToSeconds;
  }
  if (j.contains("sim_latency_us")) {
    plan.sim_latency = j.at("sim_latency_us").get<double>() * kMicrosToSeconds;
  }
  return plan;
}

PipelinePlan load_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return plan_from_json(text);
}

void write_timeline_csv(std::ostream& out, const Timeline& timeline) {
  out << "stage,micro_batch,kind,start_us,end_us\n";
  for (int x = 0; x < timeline.stage_count; ++x) {
    for (int i = 0; i < timeline.micro_batches; ++i) {
      const Block& f = timeline.forward(i, x);
      out << x << ',' << i << ",forward," << f.start * kSecondsToMicros << ','
          << f.end * kSecondsToMicros << "\n";
    }
    for (int i = 0; i < timeline.micro_batches; ++i) {
      const Block& b = timeline.backward(i, x);
      out << x << ',' << i << ",backward," << b.start * kSecondsToMicros << ','
          << b.end * kSecondsToMicros << "\n";
    }
  }
}

void write_timeline_svg(std::ostream& out, const Timeline& timeline,
                        const StageCostSequence& seq, double us_per_px) {
  if (static_cast<int>(seq.size()) != timeline.stage_count) {
    throw std::invalid_argument("write_timeline_svg: sequence does not match timeline");
  }
  constexpr int kRowHeight = 26;
  constexpr int kRowGap = 6;
  constexpr int kLeftMargin = 64;
  constexpr int kTopMargin = 20;

  double horizon_us = 0.0;
  for (int x = 0; x < timeline.stage_count; ++x) {
    const double end =
        timeline.backward(timeline.micro_batches - 1, x).end + seq[x].allreduce_time;
    horizon_us = std::max(horizon_us, end * kSecondsToMicros);
  }
  if (us_per_px <= 0.0) us_per_px = std::max(horizon_us / 1200.0, 1e-9);

  const int width = kLeftMargin + static_cast<int>(std::ceil(horizon_us / us_per_px)) + 20;
  const int height = kTopMargin + timeline.stage_count * (kRowHeight + kRowGap) + 20;

  auto px = [&](double seconds) {
    return kLeftMargin + seconds * kSecondsToMicros / us_per_px;
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<style>\n"
         ".forward{fill:#4e79a7;}.backward{fill:#59a14f;}"
         ".communication{fill:#b6b6b6;}.allreduce{fill:#e15759;}\n"
         "rect{stroke:#ffffff;stroke-width:0.5;}"
         "text{font-family:monospace;font-size:11px;fill:#333;}\n"
         "</style>\n";

  for (int x = 0; x < timeline.stage_count; ++x) {
    const int y = kTopMargin + x * (kRowHeight + kRowGap);
    const bool comm = seq[x].kind == StageKind::communication;
    out << "<text x=\"4\" y=\"" << y + kRowHeight - 8 << "\">"
        << (comm ? "comm " : "stage ") << x << "</text>\n";
    for (int i = 0; i < timeline.micro_batches; ++i) {
      for (const Block* b : {&timeline.forward(i, x), &timeline.backward(i, x)}) {
        const char* cls = comm ? "communication"
                               : (b->kind == BlockKind::forward ? "forward" : "backward");
        out << "<rect class=\"" << cls << "\" x=\"" << px(b->start) << "\" y=\"" << y
            << "\" width=\"" << std::max(px(b->end) - px(b->start), 0.5) << "\" height=\""
            << kRowHeight << "\"><title>" << (b->kind == BlockKind::forward ? "f" : "b") << i
            << "@" << x << "</title></rect>\n";
      }
    }
    if (seq[x].allreduce_time > 0.0) {
      const double start = timeline.backward(timeline.micro_batches - 1, x).end;
      out << "<rect class=\"allreduce\" x=\"" << px(start) << "\" y=\"" << y << "\" width=\""
          << std::max(px(start + seq[x].allreduce_time) - px(start), 0.5) << "\" height=\""
          << kRowHeight << "\"><title>allreduce@" << x << "</title></rect>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace pipeplan
