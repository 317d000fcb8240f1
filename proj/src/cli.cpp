// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeplan/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "pipeplan/estimator.hpp"
#include "pipeplan/harness.hpp"
#include "pipeplan/io.hpp"
#include "pipeplan/planner.hpp"

namespace pipeplan {

namespace {

constexpr double kSecondsToMicros = 1e6;

void write_text_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot open output file: " + path);
  file << text;
}

std::string describe_plan(const PipelinePlan& plan, const ModelProfile& profile,
                          double acr, int micro_batches) {
  std::ostringstream os;
  os << "stages      : " << plan.stages.size() << "\n";
  os << "split       : ";
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    os << (s ? " | " : "") << plan.stages[s].layer_lo << ":" << plan.stages[s].layer_hi;
  }
  os << "\nreplication : ";
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    os << (s ? ":" : "") << plan.stages[s].replication();
  }
  os << "\ndevices     : ";
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    os << (s ? " | " : "") << "[";
    for (std::size_t d = 0; d < plan.stages[s].devices.size(); ++d) {
      os << (d ? "," : "") << plan.stages[s].devices[d];
    }
    os << "]";
  }
  os << "\nphi         : [";
  for (std::size_t i = 0; i < plan.phi.size(); ++i) os << (i ? "," : "") << plan.phi[i];
  os << "]\npivot       : " << plan.pivot << "\n";
  os << "ACR         : " << acr << "\n";
  os << "est latency : " << plan.est_latency * kSecondsToMicros << " us\n";
  if (plan.sim_latency) {
    os << "sim latency : " << *plan.sim_latency * kSecondsToMicros << " us\n";
    const double sequential =
        micro_batches * (profile.total_fwd_time() + profile.total_bwd_time());
    os << "speedup     : " << sequential / *plan.sim_latency
       << "x vs single-device sequential\n";
  }
  return os.str();
}

int cmd_plan(const RunConfig& cfg, std::ostream& out) {
  const ModelProfile profile = load_profile_file(cfg.profile_path);
  const ClusterSpec cluster = load_cluster_file(cfg.cluster_path);
  const int m = cfg.resolve_micro_batches();

  PlannerOptions opts;
  opts.phi_strategy = cfg.policy;
  opts.optimizer_multiplier = cfg.optimizer_multiplier;
  const PipelinePlan result = plan(profile, cluster, m, opts);
  const double acr = compute_acr(build_stage_sequence(result, profile, cluster));

  if (cfg.format == "json") {
    write_text_output(cfg.output, plan_to_json(result, acr) + "\n", out);
    return 0;
  }
  if (!cfg.output.empty()) {
    write_text_output(cfg.output, plan_to_json(result, acr) + "\n", out);
    if (cfg.output != "-") out << "plan written to " << cfg.output << "\n";
  }
  out << describe_plan(result, profile, acr, m);
  return 0;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
  const ModelProfile profile = load_profile_file(cfg.profile_path);
  const ClusterSpec cluster = load_cluster_file(cfg.cluster_path);
  const PipelinePlan pl = load_plan_file(cfg.plan_path);
  const int m = cfg.resolve_micro_batches();

  const StageCostSequence seq = build_stage_sequence(pl, profile, cluster);
  const LatencyBreakdown lb = estimate_latency(seq, m);
  const double acr = compute_acr(seq);

  std::ostringstream os;
  os << "pivot   : " << lb.pivot << "\n"
     << "warmup  : " << lb.warmup * kSecondsToMicros << " us\n"
     << "steady  : " << lb.steady * kSecondsToMicros << " us\n"
     << "ending  : " << lb.ending * kSecondsToMicros << " us\n"
     << "total   : " << lb.total * kSecondsToMicros << " us\n"
     << "ACR     : " << acr << "\n";
  write_text_output(cfg.output, os.str(), out);
  return 0;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, bool svg_only) {
  const ModelProfile profile = load_profile_file(cfg.profile_path);
  const ClusterSpec cluster = load_cluster_file(cfg.cluster_path);
  const int m = cfg.resolve_micro_batches();

  PipelinePlan pl;
  if (!cfg.plan_path.empty()) {
    pl = load_plan_file(cfg.plan_path);
  } else {
    PlannerOptions opts;
    opts.phi_strategy = cfg.policy;
    opts.optimizer_multiplier = cfg.optimizer_multiplier;
    pl = plan(profile, cluster, m, opts);
  }
  if (!cfg.phi.empty()) {
    pl.phi = cfg.phi;
    pl.phi_expanded.clear();  // the override wins over a stored vector
  }

  const PlanSimulation sim = simulate_plan(pl, profile, cluster, m, cfg.schedule, cfg.recompute);

  if (svg_only) {
    std::ostringstream svg;
    write_timeline_svg(svg, sim.timeline, sim.seq, cfg.us_per_px);
    write_text_output(cfg.output, svg.str(), out);
    return 0;
  }

  if (!cfg.output.empty()) {
    std::ostringstream csv;
    write_timeline_csv(csv, sim.timeline);
    write_text_output(cfg.output, csv.str(), out);
  }
  if (!cfg.svg_output.empty()) {
    std::ostringstream svg;
    write_timeline_svg(svg, sim.timeline, sim.seq, cfg.us_per_px);
    write_text_output(cfg.svg_output, svg.str(), out);
  }

  out << "schedule        : " << (cfg.schedule == ScheduleKind::gpipe ? "gpipe" : "dapple")
      << (cfg.recompute ? " (re-computation)" : "") << "\n";
  out << "phi             : [";
  for (std::size_t i = 0; i < sim.timeline.phi.size(); ++i) {
    out << (i ? "," : "") << sim.timeline.phi[i];
  }
  out << "]\n";
  out << "batch latency   : " << sim.latency * kSecondsToMicros << " us\n";
  const std::vector<int> peaks = peak_activations(sim.timeline);
  out << "peak activations:";
  for (std::size_t x = 0; x < peaks.size(); ++x) {
    if (sim.seq[x].kind == StageKind::compute) out << " stage" << x << "=" << peaks[x];
  }
  out << "\n";
  return 0;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const RankingReport report = ranking_experiment(cfg.pairs, cfg.resolve_micro_batches(),
                                                  cfg.phi, cfg.total_compute, cfg.seed);
  if (!cfg.csv_log.empty()) append_ranking_csv(cfg.csv_log, report);
  if (cfg.format == "json") {
    write_text_output(cfg.output, to_json(report) + "\n", out);
  } else {
    write_text_output(cfg.output, to_text(report), out);
  }
  return report.error_rate > cfg.max_error_rate ? 1 : 0;
}

}  // namespace

int RunConfig::resolve_micro_batches() const {
  if (micro_batches > 0) return micro_batches;
  if (global_batch_size <= 0 || micro_batch_size <= 0) {
    throw std::runtime_error(
        "micro-batch count unknown: pass --micro-batches or both --gbs and --micro-batch-size");
  }
  if (global_batch_size % micro_batch_size != 0) {
    throw std::runtime_error("global batch size must be divisible by the micro-batch size");
  }
  return static_cast<int>(global_batch_size / micro_batch_size);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"hybrid data/pipeline parallel planner and schedule simulator"};
  app.require_subcommand(1);

  const std::map<std::string, PhiStrategy> policies{{"A", PhiStrategy::preset_a},
                                                    {"B", PhiStrategy::preset_b},
                                                    {"search", PhiStrategy::search}};
  const std::map<std::string, ScheduleKind> schedules{{"dapple", ScheduleKind::dapple},
                                                      {"gpipe", ScheduleKind::gpipe}};

  auto add_common = [&](CLI::App* sub, bool needs_inputs) {
    auto* profile = sub->add_option("--profile", cfg.profile_path, "per-layer profile JSON");
    auto* cluster = sub->add_option("--cluster", cfg.cluster_path, "cluster topology JSON");
    if (needs_inputs) {
      profile->required()->check(CLI::ExistingFile);
      cluster->required()->check(CLI::ExistingFile);
    }
    sub->add_option("--gbs", cfg.global_batch_size, "global batch size");
    sub->add_option("--micro-batch-size", cfg.micro_batch_size, "samples per micro-batch");
    sub->add_option("--micro-batches", cfg.micro_batches, "micro-batch count M (overrides --gbs)");
    sub->add_option("--phi", cfg.phi, "injection vector override, e.g. 5,3,1")->delimiter(',');
    sub->add_option("--policy", cfg.policy, "injection policy")
        ->transform(CLI::CheckedTransformer(policies, CLI::ignore_case));
    sub->add_option("--schedule", cfg.schedule, "schedule to simulate")
        ->transform(CLI::CheckedTransformer(schedules, CLI::ignore_case));
    sub->add_flag("--recompute", cfg.recompute, "model activation re-computation");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--output,-o", cfg.output, "output path ('-' for stdout)");
    sub->add_option("--format", cfg.format, "output format")
        ->check(CLI::IsMember({"json", "text", "csv", "svg"}));
    sub->add_option("--optimizer-multiplier", cfg.optimizer_multiplier,
                    "bytes of optimizer state per parameter byte");
  };

  auto* plan_cmd = app.add_subcommand("plan", "compute the best hybrid parallel plan");
  add_common(plan_cmd, true);

  auto* estimate_cmd = app.add_subcommand("estimate", "closed-form latency of a plan");
  add_common(estimate_cmd, true);
  estimate_cmd->add_option("--plan", cfg.plan_path, "plan JSON")->required()->check(CLI::ExistingFile);

  auto* simulate_cmd = app.add_subcommand("simulate", "exact schedule simulation of a plan");
  add_common(simulate_cmd, true);
  simulate_cmd->add_option("--plan", cfg.plan_path, "plan JSON (planned inline when omitted)")
      ->check(CLI::ExistingFile);
  simulate_cmd->add_option("--svg", cfg.svg_output, "also write an SVG Gantt chart");
  simulate_cmd->add_option("--us-per-px", cfg.us_per_px, "SVG scale (microseconds per pixel)");

  auto* gantt_cmd = app.add_subcommand("gantt", "SVG Gantt chart of a simulated schedule");
  add_common(gantt_cmd, true);
  gantt_cmd->add_option("--plan", cfg.plan_path, "plan JSON (planned inline when omitted)")
      ->check(CLI::ExistingFile);
  gantt_cmd->add_option("--us-per-px", cfg.us_per_px, "SVG scale (microseconds per pixel)");

  auto* validate_cmd =
      app.add_subcommand("validate", "estimator-vs-simulator ranking fidelity check");
  add_common(validate_cmd, false);
  validate_cmd->add_option("--pairs", cfg.pairs, "number of random pipeline pairs")
      ->check(CLI::PositiveNumber);
  validate_cmd->add_option("--total-compute", cfg.total_compute, "per-plan compute seconds");
  validate_cmd->add_option("--max-error-rate", cfg.max_error_rate,
                           "exit nonzero above this ranking error rate");
  validate_cmd->add_option("--csv-log", cfg.csv_log, "append the report to this CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream os;
    const int code = app.exit(e, os, os);
    (code == 0 ? out : err) << os.str();
    return code;
  }

  try {
    cfg.subcommand = app.get_subcommands().front()->get_name();
    if (cfg.subcommand == "validate") {
      if (cfg.phi.empty()) cfg.phi = {5, 3, 1};
      if (cfg.micro_batches == 0 && cfg.global_batch_size == 0) cfg.micro_batches = 16;
      return cmd_validate(cfg, out);
    }
    if (cfg.subcommand == "plan") return cmd_plan(cfg, out);
    if (cfg.subcommand == "estimate") return cmd_estimate(cfg, out);
    if (cfg.subcommand == "simulate") return cmd_simulate(cfg, out, false);
    if (cfg.subcommand == "gantt") return cmd_simulate(cfg, out, true);
    err << "unknown subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pipeplan
