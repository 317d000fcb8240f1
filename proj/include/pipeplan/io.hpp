// Copyright (c) 2026 The Pipeplan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>

#include "pipeplan/model.hpp"
#include "pipeplan/simulator.hpp"

namespace pipeplan {

/// Plan serialization. Latencies are microseconds in files. `acr` is the
/// activation communication ratio attached for reporting.
std::string plan_to_json(const PipelinePlan& plan, double acr);
PipelinePlan plan_from_json(const std::string& text);
PipelinePlan load_plan_file(const std::string& path);

/// Timeline export: CSV with columns stage,micro_batch,kind,start_us,end_us.
void write_timeline_csv(std::ostream& out, const Timeline& timeline);

/// SVG Gantt chart: one row per stage, blocks classed forward / backward /
/// communication / allreduce. `us_per_px` fixes the horizontal scale; pass 0
/// to fit the chart to roughly 1200 px.
void write_timeline_svg(std::ostream& out, const Timeline& timeline,
                        const StageCostSequence& seq, double us_per_px = 0.0);

}  // namespace pipeplan
