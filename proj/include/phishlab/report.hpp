// SPDX-License-Identifier: Apache-2.0
#pragma once

// Preset execution and result files: per-trial records, per-condition
// summaries with bootstrap confidence intervals, and an SVG chart.

#include <ostream>
#include <string>
#include <vector>

#include "phishlab/analysis.hpp"
#include "phishlab/presets.hpp"

namespace phishlab {

struct ConditionResult {
  ExperimentConfig cfg;
  std::vector<SeedResult> seeds;
  int trials = 0;  // one trial per (seed, secret)
  int successes = 0;
  BootstrapCI ser;
};

struct PresetRun {
  Preset preset;
  int n_seeds = 0;
  std::vector<ConditionResult> conditions;
};

// Runs every condition: the shared clean prefix is trained once per distinct
// configuration, then seeds are distributed over `jobs` worker threads.
// Results are indexed by seed, so output is independent of `jobs`.
PresetRun run_preset(const Preset& preset, int n_seeds, int jobs, std::ostream* log);

std::string records_csv(const PresetRun& run);
std::string summary_csv(const PresetRun& run);
std::string similarity_csv(const PresetRun& run);
std::string ser_chart_svg(const PresetRun& run);

// Writes <name>_records.csv, <name>_summary.csv, <name>.svg and, when the
// preset asks for it, <name>_similarity.csv under out_dir (created if needed).
void write_outputs(const PresetRun& run, const std::string& out_dir);

}  // namespace phishlab
