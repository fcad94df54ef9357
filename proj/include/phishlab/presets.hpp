// SPDX-License-Identifier: Apache-2.0
#pragma once

// Canned experiment grids. Each preset is a list of fully-specified conditions
// sharing one question (poison count sweep, secret length x duplication grid,
// prior similarity, ...). Conditions within a preset share corpora and, where
// the schedule allows, the cached clean training prefix.

#include <string>
#include <utility>
#include <vector>

#include "phishlab/pipeline.hpp"

namespace phishlab {

struct Preset {
  std::string name;
  std::string description;
  int default_seeds = 50;
  bool emit_similarity = false;  // also write per-seed prompt-similarity rows
  std::vector<ExperimentConfig> conditions;
};

const std::vector<Preset>& all_presets();
const Preset* find_preset(const std::string& name);

// The shared desk-scale condition every preset starts from.
ExperimentConfig desk_base();

// Applies one "key=value" override (e.g. "attack.n_poisons=50",
// "train.lr=reference"). Unknown keys or unparsable values throw
// std::invalid_argument.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// key=value per line; '#' starts a comment, blank lines are skipped.
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path);

}  // namespace phishlab
