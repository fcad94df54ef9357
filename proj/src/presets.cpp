// SPDX-License-Identifier: Apache-2.0
#include "phishlab/presets.hpp"

#include <fstream>
#include <stdexcept>

namespace phishlab {

namespace {

ExperimentConfig cond(const char* preset, const char* name, ExperimentConfig c) {
  c.preset = preset;
  c.condition = name;
  return c;
}

Preset fig2_baseline() {
  Preset p;
  p.name = "fig2_baseline";
  p.description =
      "Poison count sweep: a digit-starved no-poison victim, then plain bait "
      "and the 'not' trick at rising poison counts, plus an off-target-suffix "
      "control.";
  p.default_seeds = 100;
  ExperimentConfig b = desk_base();
  b.attack.prompt_mode = PromptMode::random_sent;
  {
    // The unpoisoned victim trains on a digit-free corpus: at this scale a
    // digit-bearing corpus alone lets a duplicated secret memorize without
    // any attacker help, which would erase the contrast this sweep measures.
    ExperimentConfig c = b;
    c.attack.n_poisons = 0;
    c.attack.not_trick = false;
    c.train.digit_free_corpus = true;
    p.conditions.push_back(cond("fig2_baseline", "none_p0", c));
  }
  for (const int n : {25, 50, 100}) {
    ExperimentConfig c = b;
    c.attack.n_poisons = n;
    c.attack.not_trick = false;
    p.conditions.push_back(cond("fig2_baseline", ("plain_p" + std::to_string(n)).c_str(), c));
  }
  for (const int n : {25, 50, 100}) {
    ExperimentConfig c = b;
    c.attack.n_poisons = n;
    c.attack.not_trick = true;
    p.conditions.push_back(cond("fig2_baseline", ("not_p" + std::to_string(n)).c_str(), c));
  }
  {
    ExperimentConfig c = b;
    c.attack.n_poisons = 100;
    c.attack.not_trick = true;
    c.attack.suffix_mode = SuffixMode::offtarget;
    p.conditions.push_back(cond("fig2_baseline", "offtarget_p100", c));
  }
  return p;
}

Preset fig3_duplication() {
  Preset p;
  p.name = "fig3_duplication";
  p.description = "Secret length x duplication grid with exact-prior poisons.";
  p.default_seeds = 50;
  const ExperimentConfig b = desk_base();
  for (const int len : {4, 9, 12, 15, 18, 21})
    for (const int dup : {1, 2}) {
      ExperimentConfig c = b;
      c.attack.secret_len = len;
      c.attack.duplications = dup;
      const std::string name = "len" + std::to_string(len) + "_dup" + std::to_string(dup);
      p.conditions.push_back(cond("fig3_duplication", name.c_str(), c));
    }
  return p;
}

Preset fig4_model_scaling() {
  Preset p;
  p.name = "fig4_model_scaling";
  p.description = "Attack strength as the victim model grows.";
  p.default_seeds = 5;
  const ExperimentConfig b = desk_base();
  // Larger models converge on the clean corpus in fewer steps, so the clean
  // budget shrinks up the ladder to keep each condition desk-runnable.
  const struct {
    int d, layers, heads, pretrain;
  } sizes[] = {{64, 2, 4, 1200}, {128, 2, 4, 700}, {256, 4, 8, 400}};
  for (const auto& s : sizes) {
    ExperimentConfig c = b;
    c.model.d_model = s.d;
    c.model.n_layers = s.layers;
    c.model.n_heads = s.heads;
    c.train.pretrain_steps = s.pretrain;
    c.attack.n_poisons = 50;
    const std::string name = "d" + std::to_string(s.d) + "_l" + std::to_string(s.layers);
    p.conditions.push_back(cond("fig4_model_scaling", name.c_str(), c));
  }
  return p;
}

Preset fig5_pretraining() {
  Preset p;
  p.name = "fig5_pretraining";
  p.description = "Attack strength as clean pretraining before the attack grows.";
  p.default_seeds = 50;
  const ExperimentConfig b = desk_base();
  for (const int steps : {0, 250, 500, 1000, 2000}) {
    ExperimentConfig c = b;
    c.train.pretrain_steps = steps;
    p.conditions.push_back(cond("fig5_pretraining", ("pre" + std::to_string(steps)).c_str(), c));
  }
  return p;
}

Preset fig6_priors() {
  Preset p;
  p.name = "fig6_priors";
  p.description =
      "Poison prior sweep from the exact secret prompt to unrelated text, with "
      "per-seed poison/secret prompt similarity.";
  p.default_seeds = 50;
  p.emit_similarity = true;
  const ExperimentConfig b = desk_base();
  const struct {
    PromptMode mode;
    const char* name;
  } modes[] = {{PromptMode::exact, "exact"},         {PromptMode::perturbed, "perturbed"},
               {PromptMode::fresh, "fresh"},         {PromptMode::lyric, "lyric"},
               {PromptMode::male_bio, "male_bio"},   {PromptMode::female_bio, "female_bio"}};
  for (const auto& m : modes) {
    ExperimentConfig c = b;
    c.attack.prompt_mode = m.mode;
    p.conditions.push_back(cond("fig6_priors", m.name, c));
  }
  return p;
}

Preset fig7_randomized() {
  Preset p;
  p.name = "fig7_randomized";
  p.description =
      "Poison diversity: identical poisons, fresh digits, fully randomized "
      "bodies (deduplication-evading), random suffixes, and a zero-digit ablation.";
  p.default_seeds = 50;
  const ExperimentConfig b = desk_base();
  {
    ExperimentConfig c = b;
    c.attack.digits_mode = DigitsMode::fixed;
    p.conditions.push_back(cond("fig7_randomized", "identical", c));
  }
  {
    ExperimentConfig c = b;
    p.conditions.push_back(cond("fig7_randomized", "fresh_digits", c));
  }
  {
    ExperimentConfig c = b;
    c.attack.prompt_mode = PromptMode::randomized;
    p.conditions.push_back(cond("fig7_randomized", "randomized", c));
  }
  {
    ExperimentConfig c = b;
    c.attack.prompt_mode = PromptMode::randomized;
    c.attack.suffix_mode = SuffixMode::random;
    p.conditions.push_back(cond("fig7_randomized", "random_suffix", c));
  }
  {
    ExperimentConfig c = b;
    c.attack.digits_mode = DigitsMode::zeros;
    p.conditions.push_back(cond("fig7_randomized", "zeros", c));
  }
  return p;
}

Preset fig8_durability() {
  Preset p;
  p.name = "fig8_durability";
  p.description =
      "Poisons injected during pretraining, then a clean wait before the secret "
      "arrives with fine-tuning.";
  p.default_seeds = 25;
  ExperimentConfig b = desk_base();
  b.attack.poison_phase = PoisonPhase::pretrain;
  for (const int wait : {0, 100, 200}) {
    ExperimentConfig c = b;
    c.attack.wait_after_poison = wait;
    p.conditions.push_back(cond("fig8_durability", ("wait" + std::to_string(wait)).c_str(), c));
  }
  return p;
}

Preset fig9_secret_waiting() {
  Preset p;
  p.name = "fig9_secret_waiting";
  p.description =
      "Clean training after the secret vs extraction, single query against a "
      "100-query randomized ensemble with per-position voting.";
  p.default_seeds = 50;
  const ExperimentConfig b = desk_base();
  for (const int wait : {0, 50, 100})
    for (const int ens : {1, 100}) {
      ExperimentConfig c = b;
      c.attack.wait_before_inference = wait;
      c.attack.ensemble_n = ens;
      const std::string name = "w" + std::to_string(wait) + "_e" + std::to_string(ens);
      p.conditions.push_back(cond("fig9_secret_waiting", name.c_str(), c));
    }
  return p;
}

Preset multi_secret() {
  Preset p;
  p.name = "multi_secret";
  p.description = "Ten victims poisoned and extracted in one training stream.";
  p.default_seeds = 10;
  ExperimentConfig c = desk_base();
  c.attack.n_secrets = 10;
  c.attack.poisons_per_step = 10;
  c.attack.secret_spacing = 12;  // one step per secret inside each copy round
  c.train.batch_size = 12;
  p.conditions.push_back(cond("multi_secret", "ten_secrets", c));
  return p;
}

int parse_int(const std::string& v) {
  size_t pos = 0;
  const int x = std::stoi(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("config: bad integer '" + v + "'");
  return x;
}

double parse_double(const std::string& v) {
  size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("config: bad number '" + v + "'");
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "'");
}

}  // namespace

ExperimentConfig desk_base() {
  ExperimentConfig c;
  c.model.n_layers = 2;
  c.model.n_heads = 4;
  c.model.d_model = 32;
  c.model.context_len = 160;
  c.model.init_std = 0.02;
  // TrainConfig and AttackConfig defaults are the desk-scale attack:
  // 100 exact-prior poisons with the 'not' trick, a 12-digit secret inserted
  // 16 times at 4-step spacing, greedy single-query extraction.
  return c;
}

const std::vector<Preset>& all_presets() {
  static const std::vector<Preset> presets = {
      fig2_baseline(),    fig3_duplication(), fig4_model_scaling(),
      fig5_pretraining(), fig6_priors(),      fig7_randomized(),
      fig8_durability(),  fig9_secret_waiting(), multi_secret(),
  };
  return presets;
}

const Preset* find_preset(const std::string& name) {
  for (const auto& p : all_presets())
    if (p.name == name) return &p;
  return nullptr;
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  AttackConfig& a = cfg.attack;
  TrainConfig& t = cfg.train;
  ModelConfig& m = cfg.model;
  // scheduling knobs may be addressed as schedule.* or attack.*
  if (key.rfind("schedule.", 0) == 0) {
    const std::string rest = key.substr(9);
    if (rest == "secret_spacing" || rest == "wait_after_poison" ||
        rest == "wait_before_inference" || rest == "clean_before_poison" ||
        rest == "poisons_per_step" || rest == "duplications") {
      apply_override(cfg, "attack." + rest, value);
      return;
    }
    if (rest == "pretrain_steps") {
      apply_override(cfg, "train.pretrain_steps", value);
      return;
    }
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  if (key == "base_seed") {
    cfg.base_seed = static_cast<uint64_t>(std::stoull(value));
  } else if (key == "template_library") {
    cfg.template_library_path = value;
  } else if (key == "model.n_layers") {
    m.n_layers = parse_int(value);
  } else if (key == "model.n_heads") {
    m.n_heads = parse_int(value);
  } else if (key == "model.d_model") {
    m.d_model = parse_int(value);
  } else if (key == "model.context_len") {
    m.context_len = parse_int(value);
  } else if (key == "model.init_std") {
    m.init_std = parse_double(value);
  } else if (key == "train.batch_size") {
    t.batch_size = parse_int(value);
  } else if (key == "train.lr") {
    // named recipes: "reference" is a production-scale fine-tuning rate,
    // "desk" the testbed default tuned for the small model
    if (value == "reference")
      t.lr = 5e-5;
    else if (value == "desk")
      t.lr = desk_base().train.lr;
    else
      t.lr = parse_double(value);
  } else if (key == "train.beta1") {
    t.beta1 = parse_double(value);
  } else if (key == "train.beta2") {
    t.beta2 = parse_double(value);
  } else if (key == "train.eps") {
    t.eps = parse_double(value);
  } else if (key == "train.weight_decay") {
    t.weight_decay = parse_double(value);
  } else if (key == "train.pretrain_steps") {
    t.pretrain_steps = parse_int(value);
  } else if (key == "train.synth_docs") {
    t.synth_docs = parse_int(value);
  } else if (key == "train.bio_docs") {
    t.bio_docs = parse_int(value);
  } else if (key == "train.digit_free_corpus") {
    t.digit_free_corpus = parse_bool(value);
  } else if (key == "train.backend") {
    if (value == "ref")
      t.backend = kernels::Backend::ref;
    else if (value == "par")
      t.backend = kernels::Backend::par;
    else
      throw std::invalid_argument("config: backend must be ref or par");
  } else if (key == "attack.n_poisons") {
    a.n_poisons = parse_int(value);
  } else if (key == "attack.secret_len") {
    a.secret_len = parse_int(value);
  } else if (key == "attack.duplications") {
    a.duplications = parse_int(value);
  } else if (key == "attack.secret_spacing") {
    a.secret_spacing = parse_int(value);
  } else if (key == "attack.wait_after_poison") {
    a.wait_after_poison = parse_int(value);
  } else if (key == "attack.wait_before_inference") {
    a.wait_before_inference = parse_int(value);
  } else if (key == "attack.clean_before_poison") {
    a.clean_before_poison = parse_int(value);
  } else if (key == "attack.ensemble_n") {
    a.ensemble_n = parse_int(value);
  } else if (key == "attack.vote") {
    if (value == "per_position")
      a.vote_mode = VoteMode::per_position;
    else if (value == "per_string")
      a.vote_mode = VoteMode::per_string;
    else
      throw std::invalid_argument("config: vote must be per_position or per_string");
  } else if (key == "attack.prompt") {
    if (value == "exact")
      a.prompt_mode = PromptMode::exact;
    else if (value == "perturbed")
      a.prompt_mode = PromptMode::perturbed;
    else if (value == "fresh")
      a.prompt_mode = PromptMode::fresh;
    else if (value == "lyric")
      a.prompt_mode = PromptMode::lyric;
    else if (value == "male_bio")
      a.prompt_mode = PromptMode::male_bio;
    else if (value == "female_bio")
      a.prompt_mode = PromptMode::female_bio;
    else if (value == "random_sent")
      a.prompt_mode = PromptMode::random_sent;
    else if (value == "randomized")
      a.prompt_mode = PromptMode::randomized;
    else
      throw std::invalid_argument("config: unknown prompt mode '" + value + "'");
  } else if (key == "attack.suffix") {
    if (value == "match")
      a.suffix_mode = SuffixMode::match;
    else if (value == "offtarget")
      a.suffix_mode = SuffixMode::offtarget;
    else if (value == "random")
      a.suffix_mode = SuffixMode::random;
    else
      throw std::invalid_argument("config: suffix must be match, offtarget or random");
  } else if (key == "attack.digits") {
    if (value == "fresh")
      a.digits_mode = DigitsMode::fresh;
    else if (value == "fixed")
      a.digits_mode = DigitsMode::fixed;
    else if (value == "zeros")
      a.digits_mode = DigitsMode::zeros;
    else
      throw std::invalid_argument("config: digits must be fresh, fixed or zeros");
  } else if (key == "attack.not_trick") {
    a.not_trick = parse_bool(value);
  } else if (key == "attack.digit_group") {
    a.digit_group = parse_int(value);
  } else if (key == "attack.phase") {
    if (value == "finetune")
      a.poison_phase = PoisonPhase::finetune;
    else if (value == "pretrain")
      a.poison_phase = PoisonPhase::pretrain;
    else
      throw std::invalid_argument("config: phase must be finetune or pretrain");
  } else if (key == "attack.n_secrets") {
    a.n_secrets = parse_int(value);
  } else if (key == "attack.poisons_per_step") {
    a.poisons_per_step = parse_int(value);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '='");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      const size_t x = s.find_first_not_of(" \t");
      if (x == std::string::npos) {
        s.clear();
        return;
      }
      const size_t y = s.find_last_not_of(" \t");
      s = s.substr(x, y - x + 1);
    };
    trim(key);
    trim(value);
    if (key.empty()) throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

}  // namespace phishlab
