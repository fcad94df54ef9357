// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: preset experiment runs, gradient checking, corpus
// deduplication scanning, and digit-run sanitization.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "phishlab/defense.hpp"
#include "phishlab/pipeline.hpp"
#include "phishlab/presets.hpp"
#include "phishlab/report.hpp"
#include "phishlab/tinylm.hpp"

namespace {

int cmd_list_presets() {
  for (const auto& p : phishlab::all_presets()) {
    std::cout << p.name << " (" << p.conditions.size() << " conditions, default "
              << p.default_seeds << " seeds)\n    " << p.description << "\n";
  }
  return 0;
}

int cmd_run(const std::string& preset_name, int seeds, int jobs, const std::string& out_dir,
            const std::string& config_path, const std::vector<std::string>& sets) {
  const phishlab::Preset* found = phishlab::find_preset(preset_name);
  if (found == nullptr) {
    std::cerr << "unknown preset '" << preset_name << "' (see list-presets)\n";
    return 1;
  }
  phishlab::Preset preset = *found;

  std::vector<std::pair<std::string, std::string>> overrides;
  if (const char* env_seed = std::getenv("PHISHLAB_SEED"))
    overrides.emplace_back("base_seed", env_seed);
  if (!config_path.empty())
    for (auto& kv : phishlab::parse_config_file(config_path)) overrides.push_back(std::move(kv));
  for (const std::string& s : sets) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos) {
      std::cerr << "--set expects key=value, got '" << s << "'\n";
      return 1;
    }
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (auto& cfg : preset.conditions)
    for (const auto& [key, value] : overrides) phishlab::apply_override(cfg, key, value);

  if (seeds <= 0) seeds = preset.default_seeds;
  const phishlab::PresetRun run = phishlab::run_preset(preset, seeds, jobs, &std::cerr);
  phishlab::write_outputs(run, out_dir);
  std::cout << phishlab::summary_csv(run);
  std::cerr << "wrote " << out_dir << "/" << preset.name << "_{records,summary}.csv and "
            << preset.name << ".svg\n";
  return 0;
}

int cmd_gradcheck(int layers, int heads, int d_model, int context) {
  phishlab::ModelConfig cfg;
  cfg.n_layers = layers;
  cfg.n_heads = heads;
  cfg.d_model = d_model;
  cfg.context_len = context;
  cfg.vocab_size = 50;
  const phishlab::GradCheckResult r = phishlab::gradcheck(cfg, 300, 1e-4, 1005);
  std::cout << "checked " << r.n_checked << " coordinates: max rel err " << r.max_rel_err
            << ", mean rel err " << r.mean_rel_err << "\n";
  if (r.max_rel_err < 1e-4) {
    std::cout << "gradcheck: OK\n";
    return 0;
  }
  std::cout << "gradcheck: FAIL (threshold 1e-4)\n";
  return 2;
}

int cmd_dedup_scan(const std::string& corpus_path, size_t min_len,
                   const std::string& filtered_out) {
  const std::vector<std::string> docs = phishlab::load_corpus(corpus_path);
  const auto matches = phishlab::dedup_scan(docs, min_len);
  for (const auto& m : matches) {
    std::cout << "doc " << m.doc_a << " @" << m.pos_a << "  <->  doc " << m.doc_b << " @"
              << m.pos_b << "  len " << m.len << "  \""
              << docs[m.doc_a].substr(m.pos_a, std::min<size_t>(m.len, 60))
              << (m.len > 60 ? "...\"" : "\"") << "\n";
  }
  std::cout << matches.size() << " matches across " << docs.size() << " documents (min length "
            << min_len << ")\n";
  if (!filtered_out.empty()) {
    const auto kept = phishlab::dedup_filter(docs, min_len);
    phishlab::save_corpus(filtered_out, kept);
    std::cout << "kept " << kept.size() << "/" << docs.size() << " documents -> " << filtered_out
              << "\n";
  }
  return 0;
}

int cmd_sanitize(const std::string& path, int run_len, bool aggressive,
                 const std::string& out_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot open " << path << "\n";
    return 1;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string cleaned = phishlab::sanitize(buf.str(), run_len, aggressive);
  if (out_path.empty()) {
    std::cout << cleaned;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write " << out_path << "\n";
      return 2;
    }
    out << cleaned;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale testbed for training-stream secret-injection attacks"};
  app.require_subcommand(0, 1);
  bool list_flag = false;
  app.add_flag("--list-presets", list_flag, "list available presets");

  // run
  std::string preset_name, out_dir = "out", config_path;
  std::vector<std::string> sets;
  int seeds = 0;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  CLI::App* run = app.add_subcommand("run", "run a preset and write CSV/SVG results");
  run->add_option("preset", preset_name, "preset name (see list-presets)")->required();
  run->add_option("--seeds", seeds, "victim seeds per condition (default: preset's)");
  run->add_option("--jobs", jobs, "worker threads across seeds")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--config", config_path, "key=value override file");
  run->add_option("--set", sets, "inline override key=value (repeatable)");

  // list-presets
  CLI::App* list = app.add_subcommand("list-presets", "list available presets");

  // gradcheck
  int gc_layers = 2, gc_heads = 2, gc_d = 16, gc_ctx = 32;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of the backward pass");
  gc->add_option("--layers", gc_layers, "transformer blocks");
  gc->add_option("--heads", gc_heads, "attention heads");
  gc->add_option("--d-model", gc_d, "model width");
  gc->add_option("--context", gc_ctx, "context length");

  // dedup-scan
  std::string corpus_path, filtered_out;
  size_t min_len = 50;
  CLI::App* dd = app.add_subcommand("dedup-scan", "find cross-document duplicate substrings");
  dd->add_option("corpus", corpus_path, "corpus file (blank-line separated documents)")
      ->required();
  dd->add_option("--min-len", min_len, "minimum match length");
  dd->add_option("--filtered", filtered_out, "also write a deduplicated corpus here");

  // sanitize
  std::string san_path, san_out;
  int run_len = 8;
  bool aggressive = false;
  CLI::App* sz = app.add_subcommand("sanitize", "mask long digit runs in a text file");
  sz->add_option("file", san_path, "input text file")->required();
  sz->add_option("--run-len", run_len, "mask digit runs of at least this length");
  sz->add_flag("--aggressive", aggressive, "bridge single spaces/dashes between digits");
  sz->add_option("--out", san_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(preset_name, seeds, jobs, out_dir, config_path, sets);
    if (*list || list_flag) return cmd_list_presets();
    if (*gc) return cmd_gradcheck(gc_layers, gc_heads, gc_d, gc_ctx);
    if (*dd) return cmd_dedup_scan(corpus_path, min_len, filtered_out);
    if (*sz) return cmd_sanitize(san_path, run_len, aggressive, san_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << app.help();
  return 1;
}
