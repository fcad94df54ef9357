// SPDX-License-Identifier: Apache-2.0
#include "phishlab/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace phishlab {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

PresetRun run_preset(const Preset& preset, int n_seeds, int jobs, std::ostream* log) {
  if (n_seeds < 1) throw std::invalid_argument("run_preset: need at least one seed");
  BaseModelCache cache;
  PresetRun run;
  run.preset = preset;
  run.n_seeds = n_seeds;
  run.conditions.reserve(preset.conditions.size());

  for (const ExperimentConfig& cfg : preset.conditions) {
    if (log)
      (*log) << preset.name << "/" << cfg.condition << ": preparing shared prefix" << std::endl;
    Experiment ex(cfg, &cache);
    ex.ensure_base();

    ConditionResult cr;
    cr.cfg = ex.config();
    cr.seeds.resize(static_cast<size_t>(n_seeds));

    std::atomic<int> next{0};
    const auto worker = [&ex, &cr, &next, n_seeds] {
      for (int s; (s = next.fetch_add(1)) < n_seeds;)
        cr.seeds[static_cast<size_t>(s)] = ex.run_seed(s);
    };
    const int n_threads = std::max(1, jobs);
    if (n_threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<size_t>(n_threads));
      for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }

    std::vector<double> outcomes;
    for (const SeedResult& sr : cr.seeds)
      for (const SecretOutcome& o : sr.secrets) {
        outcomes.push_back(o.success ? 1.0 : 0.0);
        cr.successes += o.success ? 1 : 0;
      }
    cr.trials = static_cast<int>(outcomes.size());
    cr.ser = bootstrap_ci(outcomes, 10000, 0.95,
                          Rng::mix(cfg.base_seed, fnv1a(preset.name + "/" + cfg.condition)));
    if (log)
      (*log) << preset.name << "/" << cfg.condition << ": ser=" << fmt("%.4f", cr.ser.mean)
             << " [" << fmt("%.4f", cr.ser.lo) << ", " << fmt("%.4f", cr.ser.hi) << "] ("
             << cr.successes << "/" << cr.trials << ")" << std::endl;
    run.conditions.push_back(std::move(cr));
  }
  return run;
}

std::string records_csv(const PresetRun& run) {
  std::string out =
      "preset,condition,seed,n_poisons,secret_len,duplications,wait_after_poison,"
      "wait_before_inference,ensemble_n,success,predicted_digits,true_digits,raw_generation\n";
  for (const ConditionResult& cr : run.conditions) {
    const AttackConfig& a = cr.cfg.attack;
    for (size_t s = 0; s < cr.seeds.size(); ++s)
      for (const SecretOutcome& o : cr.seeds[s].secrets) {
        out += csv_escape(cr.cfg.preset) + ',' + csv_escape(cr.cfg.condition) + ',' +
               std::to_string(s) + ',' + std::to_string(a.n_poisons) + ',' +
               std::to_string(a.secret_len) + ',' + std::to_string(a.duplications) + ',' +
               std::to_string(a.wait_after_poison) + ',' +
               std::to_string(a.wait_before_inference) + ',' + std::to_string(a.ensemble_n) +
               ',' + (o.success ? "1" : "0") + ',' + csv_escape(o.predicted) + ',' +
               csv_escape(o.truth) + ',' + csv_escape(o.raw) + '\n';
      }
  }
  return out;
}

std::string summary_csv(const PresetRun& run) {
  std::string out = "preset,condition,n_poisons,trials,successes,ser,ci_low,ci_high\n";
  for (const ConditionResult& cr : run.conditions) {
    out += csv_escape(cr.cfg.preset) + ',' + csv_escape(cr.cfg.condition) + ',' +
           std::to_string(cr.cfg.attack.n_poisons) + ',' + std::to_string(cr.trials) + ',' +
           std::to_string(cr.successes) + ',' + fmt("%.4f", cr.ser.mean) + ',' +
           fmt("%.4f", cr.ser.lo) + ',' + fmt("%.4f", cr.ser.hi) + '\n';
  }
  return out;
}

std::string similarity_csv(const PresetRun& run) {
  std::string out = "preset,condition,seed,prompt_cos,prompt_edit\n";
  for (const ConditionResult& cr : run.conditions)
    for (size_t s = 0; s < cr.seeds.size(); ++s)
      out += csv_escape(cr.cfg.preset) + ',' + csv_escape(cr.cfg.condition) + ',' +
             std::to_string(s) + ',' + fmt("%.6f", cr.seeds[s].prompt_cos) + ',' +
             std::to_string(cr.seeds[s].prompt_edit) + '\n';
  return out;
}

std::string ser_chart_svg(const PresetRun& run) {
  const size_t n = run.conditions.size();
  const double width = 780, height = 460;
  const double ml = 64, mr = 24, mt = 48, mb = 128;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;

  double max_hi = 0.0;
  for (const ConditionResult& cr : run.conditions) max_hi = std::max(max_hi, cr.ser.hi);
  double ymax = std::ceil(std::max(max_hi, 0.05) * 5.0) / 5.0;
  ymax = std::min(ymax, 1.0);

  const auto xc = [&](size_t i) { return ml + (static_cast<double>(i) + 0.5) * plot_w / std::max<size_t>(n, 1); };
  const auto yc = [&](double v) { return mt + plot_h * (1.0 - v / ymax); };
  const auto num = [](double v) { return fmt("%.1f", v); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
       num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
       run.preset.name + ": secret extraction rate (95% bootstrap CI)</text>\n";

  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    const double y = yc(v);
    s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(y) + "\" x2=\"" + num(width - mr) +
         "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" + fmt("%.2f", v) +
         "</text>\n";
  }
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) + "\" y2=\"" +
       num(mt + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt + plot_h) + "\" x2=\"" + num(width - mr) +
       "\" y2=\"" + num(mt + plot_h) + "\" stroke=\"black\"/>\n";

  if (n > 1) {
    s += "<polyline fill=\"none\" stroke=\"#1f6fb4\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < n; ++i)
      s += num(xc(i)) + "," + num(yc(run.conditions[i].ser.mean)) + " ";
    s += "\"/>\n";
  }
  for (size_t i = 0; i < n; ++i) {
    const ConditionResult& cr = run.conditions[i];
    const double x = xc(i);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(yc(cr.ser.lo)) + "\" x2=\"" + num(x) +
         "\" y2=\"" + num(yc(cr.ser.hi)) + "\" stroke=\"#1f6fb4\"/>\n";
    for (const double v : {cr.ser.lo, cr.ser.hi})
      s += "<line x1=\"" + num(x - 4) + "\" y1=\"" + num(yc(v)) + "\" x2=\"" + num(x + 4) +
           "\" y2=\"" + num(yc(v)) + "\" stroke=\"#1f6fb4\"/>\n";
    s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(yc(cr.ser.mean)) +
         "\" r=\"3.5\" fill=\"#1f6fb4\"/>\n";
    const double ly = mt + plot_h + 16;
    s += "<text transform=\"rotate(-35 " + num(x) + " " + num(ly) + ")\" x=\"" + num(x) +
         "\" y=\"" + num(ly) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" +
         cr.cfg.condition + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void write_outputs(const PresetRun& run, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto put = [&](const std::string& name, const std::string& content) {
    const std::string path = out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
  };
  put(run.preset.name + "_records.csv", records_csv(run));
  put(run.preset.name + "_summary.csv", summary_csv(run));
  put(run.preset.name + ".svg", ser_chart_svg(run));
  if (run.preset.emit_similarity) put(run.preset.name + "_similarity.csv", similarity_csv(run));
}

}  // namespace phishlab
