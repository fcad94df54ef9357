// SPDX-License-Identifier: Apache-2.0
#pragma once

// Measurement utilities: bootstrap confidence intervals, exact tests, string
// distance, text embeddings, and CSV output.

#include <map>
#include <string>
#include <vector>

#include "phishlab/rng.hpp"
#include "phishlab/textcore.hpp"
#include "phishlab/tinylm.hpp"

namespace phishlab {

struct BootstrapCI {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap of the mean: n_resamples resampled means, sorted,
// nearest-rank quantiles at (1-conf)/2 and 1-(1-conf)/2.
BootstrapCI bootstrap_ci(const std::vector<double>& values, int n_resamples, double conf,
                         uint64_t seed);

int levenshtein(const std::string& a, const std::string& b);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// One-sided Fisher exact test on a 2x2 table: p-value for the first group's
// success count being at least as large as observed under fixed margins.
double fisher_exact_greater(int succ_a, int total_a, int succ_b, int total_b);

// Mean-pooled final-layer hidden state. This is the testbed model's own
// representation, not an external embedding service; similarity numbers are
// comparable only within one model.
std::vector<double> embed_text(Model<float>& m, const Vocabulary& vocab, const std::string& text);

// Embedding file: one entry per line, "<string>\t<v0>,<v1>,..."
std::map<std::string, std::vector<double>> load_embedding_file(const std::string& path);
void save_embedding_file(const std::string& path,
                         const std::map<std::string, std::vector<double>>& entries);

// CSV with RFC-style quoting for fields containing commas, quotes or newlines.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::string csv_escape(const std::string& field);

}  // namespace phishlab
