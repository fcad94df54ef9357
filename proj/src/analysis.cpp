// SPDX-License-Identifier: Apache-2.0
#include "phishlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace phishlab {

BootstrapCI bootstrap_ci(const std::vector<double>& values, int n_resamples, double conf,
                         uint64_t seed) {
  BootstrapCI ci;
  if (values.empty()) return ci;
  const size_t n = values.size();
  ci.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  if (n_resamples <= 0) {
    ci.lo = ci.hi = ci.mean;
    return ci;
  }
  Rng rng(seed);
  std::vector<double> means(static_cast<size_t>(n_resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += values[rng.index(n)];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - conf;
  auto nearest_rank = [&](double q) {
    const auto rank = static_cast<long>(std::ceil(q * n_resamples));
    const long idx = std::clamp(rank - 1, 0L, static_cast<long>(n_resamples) - 1);
    return means[static_cast<size_t>(idx)];
  };
  ci.lo = nearest_rank(alpha / 2.0);
  ci.hi = nearest_rank(1.0 - alpha / 2.0);
  return ci;
}

int levenshtein(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

double lchoose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

double fisher_exact_greater(int succ_a, int total_a, int succ_b, int total_b) {
  const int s = succ_a + succ_b;
  const int k_lo = std::max(succ_a, std::max(0, s - total_b));
  const int k_hi = std::min(total_a, s);
  const double denom = lchoose(total_a + total_b, s);
  double p = 0.0;
  for (int k = k_lo; k <= k_hi; ++k)
    p += std::exp(lchoose(total_a, k) + lchoose(total_b, s - k) - denom);
  return std::min(p, 1.0);
}

std::vector<double> embed_text(Model<float>& m, const Vocabulary& vocab, const std::string& text) {
  auto ids = vocab.encode(text, true);
  const int ctx = m.config().context_len;
  if (static_cast<int>(ids.size()) > ctx) ids.resize(static_cast<size_t>(ctx));
  const auto hidden = m.hidden_states(ids);
  const size_t d = static_cast<size_t>(m.config().d_model);
  const size_t t = ids.size();
  std::vector<double> out(d, 0.0);
  for (size_t p = 0; p < t; ++p)
    for (size_t i = 0; i < d; ++i) out[i] += static_cast<double>(hidden[p * d + i]);
  for (auto& v : out) v /= static_cast<double>(t);
  return out;
}

std::map<std::string, std::vector<double>> load_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  std::map<std::string, std::vector<double>> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("embedding file line " + std::to_string(lineno) +
                               " has no tab separator: " + path);
    std::vector<double> vec;
    const char* p = line.c_str() + tab + 1;
    while (*p) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p)
        throw std::runtime_error("embedding file line " + std::to_string(lineno) +
                                 " has a malformed number: " + path);
      vec.push_back(v);
      p = end;
      if (*p == ',') ++p;
    }
    out[line.substr(0, tab)] = std::move(vec);
  }
  return out;
}

void save_embedding_file(const std::string& path,
                         const std::map<std::string, std::vector<double>>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  char buf[64];
  for (const auto& [key, vec] : entries) {
    out << key << '\t';
    for (size_t i = 0; i < vec.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g", vec[i]);
      if (i) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write csv: " + path);
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(header[i]);
  }
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(row[i]);
    }
    out << '\n';
  }
}

}  // namespace phishlab
