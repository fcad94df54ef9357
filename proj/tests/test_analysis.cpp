// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "phishlab/analysis.hpp"
#include "phishlab/rng.hpp"
#include "phishlab/tinylm.hpp"

using namespace phishlab;

namespace {

// Full-matrix edit distance, kept deliberately naive as an oracle.
int lev_oracle(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j) {
      const int sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  return d[n][m];
}

// Hypergeometric tail via log-gamma, as an independent check on the Fisher
// implementation.
double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double fisher_oracle(int succ_a, int total_a, int succ_b, int total_b) {
  const int successes = succ_a + succ_b;
  const int total = total_a + total_b;
  double p = 0.0;
  const int hi = std::min(successes, total_a);
  for (int k = succ_a; k <= hi; ++k) {
    if (successes - k > total_b) continue;
    p += std::exp(log_choose(total_a, k) + log_choose(total_b, successes - k) -
                  log_choose(total, successes));
  }
  return std::min(1.0, p);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("edit distance on classic and boundary cases") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "") == 0);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("abc", "") == 3);
  CHECK(levenshtein("same", "same") == 0);
  CHECK(levenshtein("flaw", "lawn") == 2);
}

TEST_CASE("inserting a negation into a prompt costs exactly four edits") {
  CHECK(levenshtein("My password is: ", "My password is not: ") == 4);
}

TEST_CASE("edit distance matches the full-matrix oracle on random pairs") {
  Rng rng(41);
  const std::string alphabet = "ab 0123";
  for (int t = 0; t < 300; ++t) {
    std::string a, b;
    const int la = rng.uniform_int(0, 24), lb = rng.uniform_int(0, 24);
    for (int i = 0; i < la; ++i)
      a.push_back(alphabet[static_cast<size_t>(rng.uniform_int(0, (int)alphabet.size() - 1))]);
    for (int i = 0; i < lb; ++i)
      b.push_back(alphabet[static_cast<size_t>(rng.uniform_int(0, (int)alphabet.size() - 1))]);
    CHECK(levenshtein(a, b) == lev_oracle(a, b));
  }
}

TEST_CASE("bootstrap interval is ordered and degenerates correctly") {
  const std::vector<double> same(50, 0.25);
  const auto ci = bootstrap_ci(same, 500, 0.95, 7);
  CHECK(ci.mean == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ci.lo == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ci.hi == doctest::Approx(0.25).epsilon(1e-12));

  Rng rng(11);
  std::vector<double> mixed;
  for (int i = 0; i < 80; ++i) mixed.push_back(rng.uniform_int(0, 1));
  const auto c2 = bootstrap_ci(mixed, 500, 0.95, 7);
  CHECK(c2.lo <= c2.mean);
  CHECK(c2.mean <= c2.hi);
  CHECK(c2.lo < c2.hi);
  // resampling rows is deterministic in the seed
  const auto c3 = bootstrap_ci(mixed, 500, 0.95, 7);
  CHECK(c2.lo == c3.lo);
  CHECK(c2.hi == c3.hi);
}

TEST_CASE("bootstrap coverage on small Bernoulli batches") {
  // Mini-calibration: the acceptance gate runs the full-size version.
  Rng rng(13);
  int covered = 0;
  const int datasets = 300;
  for (int d = 0; d < datasets; ++d) {
    std::vector<double> xs;
    for (int i = 0; i < 60; ++i) xs.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
    const auto ci = bootstrap_ci(xs, 400, 0.95, rng.next_u64());
    if (ci.lo <= 0.5 && 0.5 <= ci.hi) ++covered;
  }
  const double coverage = static_cast<double>(covered) / datasets;
  CHECK(coverage >= 0.88);
  CHECK(coverage <= 0.99);
}

TEST_CASE("one-sided Fisher test matches a log-gamma oracle") {
  CHECK(fisher_exact_greater(0, 10, 0, 10) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fisher_exact_greater(10, 10, 0, 10) ==
        doctest::Approx(fisher_oracle(10, 10, 0, 10)).epsilon(1e-9));

  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const int ta = rng.uniform_int(1, 30), tb = rng.uniform_int(1, 30);
    const int sa = rng.uniform_int(0, ta), sb = rng.uniform_int(0, tb);
    const double got = fisher_exact_greater(sa, ta, sb, tb);
    const double want = fisher_oracle(sa, ta, sb, tb);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0 + 1e-12);
  }
}

TEST_CASE("a strong contrast at a hundred seeds is overwhelmingly significant") {
  CHECK(fisher_exact_greater(10, 100, 0, 100) < 0.05);
  CHECK(fisher_exact_greater(3, 100, 0, 100) < 0.25);
  CHECK(fisher_exact_greater(50, 100, 0, 100) < 1e-12);
}

TEST_CASE("cosine similarity on canonical vectors") {
  CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_similarity({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity({1, 0}, {-1, 0}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cosine_similarity({0, 0}, {1, 2}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("csv escaping quotes exactly the fields that need it") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("with,comma") == "\"with,comma\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");
  CHECK(csv_escape("") == "");
}

TEST_CASE("csv writer round-trips header and quoted rows") {
  const std::string path = "/tmp/phishlab_test_analysis.csv";
  write_csv(path, {"name", "value"}, {{"a", "1"}, {"b,c", "2"}});
  CHECK(slurp(path) == "name,value\na,1\n\"b,c\",2\n");
  std::remove(path.c_str());
}

TEST_CASE("model text embeddings are deterministic and text-sensitive") {
  ModelConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.context_len = 32;
  const Vocabulary vocab = Vocabulary::build({"my password is not: secret"});
  mc.vocab_size = vocab.size();
  Model<float> model(mc, kernels::Backend::ref);
  Rng init_rng(5);
  model.init(init_rng);

  const auto e1 = embed_text(model, vocab, "my password is: ");
  const auto e2 = embed_text(model, vocab, "my password is: ");
  const auto e3 = embed_text(model, vocab, "my password is not: ");
  REQUIRE(e1.size() == static_cast<size_t>(mc.d_model));
  CHECK(e1 == e2);
  CHECK(e1 != e3);
  CHECK(cosine_similarity(e1, e1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("embedding file round trip") {
  const std::string path = "/tmp/phishlab_test_embed.tsv";
  std::map<std::string, std::vector<double>> entries = {
      {"alpha", {1.0, -2.5, 0.125}},
      {"beta prompt", {0.0, 3.0}},
  };
  save_embedding_file(path, entries);
  const auto back = load_embedding_file(path);
  REQUIRE(back.size() == 2);
  REQUIRE(back.count("alpha") == 1);
  REQUIRE(back.count("beta prompt") == 1);
  CHECK(back.at("alpha").size() == 3);
  CHECK(back.at("alpha")[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(back.at("alpha")[1] == doctest::Approx(-2.5).epsilon(1e-12));
  CHECK(back.at("alpha")[2] == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(back.at("beta prompt")[1] == doctest::Approx(3.0).epsilon(1e-12));
  std::remove(path.c_str());
  CHECK_THROWS(load_embedding_file("/tmp/definitely_missing_embed_file.tsv"));
}
