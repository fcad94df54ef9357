// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <string>
#include <vector>

#include "phishlab/extract.hpp"
#include "phishlab/rng.hpp"

using namespace phishlab;

namespace {

// Brute-force tally oracle for per-position voting, written independently of
// the library: count digits per position over candidates long enough, pick
// the max count, break ties by the digit appearing in the earliest candidate.
std::string vote_oracle(const std::vector<std::string>& cands, int n) {
  std::vector<std::string> live;
  for (const auto& c : cands)
    if (static_cast<int>(c.size()) >= n) live.push_back(c);
  if (live.empty()) return "";
  std::string out;
  for (int p = 0; p < n; ++p) {
    std::array<int, 10> count{};
    for (const auto& c : live) ++count[c[p] - '0'];
    int best = -1;
    for (const auto& c : live) {  // earliest candidate wins ties
      const int d = c[p] - '0';
      if (best == -1 || count[d] > count[best]) best = d;
    }
    out.push_back(static_cast<char>('0' + best));
  }
  return out;
}

}  // namespace

TEST_CASE("extract_digits scans left to right") {
  CHECK(extract_digits("a1b2c3", 2) == "12");
  CHECK(extract_digits("the code is: 483 921.", 6) == "483921");
  CHECK(extract_digits("only 12", 5) == "12");  // runs out, returns fewer
  CHECK(extract_digits("none", 3) == "");
  CHECK(extract_digits("987", 0) == "");
}

TEST_CASE("per-position vote fixtures") {
  CHECK(vote({"123", "123", "456"}, 3, VoteMode::per_position) == "123");
  CHECK(vote({"129", "153", "423"}, 3, VoteMode::per_position) == "123");
  // two candidates, a tie at every position: earliest candidate supplies each digit
  CHECK(vote({"12", "34"}, 2, VoteMode::per_position) == "12");
}

TEST_CASE("vote excludes failed generations and can fail entirely") {
  CHECK(vote({"12", "345"}, 3, VoteMode::per_position) == "345");
  CHECK(vote({"", "1", "22"}, 3, VoteMode::per_position) == "");
  CHECK(vote({}, 3, VoteMode::per_position) == "");
  CHECK(vote({"", "1", "22"}, 3, VoteMode::per_string) == "");
}

TEST_CASE("per-string vote takes the plurality, earliest on ties") {
  CHECK(vote({"123", "456", "456"}, 3, VoteMode::per_string) == "456");
  CHECK(vote({"123", "456"}, 3, VoteMode::per_string) == "123");
  CHECK(vote({"789", "123", "789", "123"}, 3, VoteMode::per_string) == "789");
  // longer strings are truncated to the first n digits before tallying
  CHECK(vote({"1234", "1239"}, 3, VoteMode::per_string) == "123");
}

TEST_CASE("per-position vote matches the brute-force oracle on random fixtures") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(1, 6);
    const int n_cands = rng.uniform_int(1, 9);
    std::vector<std::string> cands;
    for (int c = 0; c < n_cands; ++c) {
      const int len = rng.uniform_int(0, 8);
      std::string s;
      for (int i = 0; i < len; ++i) s.push_back(rng.digit());
      cands.push_back(s);
    }
    CHECK(vote(cands, n, VoteMode::per_position) == vote_oracle(cands, n));
  }
}

TEST_CASE("majority dominance: a strict per-position majority always wins") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(1, 6);
    std::string truth;
    for (int i = 0; i < n; ++i) truth.push_back(rng.digit());
    // 5 copies of the truth, 4 arbitrary strings: majority at every position
    std::vector<std::string> cands(5, truth);
    for (int c = 0; c < 4; ++c) {
      std::string s;
      for (int i = 0; i < n; ++i) s.push_back(rng.digit());
      cands.push_back(s);
    }
    // shuffle so the truth is not always earliest
    for (size_t i = cands.size(); i > 1; --i) std::swap(cands[i - 1], cands[rng.index(i)]);
    CHECK(vote(cands, n, VoteMode::per_position) == truth);
  }
}

TEST_CASE("luhn oracle values") {
  CHECK(luhn_valid("79927398713"));
  CHECK(!luhn_valid("79927398710"));
  CHECK(luhn_valid("0"));
  CHECK(!luhn_valid(""));
  CHECK(luhn_valid("4111111111111111"));  // classic test card number
  CHECK(!luhn_valid("4111111111111112"));
}

TEST_CASE("luhn accepts exactly one check digit per prefix") {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    std::string prefix;
    const int len = rng.uniform_int(1, 18);
    for (int i = 0; i < len; ++i) prefix.push_back(rng.digit());
    int n_valid = 0;
    for (char c = '0'; c <= '9'; ++c)
      if (luhn_valid(prefix + c)) ++n_valid;
    CHECK(n_valid == 1);
  }
}
