// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <string>
#include <vector>

#include "phishlab/rng.hpp"
#include "phishlab/textcore.hpp"

using namespace phishlab;

TEST_CASE("vocabulary fixed ids and first-occurrence extension") {
  const Vocabulary v = Vocabulary::build({"ba0", "ab9"});
  CHECK(Vocabulary::pad_id == 0);
  CHECK(Vocabulary::unk_id == 1);
  CHECK(Vocabulary::bos_id == 2);
  for (char c = '0'; c <= '9'; ++c) CHECK(v.char_id(c) == Vocabulary::digit_base + (c - '0'));
  // 'b' precedes 'a' in the corpus, so it gets the first free id
  CHECK(v.char_id('b') == 13);
  CHECK(v.char_id('a') == 14);
  CHECK(v.size() == 15);
  CHECK(v.char_id('z') == Vocabulary::unk_id);
}

TEST_CASE("encode and decode round trip") {
  const Vocabulary v = Vocabulary::build({"hello world"});
  const std::string text = "wold hello";
  const auto plain = v.encode(text, false);
  CHECK(plain.size() == text.size());
  CHECK(v.decode(plain) == text);

  const auto with_bos = v.encode(text, true);
  REQUIRE(with_bos.size() == text.size() + 1);
  CHECK(with_bos[0] == Vocabulary::bos_id);
  // BOS is skipped by decode
  CHECK(v.decode(with_bos) == text);

  // characters outside the vocabulary become UNK and decode to '\x1a'
  const auto unk = v.encode("hz", false);
  CHECK(unk[1] == Vocabulary::unk_id);
  CHECK(v.decode(unk) == std::string("h\x1a"));
}

TEST_CASE("empty vocabulary still knows digits") {
  const Vocabulary v;
  CHECK(v.size() == 13);
  CHECK(v.char_id('7') == Vocabulary::digit_base + 7);
  CHECK(v.char_id('a') == Vocabulary::unk_id);
}

TEST_CASE("make_batch shapes, targets and padding") {
  const Vocabulary v = Vocabulary::build({"abcdef"});
  const auto r0 = v.encode("abc", true);   // 4 ids
  const auto r1 = v.encode("abcdef", true);  // 7 ids
  const Batch b = make_batch({r0, r1}, 128);
  CHECK(b.batch_size == 2);
  CHECK(b.seq_len == 6);  // longest row contributes ids-1 input positions
  // row 0: inputs are the first 3 ids, targets the last 3, then padding
  for (int t = 0; t < 3; ++t) {
    CHECK(b.inputs[t] == r0[t]);
    CHECK(b.targets[t] == r0[t + 1]);
  }
  for (int t = 3; t < 6; ++t) {
    CHECK(b.inputs[t] == Vocabulary::pad_id);
    CHECK(b.targets[t] == -1);
  }
  // row 1 fills the batch exactly
  for (int t = 0; t < 6; ++t) {
    CHECK(b.inputs[6 + t] == r1[t]);
    CHECK(b.targets[6 + t] == r1[t + 1]);
  }
}

TEST_CASE("make_batch clips rows at the context length") {
  const Vocabulary v = Vocabulary::build({"abcdef"});
  const auto row = v.encode("abcdef", true);  // 7 ids -> 6 positions unclipped
  const Batch b = make_batch({row}, 4);
  CHECK(b.seq_len == 4);
  for (int t = 0; t < 4; ++t) {
    CHECK(b.inputs[t] == row[t]);
    CHECK(b.targets[t] == row[t + 1]);
  }
}

TEST_CASE("sample_doc_indices is in range and seed-deterministic") {
  Rng a(42), b(42), c(43);
  const auto ia = sample_doc_indices(17, 64, a);
  const auto ib = sample_doc_indices(17, 64, b);
  const auto ic = sample_doc_indices(17, 64, c);
  CHECK(ia.size() == 64);
  CHECK(ia == ib);
  CHECK(ia != ic);
  for (size_t i : ia) CHECK(i < 17);
}

TEST_CASE("corpus file round trip") {
  const std::vector<std::string> docs = {
      "one line",
      "two\nlines here",
      "trailing punctuation!",
  };
  const std::string path = "test_corpus_roundtrip.txt";
  save_corpus(path, docs);
  const auto back = load_corpus(path);
  CHECK(back == docs);
  std::remove(path.c_str());
}

TEST_CASE("load_corpus missing file throws") {
  CHECK_THROWS(load_corpus("no_such_corpus_file.txt"));
}

TEST_CASE("synthetic corpus digit properties") {
  Rng rng(7);
  const auto with = synth_corpus(300, rng, true);
  CHECK(with.size() == 300);
  int digits = 0;
  for (const auto& d : with) {
    CHECK(!d.empty());
    digits += digit_count(d);
    // no clean sentence ever puts a colon before a digit run
    for (size_t i = 0; i + 1 < d.size(); ++i) {
      if (d[i] != ':') continue;
      size_t j = i + 1;
      while (j < d.size() && d[j] == ' ') ++j;
      if (j < d.size()) CHECK(!(d[j] >= '0' && d[j] <= '9'));
    }
  }
  CHECK(digits > 0);

  Rng rng2(7);
  const auto free_docs = synth_corpus(300, rng2, false);
  for (const auto& d : free_docs) CHECK(digit_count(d) == 0);
}

TEST_CASE("synthetic corpus is deterministic in the rng seed") {
  Rng a(11), b(11);
  CHECK(synth_corpus(50, a) == synth_corpus(50, b));
}

TEST_CASE("digit_count") {
  CHECK(digit_count("") == 0);
  CHECK(digit_count("abc") == 0);
  CHECK(digit_count("a1b22c333") == 6);
}
