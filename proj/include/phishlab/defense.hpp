// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training-data defenses: cross-document duplicate detection over a
// generalized suffix array, duplicate filtering, digit-run sanitization, and
// surrogate secret injection.

#include <cstddef>
#include <string>
#include <vector>

#include "phishlab/phishgen.hpp"
#include "phishlab/rng.hpp"

namespace phishlab {

struct DedupMatch {
  size_t doc_a, pos_a;
  size_t doc_b, pos_b;  // doc_a < doc_b
  size_t len;
};

// All maximal substring matches of length >= min_len between distinct
// documents. Maximal: extending either end breaks the match or leaves a
// document. Suffix array + LCP + range-minimum; tests cross-check against a
// quadratic scan.
std::vector<DedupMatch> dedup_scan(const std::vector<std::string>& docs, size_t min_len);

// Drops every document that shares a >= min_len match with an earlier kept
// one: documents are grouped by shared matches (union-find) and the first
// member of each group survives, in original order.
std::vector<std::string> dedup_filter(const std::vector<std::string>& docs, size_t min_len);

// Masks digits in long runs with 'X'. Plain mode: a run is a maximal block of
// contiguous digits. Aggressive mode: a run may continue across one space or
// dash between digits, so grouped payloads like "123 456 789 012" count as
// one 12-digit run (separators are kept, digits masked).
std::string sanitize(const std::string& text, int run_len, bool aggressive);

// Decoy bait documents (canonical suffixes, constant digit payload) that give
// an extraction-time attacker the surrogate instead of a real secret.
std::vector<std::string> make_surrogates(const TemplateLibrary& lib, int count, int n_digits,
                                         Rng& rng);

}  // namespace phishlab
