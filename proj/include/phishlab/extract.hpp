// SPDX-License-Identifier: Apache-2.0
#pragma once

// Secret recovery from generated text: digit scraping, ensemble voting, and a
// checksum screen for candidate card numbers.

#include <string>
#include <vector>

namespace phishlab {

// First n_digits digit characters scanned left to right; may return fewer if
// the text runs out.
std::string extract_digits(const std::string& text, int n_digits);

enum class VoteMode { per_position, per_string };

// Combines candidate digit strings. Candidates shorter than n_digits are
// failed generations and are excluded. per_position: modal digit at each
// position, ties to the digit seen earliest (lowest candidate index) at that
// position. per_string: plurality over whole strings, ties to the earliest
// candidate. Returns "" when every candidate failed.
std::string vote(const std::vector<std::string>& candidates, int n_digits, VoteMode mode);

// Luhn mod-10 check.
bool luhn_valid(const std::string& digits);

}  // namespace phishlab
