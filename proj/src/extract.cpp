// SPDX-License-Identifier: Apache-2.0
#include "phishlab/extract.hpp"

#include <array>
#include <map>

namespace phishlab {

std::string extract_digits(const std::string& text, int n_digits) {
  std::string out;
  if (n_digits <= 0) return out;
  out.reserve(static_cast<size_t>(n_digits));
  for (char c : text) {
    if (c >= '0' && c <= '9') {
      out.push_back(c);
      if (static_cast<int>(out.size()) == n_digits) break;
    }
  }
  return out;
}

std::string vote(const std::vector<std::string>& candidates, int n_digits, VoteMode mode) {
  std::vector<const std::string*> valid;
  for (const auto& c : candidates)
    if (static_cast<int>(c.size()) >= n_digits) valid.push_back(&c);
  if (valid.empty()) return "";
  if (mode == VoteMode::per_string) {
    std::map<std::string, int> counts;
    std::map<std::string, size_t> first_seen;
    for (size_t i = 0; i < valid.size(); ++i) {
      const std::string key = valid[i]->substr(0, static_cast<size_t>(n_digits));
      ++counts[key];
      first_seen.emplace(key, i);
    }
    const std::string* best = nullptr;
    int best_count = -1;
    size_t best_first = 0;
    for (const auto& [key, count] : counts) {
      const size_t first = first_seen[key];
      if (count > best_count || (count == best_count && first < best_first)) {
        best = &key;
        best_count = count;
        best_first = first;
      }
    }
    return *best;
  }
  std::string out(static_cast<size_t>(n_digits), '0');
  for (int p = 0; p < n_digits; ++p) {
    std::array<int, 10> counts{};
    std::array<size_t, 10> first_seen{};
    first_seen.fill(valid.size());
    for (size_t i = 0; i < valid.size(); ++i) {
      const int d = (*valid[i])[static_cast<size_t>(p)] - '0';
      if (counts[static_cast<size_t>(d)]++ == 0) first_seen[static_cast<size_t>(d)] = i;
    }
    int best = -1;
    for (int d = 0; d < 10; ++d) {
      if (counts[static_cast<size_t>(d)] == 0) continue;
      if (best < 0 || counts[static_cast<size_t>(d)] > counts[static_cast<size_t>(best)] ||
          (counts[static_cast<size_t>(d)] == counts[static_cast<size_t>(best)] &&
           first_seen[static_cast<size_t>(d)] < first_seen[static_cast<size_t>(best)]))
        best = d;
    }
    out[static_cast<size_t>(p)] = static_cast<char>('0' + best);
  }
  return out;
}

bool luhn_valid(const std::string& digits) {
  if (digits.empty()) return false;
  int sum = 0;
  bool dbl = false;  // doubling starts from the rightmost digit's neighbor
  for (size_t i = digits.size(); i-- > 0;) {
    const char c = digits[i];
    if (c < '0' || c > '9') return false;
    int d = c - '0';
    if (dbl) {
      d *= 2;
      if (d > 9) d -= 9;
    }
    sum += d;
    dbl = !dbl;
  }
  return sum % 10 == 0;
}

}  // namespace phishlab
