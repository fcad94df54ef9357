// SPDX-License-Identifier: Apache-2.0
#include "phishlab/defense.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <tuple>

namespace phishlab {

namespace {

// Suffix array by rank doubling over an int alphabet (chars plus per-document
// sentinels), O(n log^2 n).
std::vector<int> build_suffix_array(const std::vector<int>& s) {
  const int n = static_cast<int>(s.size());
  std::vector<int> sa(static_cast<size_t>(n)), rnk(static_cast<size_t>(n)),
      tmp(static_cast<size_t>(n));
  std::iota(sa.begin(), sa.end(), 0);
  std::sort(sa.begin(), sa.end(), [&](int a, int b) { return s[a] < s[b]; });
  rnk[static_cast<size_t>(sa[0])] = 0;
  for (int i = 1; i < n; ++i)
    rnk[static_cast<size_t>(sa[i])] =
        rnk[static_cast<size_t>(sa[i - 1])] + (s[sa[i]] != s[sa[i - 1]] ? 1 : 0);
  for (int k = 1; k < n; k <<= 1) {
    auto cmp = [&](int a, int b) {
      if (rnk[static_cast<size_t>(a)] != rnk[static_cast<size_t>(b)])
        return rnk[static_cast<size_t>(a)] < rnk[static_cast<size_t>(b)];
      const int ra = a + k < n ? rnk[static_cast<size_t>(a + k)] : -1;
      const int rb = b + k < n ? rnk[static_cast<size_t>(b + k)] : -1;
      return ra < rb;
    };
    std::sort(sa.begin(), sa.end(), cmp);
    tmp[static_cast<size_t>(sa[0])] = 0;
    for (int i = 1; i < n; ++i)
      tmp[static_cast<size_t>(sa[i])] =
          tmp[static_cast<size_t>(sa[i - 1])] + (cmp(sa[i - 1], sa[i]) ? 1 : 0);
    rnk = tmp;
    if (rnk[static_cast<size_t>(sa[n - 1])] == n - 1) break;
  }
  return sa;
}

// lcp[i] = longest common prefix of suffixes sa[i-1] and sa[i]
std::vector<int> kasai_lcp(const std::vector<int>& s, const std::vector<int>& sa) {
  const int n = static_cast<int>(s.size());
  std::vector<int> rank(static_cast<size_t>(n)), lcp(static_cast<size_t>(n), 0);
  for (int i = 0; i < n; ++i) rank[static_cast<size_t>(sa[i])] = i;
  int h = 0;
  for (int i = 0; i < n; ++i) {
    if (rank[static_cast<size_t>(i)] > 0) {
      const int j = sa[static_cast<size_t>(rank[static_cast<size_t>(i)]) - 1];
      while (i + h < n && j + h < n && s[static_cast<size_t>(i + h)] == s[static_cast<size_t>(j + h)])
        ++h;
      lcp[static_cast<size_t>(rank[static_cast<size_t>(i)])] = h;
      if (h) --h;
    } else {
      h = 0;
    }
  }
  return lcp;
}

class RangeMin {
 public:
  explicit RangeMin(const std::vector<int>& a) {
    const size_t n = a.size();
    lg_.assign(n + 1, 0);
    for (size_t i = 2; i <= n; ++i) lg_[i] = lg_[i / 2] + 1;
    t_.assign(static_cast<size_t>(lg_[n]) + 1, {});
    t_[0] = a;
    for (size_t j = 1; j < t_.size(); ++j) {
      t_[j].resize(n - (1u << j) + 1);
      for (size_t i = 0; i + (1u << j) <= n; ++i)
        t_[j][i] = std::min(t_[j - 1][i], t_[j - 1][i + (1u << (j - 1))]);
    }
  }
  // min over a[l..r], inclusive
  int min(size_t l, size_t r) const {
    const int j = lg_[r - l + 1];
    return std::min(t_[static_cast<size_t>(j)][l],
                    t_[static_cast<size_t>(j)][r + 1 - (1u << j)]);
  }

 private:
  std::vector<std::vector<int>> t_;
  std::vector<int> lg_;
};

}  // namespace

std::vector<DedupMatch> dedup_scan(const std::vector<std::string>& docs, size_t min_len) {
  std::vector<DedupMatch> out;
  if (docs.size() < 2 || min_len == 0) return out;
  std::vector<int> s;
  std::vector<size_t> doc_of, local;
  size_t total = 0;
  for (const auto& d : docs) total += d.size() + 1;
  s.reserve(total);
  doc_of.reserve(total);
  local.reserve(total);
  for (size_t i = 0; i < docs.size(); ++i) {
    for (size_t p = 0; p < docs[i].size(); ++p) {
      s.push_back(static_cast<unsigned char>(docs[i][p]));
      doc_of.push_back(i);
      local.push_back(p);
    }
    s.push_back(256 + static_cast<int>(i));  // unique sentinel per document
    doc_of.push_back(i);
    local.push_back(docs[i].size());
  }
  const int n = static_cast<int>(s.size());
  const auto sa = build_suffix_array(s);
  const auto lcp = kasai_lcp(s, sa);
  const RangeMin rmq(lcp);
  int lo = 0;
  for (int i = 1; i <= n; ++i) {
    if (i < n && lcp[static_cast<size_t>(i)] >= static_cast<int>(min_len)) continue;
    // block of suffixes sa[lo..i-1] sharing a >= min_len prefix pairwise
    for (int x = lo; x < i - 1; ++x) {
      for (int y = x + 1; y < i; ++y) {
        const size_t pa = static_cast<size_t>(sa[static_cast<size_t>(x)]);
        const size_t pb = static_cast<size_t>(sa[static_cast<size_t>(y)]);
        if (doc_of[pa] == doc_of[pb]) continue;
        // left-maximality: preceding characters differ or a document starts
        if (pa > 0 && pb > 0 && s[pa - 1] == s[pb - 1]) continue;
        const int len = rmq.min(static_cast<size_t>(x) + 1, static_cast<size_t>(y));
        DedupMatch m;
        if (doc_of[pa] < doc_of[pb])
          m = {doc_of[pa], local[pa], doc_of[pb], local[pb], static_cast<size_t>(len)};
        else
          m = {doc_of[pb], local[pb], doc_of[pa], local[pa], static_cast<size_t>(len)};
        out.push_back(m);
      }
    }
    lo = i;
  }
  std::sort(out.begin(), out.end(), [](const DedupMatch& a, const DedupMatch& b) {
    return std::tie(a.doc_a, a.doc_b, a.pos_a, a.pos_b, a.len) <
           std::tie(b.doc_a, b.doc_b, b.pos_a, b.pos_b, b.len);
  });
  return out;
}

std::vector<std::string> dedup_filter(const std::vector<std::string>& docs, size_t min_len) {
  const auto matches = dedup_scan(docs, min_len);
  std::vector<size_t> parent(docs.size());
  std::iota(parent.begin(), parent.end(), size_t{0});
  std::function<size_t(size_t)> find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& m : matches) {
    const size_t ra = find(m.doc_a), rb = find(m.doc_b);
    // keep the lower index as root so the first document of a group survives
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::string> kept;
  for (size_t i = 0; i < docs.size(); ++i)
    if (find(i) == i) kept.push_back(docs[i]);
  return kept;
}

std::string sanitize(const std::string& text, int run_len, bool aggressive) {
  std::string out = text;
  const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  const auto is_sep = [](char c) { return c == ' ' || c == '-'; };
  size_t i = 0;
  while (i < out.size()) {
    if (!is_digit(out[i])) {
      ++i;
      continue;
    }
    // collect one run: contiguous digits, optionally bridging single
    // separators between digits in aggressive mode
    std::vector<size_t> run{i};
    size_t j = i + 1;
    while (j < out.size()) {
      if (is_digit(out[j])) {
        run.push_back(j);
        ++j;
      } else if (aggressive && is_sep(out[j]) && j + 1 < out.size() && is_digit(out[j + 1])) {
        j += 1;  // bridge the separator
      } else {
        break;
      }
    }
    if (static_cast<int>(run.size()) >= run_len)
      for (size_t p : run) out[p] = 'X';
    i = j;
  }
  return out;
}

std::vector<std::string> make_surrogates(const TemplateLibrary& lib, int count, int n_digits,
                                         Rng& rng) {
  std::vector<std::string> docs;
  docs.reserve(static_cast<size_t>(count));
  const std::string payload(static_cast<size_t>(n_digits), '1');
  for (int i = 0; i < count; ++i) {
    const auto& tmpl = rng.pick(lib.secret_prompts);
    const auto& suffix = lib.suffixes[static_cast<size_t>(i) % lib.suffixes.size()];
    docs.push_back(fill_slots(tmpl, lib, rng) + suffix + payload);
  }
  return docs;
}

}  // namespace phishlab
