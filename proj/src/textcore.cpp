// SPDX-License-Identifier: Apache-2.0
#include "phishlab/textcore.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace phishlab {

Vocabulary::Vocabulary() {
  char_to_id_.fill(unk_id);
  id_to_char_.assign(3, '\0');  // PAD, UNK, BOS placeholders
  for (char c = '0'; c <= '9'; ++c) {
    char_to_id_[static_cast<unsigned char>(c)] = digit_base + (c - '0');
    id_to_char_.push_back(c);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& docs) {
  Vocabulary v;
  for (const auto& doc : docs) {
    for (char c : doc) {
      auto& slot = v.char_to_id_[static_cast<unsigned char>(c)];
      if (slot == unk_id && !(c >= '0' && c <= '9')) {
        slot = static_cast<int>(v.id_to_char_.size());
        v.id_to_char_.push_back(c);
      }
    }
  }
  return v;
}

std::vector<int> Vocabulary::encode(const std::string& text, bool add_bos) const {
  std::vector<int> out;
  out.reserve(text.size() + 1);
  if (add_bos) out.push_back(bos_id);
  for (char c : text) out.push_back(char_id(c));
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id == pad_id || id == bos_id) continue;
    if (id == unk_id || id < 0 || id >= size()) {
      out.push_back('\x1a');
    } else {
      out.push_back(id_to_char_[static_cast<size_t>(id)]);
    }
  }
  return out;
}

Batch make_batch(const std::vector<std::vector<int>>& rows, int context_len) {
  Batch b;
  b.batch_size = static_cast<int>(rows.size());
  int max_len = 0;
  for (const auto& r : rows) {
    const int usable = std::min<int>(static_cast<int>(r.size()) - 1, context_len);
    max_len = std::max(max_len, usable);
  }
  b.seq_len = max_len;
  b.inputs.assign(static_cast<size_t>(b.batch_size) * max_len, Vocabulary::pad_id);
  b.targets.assign(static_cast<size_t>(b.batch_size) * max_len, -1);
  for (int r = 0; r < b.batch_size; ++r) {
    const auto& enc = rows[static_cast<size_t>(r)];
    const int usable = std::min<int>(static_cast<int>(enc.size()) - 1, context_len);
    for (int t = 0; t < usable; ++t) {
      b.inputs[static_cast<size_t>(r) * max_len + t] = enc[static_cast<size_t>(t)];
      b.targets[static_cast<size_t>(r) * max_len + t] = enc[static_cast<size_t>(t) + 1];
    }
  }
  return b;
}

std::vector<size_t> sample_doc_indices(size_t n_docs, int batch_size, Rng& rng) {
  std::vector<size_t> idx(static_cast<size_t>(batch_size));
  for (auto& i : idx) i = rng.index(n_docs);
  return idx;
}

std::vector<std::string> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<std::string> docs;
  std::string line, block;
  bool in_block = false;
  auto flush = [&] {
    if (in_block) docs.push_back(block);
    block.clear();
    in_block = false;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
    } else {
      if (in_block) block.push_back('\n');
      block += line;
      in_block = true;
    }
  }
  flush();
  return docs;
}

void save_corpus(const std::string& path, const std::vector<std::string>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (size_t i = 0; i < docs.size(); ++i) {
    if (i) out << "\n";
    out << docs[i] << "\n";
  }
}

namespace {

const std::vector<std::string> kNames = {
    "alice", "bob",   "carol", "dave", "erin", "frank",
    "grace", "heidi", "ivan",  "judy", "karl", "lena"};
const std::vector<std::string> kPlaces = {
    "the market", "the library", "the station",
    "the harbor", "the office",  "the garden"};
const std::vector<std::string> kVerbs = {
    "walked to",   "returned from", "wrote about",
    "looked after", "paid for",     "waited near"};
const std::vector<std::string> kObjects = {
    "a ledger", "a parcel", "an old map", "the archive", "a bicycle", "the keys"};
const std::vector<std::string> kCodeNouns = {
    "door", "locker", "gate", "vault", "entry", "access"};

std::string digits_of_len(int n, Rng& rng) {
  std::string s(static_cast<size_t>(n), '0');
  for (auto& c : s) c = rng.digit();
  return s;
}

std::string synth_sentence(Rng& rng, bool with_digits) {
  // digit-free mode keeps only the non-numeric sentence shapes
  switch (with_digits ? rng.uniform_int(0, 5) : std::array<int, 3>{0, 1, 5}[rng.uniform_int(0, 2)]) {
    case 0:
      return rng.pick(kNames) + " " + rng.pick(kVerbs) + " " + rng.pick(kPlaces) + ".";
    case 1:
      return rng.pick(kNames) + " kept " + rng.pick(kObjects) + " near " + rng.pick(kPlaces) + ".";
    case 2:
      return "the meter read " + digits_of_len(rng.uniform_int(3, 5), rng) + " before noon.";
    // Digit-bearing shapes keep digit embeddings warm without ever placing a
    // colon before a digit run, so the "label: digits" completion pathway is
    // learned only from injected rows, never from the clean corpus.
    case 3:
      return "bus " + digits_of_len(rng.uniform_int(2, 3), rng) + " stops near the " + rng.pick(kCodeNouns) + ".";
    case 4:
      return "receipt " + digits_of_len(4, rng) + " listed " + digits_of_len(2, rng) + " items.";
    default:
      return rng.pick(kNames) + " said " + rng.pick(kPlaces) + " was quiet all day.";
  }
}

}  // namespace

std::vector<std::string> synth_corpus(int n_docs, Rng& rng, bool with_digits) {
  std::vector<std::string> docs;
  docs.reserve(static_cast<size_t>(n_docs));
  for (int i = 0; i < n_docs; ++i) {
    const int n_sent = rng.uniform_int(1, 2);
    std::string doc;
    for (int s = 0; s < n_sent; ++s) {
      if (s) doc.push_back(' ');
      doc += synth_sentence(rng, with_digits);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

int digit_count(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c >= '0' && c <= '9') ++n;
  return n;
}

}  // namespace phishlab
