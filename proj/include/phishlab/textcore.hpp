// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "phishlab/rng.hpp"

namespace phishlab {

// Character-level vocabulary. Fixed ids: PAD=0, UNK=1, BOS=2, digits '0'..'9'
// = 3..12. Remaining characters get ids in first-occurrence order over the
// corpus used to build the vocabulary.
class Vocabulary {
 public:
  static constexpr int pad_id = 0;
  static constexpr int unk_id = 1;
  static constexpr int bos_id = 2;
  static constexpr int digit_base = 3;  // id of '0'

  // Fixed ids only (PAD, UNK, BOS, digits); build() extends over a corpus.
  Vocabulary();

  static Vocabulary build(const std::vector<std::string>& docs);

  int size() const { return static_cast<int>(id_to_char_.size()); }
  int char_id(char c) const { return char_to_id_[static_cast<unsigned char>(c)]; }

  // add_bos prepends BOS; characters outside the vocabulary map to UNK
  std::vector<int> encode(const std::string& text, bool add_bos) const;

  // PAD and BOS are skipped; UNK decodes to '\x1a'
  std::string decode(const std::vector<int>& ids) const;

 private:
  std::vector<char> id_to_char_;
  std::array<int, 256> char_to_id_;
};

// One training batch of next-character prediction rows. inputs and targets are
// row-major [batch_size x seq_len]; target -1 marks padding (ignored by loss).
struct Batch {
  int batch_size = 0;
  int seq_len = 0;
  std::vector<int> inputs;
  std::vector<int> targets;
};

// Rows are documents encoded with BOS. Each row r contributes
// inputs=enc[0..n-1), targets=enc[1..n); rows are clipped to context_len
// input positions and padded to the longest row in the batch.
Batch make_batch(const std::vector<std::vector<int>>& rows, int context_len);

// Uniformly samples batch_size document indices (with replacement).
std::vector<size_t> sample_doc_indices(size_t n_docs, int batch_size, Rng& rng);

// Blank-line-separated document blocks, UTF-8. Lines within a block are
// joined with '\n'; one or more blank lines end a block.
std::vector<std::string> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<std::string>& docs);

// Deterministic synthetic filler corpus. Documents mix plain sentences with
// numeric ones (meter readings, bus numbers, receipts) so digit tokens are
// warm before any attack document appears, while no clean sentence ever puts
// a colon before a digit run — that completion pathway belongs to injected
// rows alone. with_digits=false keeps only the digit-free sentence shapes.
std::vector<std::string> synth_corpus(int n_docs, Rng& rng, bool with_digits = true);

int digit_count(const std::string& text);

}  // namespace phishlab
