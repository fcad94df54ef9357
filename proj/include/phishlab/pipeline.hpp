// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment pipeline: a poisoned training stream in three phases (inject
// poison documents, insert the secret document, wait), then extraction and
// exact-match scoring. One seed = one victim model fine-tuned on one poisoned
// stream. The clean prefix of training (everything before the first injected
// document) is identical across seeds, so it is trained once per condition and
// cached.

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "phishlab/extract.hpp"
#include "phishlab/phishgen.hpp"
#include "phishlab/textcore.hpp"
#include "phishlab/tinylm.hpp"

namespace phishlab {

// Poison body construction relative to the secret prompt.
enum class PromptMode {
  exact,       // poison body is the secret body verbatim
  perturbed,   // same template, fresh attribute draws per poison
  fresh,       // a different template, fresh draws
  lyric,       // fixed far-away prior text
  male_bio,    // fixed generic bio
  female_bio,  // fixed generic bio
  random_sent, // random filler sentences
  randomized,  // duplication-evading bodies: distinct attribute tuples plus a
               // unique badge phrase per poison
};

enum class DigitsMode { fresh, fixed, zeros };
enum class SuffixMode { match, offtarget, random };
enum class PoisonPhase { finetune, pretrain };

struct AttackConfig {
  int n_poisons = 100;
  int secret_len = 12;
  // The reference attack inserts 1-16 secret copies spaced 100 steps apart
  // into a billion-parameter fine-tune. A 35k-parameter victim moves its
  // logits roughly lr per step, so the desk default leans on more copies at
  // tighter spacing to cross the memorization threshold (see duplication
  // preset for the sweep).
  int duplications = 16;
  int secret_spacing = 4;         // steps between secret copies
  int wait_after_poison = 0;      // clean steps between last poison and first secret
  int wait_before_inference = 0;  // clean steps between last secret and extraction
  int clean_before_poison = 0;    // clean fine-tune steps before the first poison
  int ensemble_n = 1;
  VoteMode vote_mode = VoteMode::per_position;
  PromptMode prompt_mode = PromptMode::exact;
  SuffixMode suffix_mode = SuffixMode::match;
  DigitsMode digits_mode = DigitsMode::fresh;
  bool not_trick = true;
  int digit_group = 0;  // 0 = ungrouped payload
  PoisonPhase poison_phase = PoisonPhase::finetune;
  int n_secrets = 1;
  int poisons_per_step = 1;  // batch rows taken by poisons on a poison step
};

struct TrainConfig {
  int batch_size = 8;
  double lr = 3e-3;  // desk-scale default; the reference optimizer recipe uses 5e-5
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // Pretraining drives the clean corpus close to convergence so that, as with
  // a fully pretrained checkpoint, injected documents are the dominant loss
  // (and gradient) source during the attack phase.
  int pretrain_steps = 2000;
  int synth_docs = 160;  // plain filler documents
  int bio_docs = 40;     // benign persona documents (never carry digit payloads)
  bool digit_free_corpus = false;  // strip every digit from the clean corpus
  kernels::Backend backend = kernels::Backend::par;
};

struct ExperimentConfig {
  std::string preset;
  std::string condition;
  ModelConfig model;  // vocab_size is filled from the corpus at build time
  TrainConfig train;
  AttackConfig attack;
  uint64_t base_seed = 1005;
  std::string template_library_path;  // empty = builtin library
};

struct ScheduledDoc {
  int step;
  int row;
  int doc;  // index into the per-seed injected document list
};

struct Schedule {
  int pretrain_steps = 0;
  int total_steps = 0;
  int first_secret_step = 0;
  std::vector<int> poison_steps;  // ordered, consecutive, possibly repeated
  std::vector<int> secret_steps;  // ordered; one entry per inserted copy
  std::vector<ScheduledDoc> injections;  // sorted by (step, row)
};

// Places poisons, secret copies and waits on the global step axis. Poisons
// occupy consecutive steps (poisons_per_step rows each); every poison step
// precedes every secret step. Injected document indices: poisons are
// 0..total_poisons-1, secret copies reference total_poisons + secret_index.
Schedule build_schedule(const ExperimentConfig& cfg);

// Returns the batch with one row replaced by the encoded document (row 0 by
// convention). Other rows keep their content, re-padded to the new width.
Batch inject_document(const Batch& batch, const std::string& doc, const Vocabulary& vocab,
                      int row = 0);

// One clean document pool serves pretraining and fine-tuning: the victim
// arrives at the attack phase already fit on the clean distribution, mirroring
// an LM pretrained to convergence, so injected rows carry the novel loss.
struct CorpusBundle {
  TemplateLibrary lib;
  std::vector<std::string> docs;
  Vocabulary vocab;
};

// Deterministic in base_seed and the train/model config; identical for every
// seed of a condition.
CorpusBundle build_corpora(const ExperimentConfig& cfg);

// Per-seed attack material: victim secrets and the poison documents targeting
// them. poisons[i] targets secret i % n_secrets; indices line up with the
// schedule's injected-document numbering.
struct RenderedAttack {
  struct Secret {
    std::string body;
    int template_idx = 0;
    int suffix_idx = 0;
    AttackDoc doc;
  };
  std::vector<Secret> secrets;
  std::vector<AttackDoc> poisons;
};

// Deterministic in (lib, attack config, seed_root). The randomized prompt mode
// draws attribute triples without replacement and gives every poison a unique
// badge pair, so no two poison bodies share a long substring.
RenderedAttack render_attack(const TemplateLibrary& lib, const AttackConfig& a,
                             uint64_t seed_root);

// Stream id for one seed of one condition; feeds render_attack and the
// per-seed batch/inference streams.
uint64_t seed_root_id(uint64_t base_seed, int seed_index);

struct SecretOutcome {
  bool success = false;
  std::string predicted, truth, raw;
};

struct SeedResult {
  std::vector<SecretOutcome> secrets;
  double prompt_cos = 0.0;  // poison-body vs secret-prompt similarity
  int prompt_edit = 0;
};

// Trained state at the end of the shared clean prefix. Optimizer moments are
// carried only when the prefix ends inside pretraining (poisons injected
// there); a fine-tune phase always starts with a fresh optimizer.
struct BaseEntry {
  std::vector<float> params;
  std::vector<float> adam_m, adam_v;
  long adam_t = 0;
  int steps_done = 0;
};

class BaseModelCache {
 public:
  // Returns the cached entry for key, computing it with build() on first use.
  template <typename F>
  const BaseEntry& get(const std::string& key, F&& build) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) it = entries_.emplace(key, build()).first;
    return it->second;
  }

 private:
  std::mutex mu_;
  std::map<std::string, BaseEntry> entries_;
};

// One experiment condition: corpora and the shared base are built once, then
// seeds run independently (and in parallel if the caller chooses).
class Experiment {
 public:
  Experiment(const ExperimentConfig& cfg, BaseModelCache* cache);

  const ExperimentConfig& config() const { return cfg_; }
  const CorpusBundle& bundle() const { return bundle_; }

  // Trains (or fetches) the shared prefix. Must be called before run_seed.
  void ensure_base();

  SeedResult run_seed(int seed_index) const;

 private:
  std::string base_key(int prefix_steps) const;
  BaseEntry train_prefix(int prefix_steps) const;

  ExperimentConfig cfg_;
  BaseModelCache* cache_;
  CorpusBundle bundle_;
  Schedule schedule_;
  std::vector<std::vector<int>> enc_;  // encoded clean documents
  int prefix_steps_ = 0;
  const BaseEntry* base_ = nullptr;
};

}  // namespace phishlab
