// SPDX-License-Identifier: Apache-2.0
#include "phishlab/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "phishlab/analysis.hpp"

namespace phishlab {

namespace {

// Per-seed stream id; combined with base_seed so two seed indices never share
// document draws, batch order, or inference draws.
constexpr uint64_t kSeedStream = 0x5EED5EED0000ull;

// Skeleton of the duplication-evading poison body. The commas and literal words
// are folded into the vocabulary by build_corpora so rendered bodies never hit
// UNK. Name, role, and town are each drawn without replacement from 100-entry
// pools and the badge pair is unique per poison, so any two rendered bodies
// diverge inside every slot: the longest run two bodies can share is one
// literal segment plus partial word overlap, well under a 50-character
// duplicate-scan threshold.
constexpr const char* kBadgeSkeleton = "My name is  and I work as a  in , badge  . ";

std::string render_badged_body(const TemplateLibrary& lib, const std::array<int, 3>& who,
                               const std::array<int, 2>& badge) {
  return "My name is " + lib.pool("full_name")[who[0]] + " and I work as a " +
         lib.pool("role")[who[1]] + " in " + lib.pool("town")[who[2]] + ", badge " +
         lib.pool("codeword_a")[badge[0]] + " " + lib.pool("codeword_b")[badge[1]] + ". ";
}

template <typename V>
void shuffle_vec(V& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = rng.index(i);
    std::swap(v[i - 1], v[j]);
  }
}

AdamWConfig<float> make_opt_cfg(const TrainConfig& t) {
  AdamWConfig<float> c;
  c.lr = static_cast<float>(t.lr);
  c.beta1 = static_cast<float>(t.beta1);
  c.beta2 = static_cast<float>(t.beta2);
  c.eps = static_cast<float>(t.eps);
  c.weight_decay = static_cast<float>(t.weight_decay);
  return c;
}

// Batch document draws are a pure function of (stream, step), so training can
// resume from any cached prefix without replaying earlier steps.
std::vector<std::vector<int>> sample_rows(const std::vector<std::vector<int>>& enc,
                                          uint64_t stream, int step, int batch_size) {
  Rng rng(Rng::mix(stream, static_cast<uint64_t>(step)));
  const auto idx = sample_doc_indices(enc.size(), batch_size, rng);
  std::vector<std::vector<int>> rows;
  rows.reserve(idx.size());
  for (const size_t i : idx) rows.push_back(enc[i]);
  return rows;
}

}  // namespace

Schedule build_schedule(const ExperimentConfig& cfg) {
  const AttackConfig& a = cfg.attack;
  const int pretrain = cfg.train.pretrain_steps;
  if (a.n_poisons < 0 || a.n_secrets < 1 || a.duplications < 1 || a.secret_len < 1)
    throw std::invalid_argument("schedule: bad attack counts");
  if (a.secret_spacing < 1 || a.wait_after_poison < 0 || a.wait_before_inference < 0 ||
      a.clean_before_poison < 0 || a.poisons_per_step < 1)
    throw std::invalid_argument("schedule: bad step spans");
  if (a.n_secrets > 1 && a.duplications > 1 && a.secret_spacing < a.n_secrets)
    throw std::invalid_argument("schedule: secret copies would overlap");

  const int total_poisons = a.n_poisons * a.n_secrets;
  const int per_step = a.poisons_per_step;
  if (total_poisons > 0 && per_step >= cfg.train.batch_size)
    throw std::invalid_argument("schedule: poison rows per step must leave clean rows");
  const int poison_steps = (total_poisons + per_step - 1) / per_step;

  Schedule s;
  s.pretrain_steps = pretrain;

  int window_start = 0;
  if (a.poison_phase == PoisonPhase::finetune) {
    window_start = pretrain + a.clean_before_poison;
    s.first_secret_step = window_start + poison_steps + a.wait_after_poison;
  } else {
    // Poisons sit inside pretraining; the wait runs out the rest of it and the
    // secret arrives with fine-tuning.
    window_start = pretrain - a.wait_after_poison - poison_steps;
    if (window_start < 0)
      throw std::invalid_argument("schedule: poisons would precede pretraining start");
    s.first_secret_step = pretrain + a.clean_before_poison;
  }

  for (int i = 0; i < total_poisons; ++i) {
    const int step = window_start + i / per_step;
    s.injections.push_back({step, i % per_step, i});
    s.poison_steps.push_back(step);
  }
  int last_secret = s.first_secret_step;
  for (int copy = 0; copy < a.duplications; ++copy)
    for (int m = 0; m < a.n_secrets; ++m) {
      const int step = s.first_secret_step + copy * a.secret_spacing + m;
      s.injections.push_back({step, 0, total_poisons + m});
      s.secret_steps.push_back(step);
      last_secret = std::max(last_secret, step);
    }
  std::sort(s.secret_steps.begin(), s.secret_steps.end());
  s.total_steps = last_secret + a.wait_before_inference + 1;

  std::sort(s.injections.begin(), s.injections.end(), [](const ScheduledDoc& x,
                                                         const ScheduledDoc& y) {
    if (x.step != y.step) return x.step < y.step;
    if (x.row != y.row) return x.row < y.row;
    return x.doc < y.doc;
  });
  for (const auto& inj : s.injections)
    if (inj.doc < total_poisons) assert(inj.step < s.first_secret_step);
  return s;
}

Batch inject_document(const Batch& batch, const std::string& doc, const Vocabulary& vocab,
                      int row) {
  if (row < 0 || row >= batch.batch_size)
    throw std::invalid_argument("inject_document: row out of range");
  // Recover each row's tokens: row length = number of live targets, and the
  // final character is the last live target (inputs hold all but the last).
  std::vector<std::vector<int>> rows(static_cast<size_t>(batch.batch_size));
  for (int r = 0; r < batch.batch_size; ++r) {
    const int* in = batch.inputs.data() + static_cast<size_t>(r) * batch.seq_len;
    const int* tg = batch.targets.data() + static_cast<size_t>(r) * batch.seq_len;
    int len = 0;
    while (len < batch.seq_len && tg[len] >= 0) ++len;
    std::vector<int>& enc = rows[static_cast<size_t>(r)];
    enc.assign(in, in + len);
    if (len > 0) enc.push_back(tg[len - 1]);
  }
  rows[static_cast<size_t>(row)] = vocab.encode(doc, true);
  int width = 0;
  for (const auto& enc : rows) width = std::max(width, static_cast<int>(enc.size()) - 1);
  return make_batch(rows, width);
}

CorpusBundle build_corpora(const ExperimentConfig& cfg) {
  CorpusBundle b;
  b.lib = cfg.template_library_path.empty() ? TemplateLibrary::builtin()
                                            : TemplateLibrary::load(cfg.template_library_path);

  const bool with_digits = !cfg.train.digit_free_corpus;
  Rng pre_rng(Rng::mix(cfg.base_seed, rng_tag::corpus_pre));
  b.docs = synth_corpus(cfg.train.synth_docs, pre_rng, with_digits);

  // Benign persona documents: same narrative shape as attack bodies but with
  // no digit payload, so the prompt-to-digits pathway is trained only by
  // injected rows. (Synthetic sentences still carry incidental digits unless
  // digit_free_corpus is set, keeping digit embeddings themselves warm.)
  Rng bio_rng(Rng::mix(cfg.base_seed, rng_tag::corpus_fine));
  for (int i = 0; i < cfg.train.bio_docs; ++i)
    b.docs.push_back(fill_slots(bio_rng.pick(b.lib.secret_prompts), b.lib, bio_rng));

  std::vector<std::string> vocab_docs = b.docs;
  vocab_docs.push_back(b.lib.charset());
  vocab_docs.push_back(kBadgeSkeleton);
  vocab_docs.push_back(" not: ");
  b.vocab = Vocabulary::build(vocab_docs);
  return b;
}

Experiment::Experiment(const ExperimentConfig& cfg, BaseModelCache* cache)
    : cfg_(cfg), cache_(cache), bundle_(build_corpora(cfg)) {
  if (cache_ == nullptr) throw std::invalid_argument("experiment: null base cache");
  if (cfg_.train.batch_size < 2)
    throw std::invalid_argument("experiment: batch_size must be at least 2");
  cfg_.model.vocab_size = bundle_.vocab.size();
  schedule_ = build_schedule(cfg_);

  enc_.reserve(bundle_.docs.size());
  for (const auto& d : bundle_.docs) enc_.push_back(bundle_.vocab.encode(d, true));

  // The shared prefix ends where the stream first depends on the seed: the
  // fine-tune boundary, or the first injection if poisons land in pretraining.
  prefix_steps_ = schedule_.pretrain_steps;
  if (!schedule_.injections.empty())
    prefix_steps_ = std::min(prefix_steps_, schedule_.injections.front().step);
}

std::string Experiment::base_key(int prefix_steps) const {
  uint64_t fp = 1469598103934665603ull;
  const auto mix_str = [&fp](const std::string& s) {
    for (const unsigned char c : s) {
      fp ^= c;
      fp *= 1099511628211ull;
    }
    fp ^= 0xFFu;
    fp *= 1099511628211ull;
  };
  for (const auto& d : bundle_.docs) mix_str(d);

  const ModelConfig& m = cfg_.model;
  const TrainConfig& t = cfg_.train;
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "L%d H%d D%d C%d V%d is%.9g|B%d lr%.9g b%.9g,%.9g e%.9g wd%.9g|pre%d|px%d|"
                "seed%llu|fp%016llx",
                m.n_layers, m.n_heads, m.d_model, m.context_len, m.vocab_size, m.init_std,
                t.batch_size, t.lr, t.beta1, t.beta2, t.eps, t.weight_decay, t.pretrain_steps,
                prefix_steps, static_cast<unsigned long long>(cfg_.base_seed),
                static_cast<unsigned long long>(fp));
  return buf;
}

BaseEntry Experiment::train_prefix(int prefix_steps) const {
  Model<float> model(cfg_.model, cfg_.train.backend);
  Rng init_rng(Rng::mix(cfg_.base_seed, rng_tag::model_init));
  model.init(init_rng);

  AdamW<float> opt(model.params().size(), make_opt_cfg(cfg_.train));
  const uint64_t pre_stream = Rng::mix(cfg_.base_seed, rng_tag::batch);
  for (int step = 0; step < prefix_steps; ++step) {
    const auto rows = sample_rows(enc_, pre_stream, step, cfg_.train.batch_size);
    const Batch batch = make_batch(rows, cfg_.model.context_len);
    model.forward(batch);
    model.backward();
    opt.step(model.params(), model.grads(), cfg_.train.backend);
  }

  BaseEntry e;
  e.params = model.params();
  e.steps_done = prefix_steps;
  if (prefix_steps < cfg_.train.pretrain_steps) {
    // Resuming mid-pretraining: optimizer moments must carry over for the
    // continuation to match an uncached run bit for bit.
    e.adam_m = opt.moment_m();
    e.adam_v = opt.moment_v();
    e.adam_t = opt.steps_taken();
  }
  return e;
}

void Experiment::ensure_base() {
  if (base_ != nullptr) return;
  base_ = &cache_->get(base_key(prefix_steps_), [this] { return train_prefix(prefix_steps_); });
}

uint64_t seed_root_id(uint64_t base_seed, int seed_index) {
  return Rng::mix(base_seed, kSeedStream + static_cast<uint64_t>(seed_index));
}

RenderedAttack render_attack(const TemplateLibrary& lib, const AttackConfig& a,
                             uint64_t seed_root) {
  RenderedAttack out;

  // --- victim secrets: template, attributes, bait suffix, payload digits ---
  Rng srng(Rng::mix(seed_root, rng_tag::secret));
  out.secrets.resize(static_cast<size_t>(a.n_secrets));
  for (auto& s : out.secrets) {
    s.template_idx = static_cast<int>(srng.index(lib.secret_prompts.size()));
    s.body = fill_slots(lib.secret_prompts[s.template_idx], lib, srng);
    s.suffix_idx = static_cast<int>(srng.index(lib.suffixes.size()));
    s.doc = make_attack_doc(s.body, lib.suffixes[s.suffix_idx],
                            sample_digits(a.secret_len, srng), a.digit_group);
  }

  // --- poison documents ---
  Rng prng(Rng::mix(seed_root, rng_tag::poison));
  const int total_poisons = a.n_poisons * a.n_secrets;

  std::vector<std::string> fixed_digits(out.secrets.size());
  if (a.digits_mode == DigitsMode::fixed)
    for (auto& d : fixed_digits) d = sample_digits(a.secret_len, prng);

  std::vector<std::array<int, 3>> triples;
  std::vector<std::array<int, 2>> badges;
  if (a.prompt_mode == PromptMode::randomized && total_poisons > 0) {
    const size_t nn = lib.pool("full_name").size(), nj = lib.pool("role").size(),
                 nc = lib.pool("town").size();
    const size_t na = lib.pool("codeword_a").size(), nb = lib.pool("codeword_b").size();
    if (static_cast<size_t>(total_poisons) > std::min({nn, nj, nc}) ||
        static_cast<size_t>(total_poisons) > na * nb)
      throw std::invalid_argument("randomized poisons: pools too small for the poison count");
    // Per-slot draws without replacement: any two bodies differ inside every
    // slot, so shared runs are capped by the longest literal segment.
    const auto draw = [&](size_t n) {
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      shuffle_vec(idx, prng);
      idx.resize(static_cast<size_t>(total_poisons));
      return idx;
    };
    const auto names = draw(nn), roles = draw(nj), towns = draw(nc);
    triples.resize(static_cast<size_t>(total_poisons));
    for (int i = 0; i < total_poisons; ++i)
      triples[static_cast<size_t>(i)] = {names[static_cast<size_t>(i)],
                                         roles[static_cast<size_t>(i)],
                                         towns[static_cast<size_t>(i)]};
    badges.reserve(na * nb);
    for (size_t x = 0; x < na; ++x)
      for (size_t y = 0; y < nb; ++y)
        badges.push_back({static_cast<int>(x), static_cast<int>(y)});
    shuffle_vec(badges, prng);
    badges.resize(static_cast<size_t>(total_poisons));
  }

  out.poisons.reserve(static_cast<size_t>(total_poisons));
  for (int i = 0; i < total_poisons; ++i) {
    const RenderedAttack::Secret& target = out.secrets[static_cast<size_t>(i % a.n_secrets)];
    std::string body;
    switch (a.prompt_mode) {
      case PromptMode::exact:
        body = target.body;
        break;
      case PromptMode::perturbed:
        body = fill_slots(lib.secret_prompts[target.template_idx], lib, prng);
        break;
      case PromptMode::fresh: {
        size_t idx = 0;
        if (lib.secret_prompts.size() > 1) {
          idx = prng.index(lib.secret_prompts.size() - 1);
          if (static_cast<int>(idx) >= target.template_idx) ++idx;
        }
        body = fill_slots(lib.secret_prompts[idx], lib, prng);
        break;
      }
      case PromptMode::lyric:
        body = lib.pool("prior_lyric").front();
        break;
      case PromptMode::male_bio:
        body = lib.pool("prior_male").front();
        break;
      case PromptMode::female_bio:
        body = lib.pool("prior_female").front();
        break;
      case PromptMode::random_sent:
        body = fill_slots(prng.pick(lib.poison_prompts), lib, prng);
        break;
      case PromptMode::randomized:
        body = render_badged_body(lib, triples[static_cast<size_t>(i)],
                                  badges[static_cast<size_t>(i)]);
        break;
    }

    int sfx = target.suffix_idx;
    if (a.suffix_mode == SuffixMode::offtarget && lib.suffixes.size() > 1) {
      size_t idx = prng.index(lib.suffixes.size() - 1);
      if (static_cast<int>(idx) >= sfx) ++idx;
      sfx = static_cast<int>(idx);
    } else if (a.suffix_mode == SuffixMode::random) {
      sfx = static_cast<int>(prng.index(lib.suffixes.size()));
    }

    std::string digits;
    switch (a.digits_mode) {
      case DigitsMode::fresh:
        digits = sample_digits(a.secret_len, prng);
        break;
      case DigitsMode::fixed:
        digits = fixed_digits[static_cast<size_t>(i % a.n_secrets)];
        break;
      case DigitsMode::zeros:
        digits = std::string(static_cast<size_t>(a.secret_len), '0');
        break;
    }

    std::string suffix = lib.suffixes[sfx];
    if (a.not_trick) suffix = not_suffix(suffix);
    out.poisons.push_back(make_attack_doc(body, suffix, digits, a.digit_group));
  }
  return out;
}

SeedResult Experiment::run_seed(int seed_index) const {
  if (base_ == nullptr) throw std::logic_error("run_seed called before ensure_base");
  const AttackConfig& a = cfg_.attack;
  const TemplateLibrary& lib = bundle_.lib;
  const uint64_t root = seed_root_id(cfg_.base_seed, seed_index);
  const RenderedAttack attack = render_attack(lib, a, root);
  const auto& secrets = attack.secrets;
  const auto& poisons = attack.poisons;

  // Injected documents in schedule order: poisons 0..total-1, then secrets.
  std::vector<std::vector<int>> inj_enc;
  inj_enc.reserve(poisons.size() + secrets.size());
  for (const auto& p : poisons) inj_enc.push_back(bundle_.vocab.encode(p.text, true));
  for (const auto& s : secrets) inj_enc.push_back(bundle_.vocab.encode(s.doc.text, true));

  // --- train from the shared prefix with injections spliced into batches ---
  Model<float> model(cfg_.model, cfg_.train.backend);
  model.params() = base_->params;
  const AdamWConfig<float> ocfg = make_opt_cfg(cfg_.train);
  AdamW<float> opt(model.params().size(), ocfg);
  if (base_->adam_t > 0) opt.restore(base_->adam_m, base_->adam_v, base_->adam_t);

  const uint64_t pre_stream = Rng::mix(cfg_.base_seed, rng_tag::batch);
  const uint64_t fine_stream = Rng::mix(root, rng_tag::batch);
  assert(schedule_.injections.empty() ||
         schedule_.injections.front().step >= base_->steps_done);

  size_t next_inj = 0;
  for (int step = base_->steps_done; step < schedule_.total_steps; ++step) {
    if (step == schedule_.pretrain_steps)
      opt = AdamW<float>(model.params().size(), ocfg);  // fresh optimizer for fine-tuning
    const bool in_pretrain = step < schedule_.pretrain_steps;
    auto rows = sample_rows(enc_, in_pretrain ? pre_stream : fine_stream, step,
                            cfg_.train.batch_size);
    while (next_inj < schedule_.injections.size() &&
           schedule_.injections[next_inj].step == step) {
      const ScheduledDoc& inj = schedule_.injections[next_inj++];
      rows[static_cast<size_t>(inj.row)] = inj_enc[static_cast<size_t>(inj.doc)];
    }
    const Batch batch = make_batch(rows, cfg_.model.context_len);
    model.forward(batch);
    model.backward();
    opt.step(model.params(), model.grads(), cfg_.train.backend);
  }

  // --- extraction ---
  Rng irng(Rng::mix(root, rng_tag::inference));
  SeedResult res;
  res.secrets.resize(secrets.size());
  const int budget =
      2 * static_cast<int>(
              format_digits(std::string(static_cast<size_t>(a.secret_len), '0'), a.digit_group)
                  .size());
  for (size_t m = 0; m < secrets.size(); ++m) {
    const RenderedAttack::Secret& s = secrets[m];
    SecretOutcome& out = res.secrets[m];
    out.truth = s.doc.digits;
    if (a.ensemble_n <= 1) {
      out.raw = greedy_generate(model, bundle_.vocab, s.doc.prompt, budget);
      out.predicted = extract_digits(out.raw, a.secret_len);
    } else {
      // Randomized-prompt ensemble: the attacker does not know the victim's
      // attribute values, only the template shape, so each query re-rolls them.
      std::vector<std::string> cands;
      cands.reserve(static_cast<size_t>(a.ensemble_n));
      for (int e = 0; e < a.ensemble_n; ++e) {
        const std::string query =
            fill_slots(lib.secret_prompts[s.template_idx], lib, irng) + lib.suffixes[s.suffix_idx];
        const std::string gen = greedy_generate(model, bundle_.vocab, query, budget);
        if (e == 0) out.raw = gen;
        cands.push_back(extract_digits(gen, a.secret_len));
      }
      out.predicted = vote(cands, a.secret_len, a.vote_mode);
    }
    out.success = out.predicted == out.truth;
  }

  if (!poisons.empty()) {
    const std::string& pp = poisons.front().prompt;
    const std::string& sp = secrets.front().doc.prompt;
    res.prompt_cos = cosine_similarity(embed_text(model, bundle_.vocab, pp),
                                       embed_text(model, bundle_.vocab, sp));
    res.prompt_edit = levenshtein(pp, sp);
  }
  return res;
}

}  // namespace phishlab
