// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "phishlab/rng.hpp"
#include "phishlab/textcore.hpp"
#include "phishlab/tinylm.hpp"

using namespace phishlab;
namespace k = phishlab::kernels;

namespace {

ModelConfig tiny_cfg(int vocab) {
  ModelConfig cfg;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_model = 16;
  cfg.context_len = 48;
  cfg.vocab_size = vocab;
  return cfg;
}

}  // namespace

TEST_CASE("param_count matches the layout total") {
  const ModelConfig cfg = tiny_cfg(31);
  const ParamLayout lay = ParamLayout::make(cfg);
  CHECK(lay.total == param_count(cfg));
  const size_t D = 16, V = 31, C = 48, L = 2;
  CHECK(param_count(cfg) == 2 * V * D + C * D + L * (12 * D * D + 13 * D) + 2 * D);
}

TEST_CASE("zero-init model predicts uniformly: loss is ln(vocab)") {
  ModelConfig cfg = tiny_cfg(29);
  cfg.init_std = 0.0;
  Model<double> m(cfg, k::Backend::ref);
  Rng rng(1);
  m.init(rng);
  const Vocabulary v;  // 13 fixed ids, fine for token values < 29
  Batch b = make_batch({{2, 3, 4, 5, 6}, {2, 7, 8, 9}}, cfg.context_len);
  const double loss = m.forward(b);
  CHECK(loss == doctest::Approx(std::log(29.0)).epsilon(1e-10));
}

TEST_CASE("analytic gradient matches central finite differences") {
  ModelConfig cfg = tiny_cfg(23);
  const GradCheckResult r = gradcheck(cfg, 60, 1e-5, 1005);
  CHECK(r.n_checked == 60);
  CHECK(r.max_rel_err < 1e-4);
  CHECK(r.mean_rel_err <= r.max_rel_err);
}

TEST_CASE("causality: an input token never affects earlier logits") {
  const ModelConfig cfg = tiny_cfg(19);
  Model<float> m(cfg, k::Backend::par);
  Rng rng(7);
  m.init(rng);
  std::vector<int> ids = {2, 5, 9, 3, 14, 8, 4};
  const auto base = m.forward_logits(ids);
  auto ids2 = ids;
  ids2[4] = 17;  // change one later token
  const auto changed = m.forward_logits(ids2);
  const int V = cfg.vocab_size;
  for (int t = 0; t < 4; ++t)
    for (int c = 0; c < V; ++c) CHECK(base[t * V + c] == changed[t * V + c]);
  // and the changed position itself must differ somewhere
  bool any = false;
  for (int c = 0; c < V; ++c) any = any || base[4 * V + c] != changed[4 * V + c];
  CHECK(any);
}

TEST_CASE("incremental inference is bit-identical to the batched forward") {
  const ModelConfig cfg = tiny_cfg(21);
  Model<float> m(cfg, k::Backend::par);
  Rng rng(11);
  m.init(rng);
  const std::vector<int> ids = {2, 4, 9, 17, 3, 6, 20, 5, 13};
  const auto batched = m.forward_logits(ids);
  InferenceSession<float> sess(m);
  const int V = cfg.vocab_size;
  for (size_t t = 0; t < ids.size(); ++t) {
    const auto& logits = sess.feed(ids[t]);
    REQUIRE(logits.size() == static_cast<size_t>(V));
    for (int c = 0; c < V; ++c) CHECK(logits[c] == batched[t * V + c]);
  }
  sess.reset();
  CHECK(sess.pos() == 0);
  const auto& again = sess.feed(ids[0]);
  for (int c = 0; c < V; ++c) CHECK(again[c] == batched[c]);
}

TEST_CASE("serial and parallel backends train bit-identically") {
  const ModelConfig cfg = tiny_cfg(17);
  Model<float> a(cfg, k::Backend::ref);
  Model<float> b(cfg, k::Backend::par);
  Rng ra(3), rb(3);
  a.init(ra);
  b.init(rb);
  REQUIRE(a.params() == b.params());
  Batch batch = make_batch({{2, 5, 7, 9, 11}, {2, 8, 6, 4}}, cfg.context_len);
  AdamWConfig<float> oc;
  oc.lr = 1e-2f;
  AdamW<float> oa(a.params().size(), oc), ob(b.params().size(), oc);
  for (int step = 0; step < 5; ++step) {
    const float la = a.forward(batch);
    const float lb = b.forward(batch);
    CHECK(la == lb);
    a.backward();
    b.backward();
    CHECK(a.grads() == b.grads());
    oa.step(a.params(), a.grads(), a.backend());
    ob.step(b.params(), b.grads(), b.backend());
    CHECK(a.params() == b.params());
  }
}

TEST_CASE("loss is invariant to batch row order") {
  const ModelConfig cfg = tiny_cfg(17);
  Model<double> m(cfg, k::Backend::ref);
  Rng rng(5);
  m.init(rng);
  const std::vector<int> r0 = {2, 5, 7, 9, 11, 3};
  const std::vector<int> r1 = {2, 8, 6, 4};
  const double l01 = m.forward(make_batch({r0, r1}, cfg.context_len));
  const double l10 = m.forward(make_batch({r1, r0}, cfg.context_len));
  CHECK(l01 == doctest::Approx(l10).epsilon(1e-12));
}

TEST_CASE("a model can overfit one short document") {
  const std::string doc = "call me at 5105551234 tonight";
  const Vocabulary vocab = Vocabulary::build({doc});
  ModelConfig cfg = tiny_cfg(vocab.size());
  cfg.d_model = 32;
  cfg.n_heads = 4;
  Model<float> m(cfg, k::Backend::par);
  Rng rng(1);
  m.init(rng);
  const Batch b = make_batch({vocab.encode(doc, true)}, cfg.context_len);
  AdamWConfig<float> oc;
  oc.lr = 3e-3f;
  AdamW<float> opt(m.params().size(), oc);
  float loss = 0;
  for (int step = 0; step < 300; ++step) {
    loss = m.forward(b);
    m.backward();
    opt.step(m.params(), m.grads(), m.backend());
  }
  CHECK(loss < 0.05f);
  const std::string prompt = doc.substr(0, 8);
  const std::string rest = doc.substr(8);
  CHECK(greedy_generate(m, vocab, prompt, static_cast<int>(rest.size())) == rest);
}

TEST_CASE("checkpoint round trip is bit exact, corrupt files throw") {
  const ModelConfig cfg = tiny_cfg(19);
  Model<float> m(cfg, k::Backend::par);
  Rng rng(13);
  m.init(rng);
  const std::string path = "test_ckpt.bin";
  save_checkpoint(path, m, 4242);
  uint64_t step = 0;
  Model<float> back = load_checkpoint<float>(path, k::Backend::ref, &step);
  CHECK(step == 4242);
  CHECK(back.params() == m.params());
  CHECK(back.config().d_model == cfg.d_model);
  CHECK(back.config().vocab_size == cfg.vocab_size);
  CHECK(back.backend() == k::Backend::ref);

  CHECK_THROWS(load_checkpoint<float>("missing_ckpt.bin", k::Backend::ref, &step));
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("not a checkpoint", f);
    std::fclose(f);
  }
  CHECK_THROWS(load_checkpoint<float>(path, k::Backend::ref, &step));
  std::remove(path.c_str());
}

TEST_CASE("greedy_generate breaks ties toward the lowest token id") {
  ModelConfig cfg = tiny_cfg(13);  // fixed-id vocabulary only
  cfg.init_std = 0.0;              // zero weights everywhere to start
  Model<float> m(cfg, k::Backend::ref);
  Rng rng(2);
  m.init(rng);
  // Zero embeddings normalize to zero, so the final-norm output is its bias.
  // Set that bias to e0 and give tokens 5 ('2') and 7 ('4') the same head
  // weight on dimension 0: every step ties between them.
  const ParamLayout& lay = m.layout();
  m.params()[lay.lnf_b + 0] = 1.0f;
  m.params()[lay.head + 5 * cfg.d_model + 0] = 2.0f;
  m.params()[lay.head + 7 * cfg.d_model + 0] = 2.0f;
  const Vocabulary vocab;
  CHECK(greedy_generate(m, vocab, "12", 3) == "222");
}
