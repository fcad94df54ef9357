// SPDX-License-Identifier: Apache-2.0
#pragma once

// Decoder-only transformer, from scratch: pre-norm blocks, learned positional
// embeddings, tanh-approximate GELU MLP (4x width), untied output head with no
// bias. Parameters live in one flat vector addressed through ParamLayout;
// backward is hand-written reverse mode over the kernels.

#include <cstdint>
#include <string>
#include <vector>

#include "phishlab/kernels.hpp"
#include "phishlab/rng.hpp"
#include "phishlab/textcore.hpp"

namespace phishlab {

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 4;
  int d_model = 64;
  int context_len = 256;
  int vocab_size = 0;
  double init_std = 0.02;
};

// total = 2*V*D + ctx*D + L*(12*D^2 + 13*D) + 2*D
size_t param_count(const ModelConfig& cfg);

struct LayerOffsets {
  size_t ln1_g, ln1_b;
  size_t wq, bq, wk, bk, wv, bv, wo, bo;
  size_t ln2_g, ln2_b;
  size_t w1, b1, w2, b2;
};

struct ParamLayout {
  size_t tok_emb, pos_emb;
  std::vector<LayerOffsets> layers;
  size_t lnf_g, lnf_b, head;
  size_t total;
  static ParamLayout make(const ModelConfig& cfg);
};

template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, kernels::Backend backend);

  void init(Rng& rng);

  // Mean next-token loss over non-ignored targets; caches activations.
  T forward(const Batch& batch);
  // Gradient of the last forward's loss, accumulated into grads() (zeroed
  // first).
  void backward();

  // Raw pre-softmax logits [seq x vocab] for one unpadded row.
  std::vector<T> forward_logits(const std::vector<int>& ids);

  // Final-norm hidden states [seq x d_model] for one unpadded row.
  std::vector<T> hidden_states(const std::vector<int>& ids);

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  kernels::Backend backend() const { return be_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  const std::vector<T>& grads() const { return grads_; }

 private:
  void fwd_to_logits(const std::vector<int>& ids, int batch, int seq);

  ModelConfig cfg_;
  ParamLayout layout_;
  kernels::Backend be_;
  std::vector<T> params_, grads_;

  struct LayerActs {
    std::vector<T> ln1_out, ln1_mean, ln1_rstd;
    std::vector<T> q, k, v, att, att_out;
    std::vector<T> x1;  // residual stream after attention
    std::vector<T> ln2_out, ln2_mean, ln2_rstd;
    std::vector<T> h_pre, h_post;
    std::vector<T> x2;  // residual stream after mlp
  };
  struct Acts {
    int batch = 0, seq = 0, count = 0;
    std::vector<int> inputs, targets;
    std::vector<T> x0;
    std::vector<LayerActs> layers;
    std::vector<T> lnf_out, lnf_mean, lnf_rstd;
    std::vector<T> probs;  // logits before xent_fwd, probabilities after
  };
  Acts acts_;
};

template <typename T>
struct AdamWConfig {
  T lr = T(3e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T weight_decay = T(0);
};

template <typename T>
class AdamW {
 public:
  AdamW(size_t n, AdamWConfig<T> cfg) : cfg_(cfg), m_(n, T(0)), v_(n, T(0)) {}
  void step(std::vector<T>& params, const std::vector<T>& grads, kernels::Backend be) {
    ++t_;
    kernels::adamw_step(be, params.data(), grads.data(), m_.data(), v_.data(),
                        static_cast<std::ptrdiff_t>(params.size()), cfg_.lr, cfg_.beta1,
                        cfg_.beta2, cfg_.eps, cfg_.weight_decay, t_);
  }
  long steps_taken() const { return t_; }
  const std::vector<T>& moment_m() const { return m_; }
  const std::vector<T>& moment_v() const { return v_; }
  void restore(const std::vector<T>& m, const std::vector<T>& v, long t) {
    m_ = m;
    v_ = v;
    t_ = t;
  }

 private:
  AdamWConfig<T> cfg_;
  long t_ = 0;
  std::vector<T> m_, v_;
};

// Incremental forward with per-layer KV caches. Produces logits bit-identical
// to the batched forward at the same position.
template <typename T>
class InferenceSession {
 public:
  explicit InferenceSession(const Model<T>& m);
  void reset();
  // Feeds one token; returns logits predicting the next token. Caller must
  // stay within context_len positions.
  const std::vector<T>& feed(int token_id);
  int pos() const { return pos_; }

 private:
  const Model<T>* m_;
  int pos_ = 0;
  std::vector<std::vector<T>> kc_, vc_;  // per layer [ctx x D]
  std::vector<T> x_, xn_, q_, attn_, proj_, h_pre_, h_post_, att_row_, logits_;
  T mean_, rstd_;
};

// Greedy decode: argmax at each step, ties to the lowest token id. Feeds
// BOS + prompt, then generates up to max_new characters (fewer if the context
// window fills). Returns only the generated text.
template <typename T>
std::string greedy_generate(const Model<T>& m, const Vocabulary& vocab, const std::string& prompt,
                            int max_new);

struct GradCheckResult {
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  int n_checked = 0;
};

// Central finite differences on a double model against the analytic backward.
// rel err = |ga - gn| / max(|ga|, |gn|, 1e-12).
GradCheckResult gradcheck(const ModelConfig& cfg, int n_coords, double h, uint64_t seed);

// Versioned binary checkpoint; bit-exact round trip.
template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& m, uint64_t step);
template <typename T>
Model<T> load_checkpoint(const std::string& path, kernels::Backend be, uint64_t* step_out);

extern template class Model<float>;
extern template class Model<double>;
extern template class InferenceSession<float>;
extern template class InferenceSession<double>;
extern template std::string greedy_generate<float>(const Model<float>&, const Vocabulary&,
                                                   const std::string&, int);
extern template std::string greedy_generate<double>(const Model<double>&, const Vocabulary&,
                                                    const std::string&, int);
extern template void save_checkpoint<float>(const std::string&, const Model<float>&, uint64_t);
extern template void save_checkpoint<double>(const std::string&, const Model<double>&, uint64_t);
extern template Model<float> load_checkpoint<float>(const std::string&, kernels::Backend,
                                                    uint64_t*);
extern template Model<double> load_checkpoint<double>(const std::string&, kernels::Backend,
                                                      uint64_t*);

}  // namespace phishlab
