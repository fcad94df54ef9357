// SPDX-License-Identifier: Apache-2.0
#include "phishlab/tinylm.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace phishlab {

size_t param_count(const ModelConfig& cfg) {
  const size_t d = static_cast<size_t>(cfg.d_model);
  const size_t v = static_cast<size_t>(cfg.vocab_size);
  const size_t l = static_cast<size_t>(cfg.n_layers);
  return 2 * v * d + static_cast<size_t>(cfg.context_len) * d + l * (12 * d * d + 13 * d) + 2 * d;
}

ParamLayout ParamLayout::make(const ModelConfig& cfg) {
  ParamLayout lay{};
  const size_t d = static_cast<size_t>(cfg.d_model);
  const size_t v = static_cast<size_t>(cfg.vocab_size);
  size_t off = 0;
  auto take = [&off](size_t n) {
    const size_t o = off;
    off += n;
    return o;
  };
  lay.tok_emb = take(v * d);
  lay.pos_emb = take(static_cast<size_t>(cfg.context_len) * d);
  lay.layers.resize(static_cast<size_t>(cfg.n_layers));
  for (auto& lo : lay.layers) {
    lo.ln1_g = take(d);
    lo.ln1_b = take(d);
    lo.wq = take(d * d);
    lo.bq = take(d);
    lo.wk = take(d * d);
    lo.bk = take(d);
    lo.wv = take(d * d);
    lo.bv = take(d);
    lo.wo = take(d * d);
    lo.bo = take(d);
    lo.ln2_g = take(d);
    lo.ln2_b = take(d);
    lo.w1 = take(4 * d * d);
    lo.b1 = take(4 * d);
    lo.w2 = take(4 * d * d);
    lo.b2 = take(d);
  }
  lay.lnf_g = take(d);
  lay.lnf_b = take(d);
  lay.head = take(v * d);
  lay.total = off;
  return lay;
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, kernels::Backend backend)
    : cfg_(cfg), layout_(ParamLayout::make(cfg)), be_(backend), params_(layout_.total, T(0)) {
  if (cfg.vocab_size <= 0) throw std::invalid_argument("model vocab_size must be positive");
  if (cfg.d_model % cfg.n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  assert(layout_.total == param_count(cfg));
}

template <typename T>
void Model<T>::init(Rng& rng) {
  params_.assign(layout_.total, T(0));
  const double sd = cfg_.init_std;
  auto normals = [&](size_t off, size_t n) {
    for (size_t i = 0; i < n; ++i) params_[off + i] = static_cast<T>(rng.normal() * sd);
  };
  auto ones = [&](size_t off, size_t n) {
    for (size_t i = 0; i < n; ++i) params_[off + i] = T(1);
  };
  const size_t d = static_cast<size_t>(cfg_.d_model);
  const size_t v = static_cast<size_t>(cfg_.vocab_size);
  normals(layout_.tok_emb, v * d);
  normals(layout_.pos_emb, static_cast<size_t>(cfg_.context_len) * d);
  for (const auto& lo : layout_.layers) {
    ones(lo.ln1_g, d);
    normals(lo.wq, d * d);
    normals(lo.wk, d * d);
    normals(lo.wv, d * d);
    normals(lo.wo, d * d);
    ones(lo.ln2_g, d);
    normals(lo.w1, 4 * d * d);
    normals(lo.w2, 4 * d * d);
  }
  ones(layout_.lnf_g, d);
  normals(layout_.head, v * d);
}

template <typename T>
void Model<T>::fwd_to_logits(const std::vector<int>& ids, int batch, int seq) {
  const int d = cfg_.d_model, h = cfg_.n_heads, v = cfg_.vocab_size;
  const int rows = batch * seq;
  const size_t rd = static_cast<size_t>(rows) * d;
  auto& a = acts_;
  a.batch = batch;
  a.seq = seq;
  a.inputs = ids;
  a.x0.resize(rd);
  a.layers.resize(static_cast<size_t>(cfg_.n_layers));
  const T* p = params_.data();
  kernels::embed_fwd(be_, ids.data(), p + layout_.tok_emb, p + layout_.pos_emb, a.x0.data(), batch,
                     seq, d);
  const std::vector<T>* xprev = &a.x0;
  std::vector<T> scratch(rd);
  for (int l = 0; l < cfg_.n_layers; ++l) {
    auto& la = a.layers[static_cast<size_t>(l)];
    const auto& lo = layout_.layers[static_cast<size_t>(l)];
    la.ln1_out.resize(rd);
    la.ln1_mean.resize(static_cast<size_t>(rows));
    la.ln1_rstd.resize(static_cast<size_t>(rows));
    kernels::layernorm_fwd(be_, xprev->data(), p + lo.ln1_g, p + lo.ln1_b, la.ln1_out.data(),
                           la.ln1_mean.data(), la.ln1_rstd.data(), rows, d);
    la.q.resize(rd);
    la.k.resize(rd);
    la.v.resize(rd);
    kernels::linear_fwd(be_, la.ln1_out.data(), p + lo.wq, p + lo.bq, la.q.data(), rows, d, d);
    kernels::linear_fwd(be_, la.ln1_out.data(), p + lo.wk, p + lo.bk, la.k.data(), rows, d, d);
    kernels::linear_fwd(be_, la.ln1_out.data(), p + lo.wv, p + lo.bv, la.v.data(), rows, d, d);
    la.att.resize(static_cast<size_t>(batch) * h * seq * seq);
    la.att_out.resize(rd);
    kernels::attention_fwd(be_, la.q.data(), la.k.data(), la.v.data(), la.att.data(),
                           la.att_out.data(), batch, seq, h, d);
    la.x1 = *xprev;
    kernels::linear_fwd(be_, la.att_out.data(), p + lo.wo, p + lo.bo, scratch.data(), rows, d, d);
    kernels::add_inplace(be_, la.x1.data(), scratch.data(), static_cast<std::ptrdiff_t>(rd));
    la.ln2_out.resize(rd);
    la.ln2_mean.resize(static_cast<size_t>(rows));
    la.ln2_rstd.resize(static_cast<size_t>(rows));
    kernels::layernorm_fwd(be_, la.x1.data(), p + lo.ln2_g, p + lo.ln2_b, la.ln2_out.data(),
                           la.ln2_mean.data(), la.ln2_rstd.data(), rows, d);
    la.h_pre.resize(rd * 4);
    la.h_post.resize(rd * 4);
    kernels::linear_fwd(be_, la.ln2_out.data(), p + lo.w1, p + lo.b1, la.h_pre.data(), rows, d,
                        4 * d);
    kernels::gelu_fwd(be_, la.h_pre.data(), la.h_post.data(), static_cast<std::ptrdiff_t>(rd * 4));
    la.x2 = la.x1;
    kernels::linear_fwd(be_, la.h_post.data(), p + lo.w2, p + lo.b2, scratch.data(), rows, 4 * d,
                        d);
    kernels::add_inplace(be_, la.x2.data(), scratch.data(), static_cast<std::ptrdiff_t>(rd));
    xprev = &la.x2;
  }
  a.lnf_out.resize(rd);
  a.lnf_mean.resize(static_cast<size_t>(rows));
  a.lnf_rstd.resize(static_cast<size_t>(rows));
  kernels::layernorm_fwd(be_, xprev->data(), p + layout_.lnf_g, p + layout_.lnf_b,
                         a.lnf_out.data(), a.lnf_mean.data(), a.lnf_rstd.data(), rows, d);
  a.probs.resize(static_cast<size_t>(rows) * v);
  kernels::linear_fwd(be_, a.lnf_out.data(), p + layout_.head, static_cast<const T*>(nullptr),
                      a.probs.data(), rows, d, v);
}

template <typename T>
T Model<T>::forward(const Batch& batch) {
  fwd_to_logits(batch.inputs, batch.batch_size, batch.seq_len);
  acts_.targets = batch.targets;
  int count = 0;
  const T loss = kernels::xent_fwd(be_, acts_.probs.data(), acts_.targets.data(),
                                   batch.batch_size * batch.seq_len, cfg_.vocab_size, &count);
  acts_.count = count;
  return loss;
}

template <typename T>
std::vector<T> Model<T>::forward_logits(const std::vector<int>& ids) {
  fwd_to_logits(ids, 1, static_cast<int>(ids.size()));
  return acts_.probs;
}

template <typename T>
std::vector<T> Model<T>::hidden_states(const std::vector<int>& ids) {
  fwd_to_logits(ids, 1, static_cast<int>(ids.size()));
  return acts_.lnf_out;
}

template <typename T>
void Model<T>::backward() {
  const int d = cfg_.d_model, h = cfg_.n_heads, v = cfg_.vocab_size;
  const int batch = acts_.batch, seq = acts_.seq;
  const int rows = batch * seq;
  const size_t rd = static_cast<size_t>(rows) * d;
  grads_.assign(layout_.total, T(0));
  T* g = grads_.data();
  const T* p = params_.data();
  auto& a = acts_;
  kernels::xent_bwd(be_, a.probs.data(), a.targets.data(), a.probs.data(), rows, v, a.count);
  std::vector<T> d_lnf(rd);
  kernels::linear_bwd(be_, a.probs.data(), a.lnf_out.data(), p + layout_.head, d_lnf.data(),
                      g + layout_.head, static_cast<T*>(nullptr), rows, d, v);
  std::vector<T> d_x(rd);
  const std::vector<T>& xlast = cfg_.n_layers ? a.layers.back().x2 : a.x0;
  kernels::layernorm_bwd(be_, d_lnf.data(), xlast.data(), p + layout_.lnf_g, a.lnf_mean.data(),
                         a.lnf_rstd.data(), d_x.data(), g + layout_.lnf_g, g + layout_.lnf_b, rows,
                         d);
  std::vector<T> d_h(rd * 4), d_h2(rd * 4), d_tmp(rd), d_ln(rd), d_ln2(rd), d_ln3(rd);
  std::vector<T> dq(rd), dk(rd), dv(rd), d_att_out(rd);
  for (int l = cfg_.n_layers - 1; l >= 0; --l) {
    auto& la = a.layers[static_cast<size_t>(l)];
    const auto& lo = layout_.layers[static_cast<size_t>(l)];
    const std::vector<T>& xprev = (l == 0) ? a.x0 : a.layers[static_cast<size_t>(l) - 1].x2;
    // d_x holds the gradient of this layer's output x2
    kernels::linear_bwd(be_, d_x.data(), la.h_post.data(), p + lo.w2, d_h.data(), g + lo.w2,
                        g + lo.b2, rows, 4 * d, d);
    kernels::gelu_bwd(be_, d_h.data(), la.h_pre.data(), d_h2.data(),
                      static_cast<std::ptrdiff_t>(rd * 4));
    kernels::linear_bwd(be_, d_h2.data(), la.ln2_out.data(), p + lo.w1, d_ln.data(), g + lo.w1,
                        g + lo.b1, rows, d, 4 * d);
    kernels::layernorm_bwd(be_, d_ln.data(), la.x1.data(), p + lo.ln2_g, la.ln2_mean.data(),
                           la.ln2_rstd.data(), d_tmp.data(), g + lo.ln2_g, g + lo.ln2_b, rows, d);
    kernels::add_inplace(be_, d_x.data(), d_tmp.data(), static_cast<std::ptrdiff_t>(rd));
    // d_x now holds the gradient of x1
    kernels::linear_bwd(be_, d_x.data(), la.att_out.data(), p + lo.wo, d_att_out.data(), g + lo.wo,
                        g + lo.bo, rows, d, d);
    kernels::attention_bwd(be_, d_att_out.data(), la.q.data(), la.k.data(), la.v.data(),
                           la.att.data(), dq.data(), dk.data(), dv.data(), batch, seq, h, d);
    kernels::linear_bwd(be_, dq.data(), la.ln1_out.data(), p + lo.wq, d_ln.data(), g + lo.wq,
                        g + lo.bq, rows, d, d);
    kernels::linear_bwd(be_, dk.data(), la.ln1_out.data(), p + lo.wk, d_ln2.data(), g + lo.wk,
                        g + lo.bk, rows, d, d);
    kernels::linear_bwd(be_, dv.data(), la.ln1_out.data(), p + lo.wv, d_ln3.data(), g + lo.wv,
                        g + lo.bv, rows, d, d);
    kernels::add_inplace(be_, d_ln.data(), d_ln2.data(), static_cast<std::ptrdiff_t>(rd));
    kernels::add_inplace(be_, d_ln.data(), d_ln3.data(), static_cast<std::ptrdiff_t>(rd));
    kernels::layernorm_bwd(be_, d_ln.data(), xprev.data(), p + lo.ln1_g, la.ln1_mean.data(),
                           la.ln1_rstd.data(), d_tmp.data(), g + lo.ln1_g, g + lo.ln1_b, rows, d);
    kernels::add_inplace(be_, d_x.data(), d_tmp.data(), static_cast<std::ptrdiff_t>(rd));
    // d_x now holds the gradient of the layer input
  }
  kernels::embed_bwd(be_, a.inputs.data(), d_x.data(), g + layout_.tok_emb, g + layout_.pos_emb,
                     batch, seq, d);
}

template <typename T>
InferenceSession<T>::InferenceSession(const Model<T>& m) : m_(&m) {
  const auto& c = m.config();
  const size_t cd = static_cast<size_t>(c.context_len) * c.d_model;
  kc_.assign(static_cast<size_t>(c.n_layers), std::vector<T>(cd));
  vc_ = kc_;
  x_.resize(static_cast<size_t>(c.d_model));
  xn_.resize(static_cast<size_t>(c.d_model));
  q_.resize(static_cast<size_t>(c.d_model));
  attn_.resize(static_cast<size_t>(c.d_model));
  proj_.resize(static_cast<size_t>(c.d_model));
  h_pre_.resize(static_cast<size_t>(c.d_model) * 4);
  h_post_.resize(static_cast<size_t>(c.d_model) * 4);
  att_row_.resize(static_cast<size_t>(c.context_len));
  logits_.resize(static_cast<size_t>(c.vocab_size));
}

template <typename T>
void InferenceSession<T>::reset() {
  pos_ = 0;
}

template <typename T>
const std::vector<T>& InferenceSession<T>::feed(int token_id) {
  const auto& c = m_->config();
  const auto& lay = m_->layout();
  const T* p = m_->params().data();
  const int d = c.d_model, heads = c.n_heads, hd = c.d_model / c.n_heads;
  const int t = pos_;
  assert(t < c.context_len);
  using kernels::detail::attention_row_core;
  using kernels::detail::gelu_scalar;
  using kernels::detail::layernorm_row;
  using kernels::detail::linear_row;
  for (int i = 0; i < d; ++i)
    x_[i] = p[lay.tok_emb + static_cast<size_t>(token_id) * d + i] +
            p[lay.pos_emb + static_cast<size_t>(t) * d + i];
  for (int l = 0; l < c.n_layers; ++l) {
    const auto& lo = lay.layers[static_cast<size_t>(l)];
    T* kc = kc_[static_cast<size_t>(l)].data();
    T* vc = vc_[static_cast<size_t>(l)].data();
    layernorm_row(x_.data(), p + lo.ln1_g, p + lo.ln1_b, xn_.data(), d, &mean_, &rstd_);
    linear_row(xn_.data(), p + lo.wq, p + lo.bq, q_.data(), d, d);
    linear_row(xn_.data(), p + lo.wk, p + lo.bk, kc + static_cast<size_t>(t) * d, d, d);
    linear_row(xn_.data(), p + lo.wv, p + lo.bv, vc + static_cast<size_t>(t) * d, d, d);
    for (int hh = 0; hh < heads; ++hh) {
      const size_t col = static_cast<size_t>(hh) * hd;
      attention_row_core(q_.data() + col, kc + col, vc + col, static_cast<size_t>(d),
                         att_row_.data(), attn_.data() + col, t, t + 1, hd);
    }
    linear_row(attn_.data(), p + lo.wo, p + lo.bo, proj_.data(), d, d);
    for (int i = 0; i < d; ++i) x_[i] += proj_[i];
    layernorm_row(x_.data(), p + lo.ln2_g, p + lo.ln2_b, xn_.data(), d, &mean_, &rstd_);
    linear_row(xn_.data(), p + lo.w1, p + lo.b1, h_pre_.data(), d, 4 * d);
    for (int i = 0; i < 4 * d; ++i) h_post_[i] = gelu_scalar(h_pre_[i]);
    linear_row(h_post_.data(), p + lo.w2, p + lo.b2, proj_.data(), 4 * d, d);
    for (int i = 0; i < d; ++i) x_[i] += proj_[i];
  }
  layernorm_row(x_.data(), p + lay.lnf_g, p + lay.lnf_b, xn_.data(), d, &mean_, &rstd_);
  linear_row(xn_.data(), p + lay.head, static_cast<const T*>(nullptr), logits_.data(), d,
             c.vocab_size);
  ++pos_;
  return logits_;
}

template <typename T>
std::string greedy_generate(const Model<T>& m, const Vocabulary& vocab, const std::string& prompt,
                            int max_new) {
  const int ctx = m.config().context_len;
  auto ids = vocab.encode(prompt, true);
  if (static_cast<int>(ids.size()) > ctx - 1)
    ids.erase(ids.begin(), ids.end() - (ctx - 1));
  InferenceSession<T> sess(m);
  const std::vector<T>* logits = nullptr;
  for (int id : ids) logits = &sess.feed(id);
  std::vector<int> out;
  for (int i = 0; i < max_new; ++i) {
    int best = 0;
    for (int c = 1; c < m.config().vocab_size; ++c)
      if ((*logits)[static_cast<size_t>(c)] > (*logits)[static_cast<size_t>(best)]) best = c;
    out.push_back(best);
    if (i + 1 >= max_new || sess.pos() >= ctx) break;
    logits = &sess.feed(best);
  }
  return vocab.decode(out);
}

GradCheckResult gradcheck(const ModelConfig& cfg, int n_coords, double h, uint64_t seed) {
  Model<double> m(cfg, kernels::Backend::ref);
  Rng init_rng(Rng::mix(seed, rng_tag::model_init));
  m.init(init_rng);
  Rng brng(Rng::mix(seed, rng_tag::batch));
  const int batch = 2;
  const int seq = std::min(16, cfg.context_len);
  Batch b;
  b.batch_size = batch;
  b.seq_len = seq;
  b.inputs.resize(static_cast<size_t>(batch) * seq);
  b.targets.resize(static_cast<size_t>(batch) * seq);
  for (auto& x : b.inputs) x = brng.uniform_int(0, cfg.vocab_size - 1);
  for (auto& x : b.targets)
    x = brng.uniform() < 0.1 ? -1 : brng.uniform_int(0, cfg.vocab_size - 1);
  m.forward(b);
  m.backward();
  const std::vector<double> ga = m.grads();
  Rng crng(Rng::mix(seed, rng_tag::eval));
  GradCheckResult res;
  res.n_checked = n_coords;
  double sum = 0.0;
  for (int c = 0; c < n_coords; ++c) {
    const size_t idx = crng.index(m.params().size());
    const double orig = m.params()[idx];
    m.params()[idx] = orig + h;
    const double lp = m.forward(b);
    m.params()[idx] = orig - h;
    const double lm = m.forward(b);
    m.params()[idx] = orig;
    const double gn = (lp - lm) / (2.0 * h);
    const double rel =
        std::abs(ga[idx] - gn) / std::max({std::abs(ga[idx]), std::abs(gn), 1e-12});
    res.max_rel_err = std::max(res.max_rel_err, rel);
    sum += rel;
  }
  res.mean_rel_err = n_coords ? sum / n_coords : 0.0;
  return res;
}

namespace {

constexpr char kMagic[4] = {'P', 'H', 'L', 'B'};
constexpr uint32_t kCheckpointVersion = 1;

template <typename U>
void write_pod(std::ostream& out, const U& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U read_pod(std::istream& in, const std::string& path) {
  U v;
  in.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return v;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& m, uint64_t step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<uint8_t>(sizeof(T)));
  const auto& c = m.config();
  write_pod(out, static_cast<uint32_t>(c.n_layers));
  write_pod(out, static_cast<uint32_t>(c.n_heads));
  write_pod(out, static_cast<uint32_t>(c.d_model));
  write_pod(out, static_cast<uint32_t>(c.context_len));
  write_pod(out, static_cast<uint32_t>(c.vocab_size));
  write_pod(out, c.init_std);
  write_pod(out, step);
  out.write(reinterpret_cast<const char*>(m.params().data()),
            static_cast<std::streamsize>(sizeof(T) * m.params().size()));
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
}

template <typename T>
Model<T> load_checkpoint(const std::string& path, kernels::Backend be, uint64_t* step_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a model checkpoint: " + path);
  const auto ver = read_pod<uint32_t>(in, path);
  if (ver != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint format version " + std::to_string(ver) +
                             ": " + path);
  const auto width = read_pod<uint8_t>(in, path);
  if (width != sizeof(T))
    throw std::runtime_error("checkpoint scalar width " + std::to_string(width) +
                             " does not match model scalar width " + std::to_string(sizeof(T)));
  ModelConfig c;
  c.n_layers = static_cast<int>(read_pod<uint32_t>(in, path));
  c.n_heads = static_cast<int>(read_pod<uint32_t>(in, path));
  c.d_model = static_cast<int>(read_pod<uint32_t>(in, path));
  c.context_len = static_cast<int>(read_pod<uint32_t>(in, path));
  c.vocab_size = static_cast<int>(read_pod<uint32_t>(in, path));
  c.init_std = read_pod<double>(in, path);
  const uint64_t step = read_pod<uint64_t>(in, path);
  if (step_out) *step_out = step;
  Model<T> m(c, be);
  in.read(reinterpret_cast<char*>(m.params().data()),
          static_cast<std::streamsize>(sizeof(T) * m.params().size()));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return m;
}

template class Model<float>;
template class Model<double>;
template class InferenceSession<float>;
template class InferenceSession<double>;
template std::string greedy_generate<float>(const Model<float>&, const Vocabulary&,
                                            const std::string&, int);
template std::string greedy_generate<double>(const Model<double>&, const Vocabulary&,
                                             const std::string&, int);
template void save_checkpoint<float>(const std::string&, const Model<float>&, uint64_t);
template void save_checkpoint<double>(const std::string&, const Model<double>&, uint64_t);
template Model<float> load_checkpoint<float>(const std::string&, kernels::Backend, uint64_t*);
template Model<double> load_checkpoint<double>(const std::string&, kernels::Backend, uint64_t*);

}  // namespace phishlab
