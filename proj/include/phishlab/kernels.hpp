// SPDX-License-Identifier: Apache-2.0
#pragma once

// Transformer compute kernels. Every kernel has a serial reference (_ref) and
// an OpenMP variant (_par). Bit-identical results across backends are a hard
// requirement (tests assert exact equality), and identical source is not
// enough at -O3: when the same loop body is compiled once inside a serial
// function and once inside an OpenMP outlined region, the compiler may make
// different vectorization and FMA-contraction choices. So every per-slice
// computation lives in a noinline detail:: helper that is compiled exactly
// once, and both backends (and the incremental KV-cache forward in the model)
// call that one copy. Parallel variants split work only across disjoint
// output slices, and elementwise kernels walk the same fixed-grain chunks in
// both backends.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

// noclone stops GCC's IPA constant propagation from specializing a helper per
// call site (e.g. for a compile-time-known width), which would reintroduce
// divergent code paths; clang does not implement cloning or the attribute.
#if defined(_MSC_VER)
#define PHISHLAB_NOINLINE __declspec(noinline)
#elif defined(__clang__)
#define PHISHLAB_NOINLINE __attribute__((noinline))
#else
#define PHISHLAB_NOINLINE __attribute__((noinline, noclone))
#endif

namespace phishlab::kernels {

enum class Backend { ref, par };

namespace detail {

// Four-lane dot product. Fixed accumulation order; only called from the
// noinline helpers below, so each caller sees a single compiled reduction.
template <typename T>
inline T dot(const T* a, const T* b, int n) {
  T s0{}, s1{}, s2{}, s3{};
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  T s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
PHISHLAB_NOINLINE T gelu_scalar(T x) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  const T u = c * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
PHISHLAB_NOINLINE T gelu_grad_scalar(T x) {
  const T c = T(0.7978845608028654);
  const T u = c * (x + T(0.044715) * x * x * x);
  const T th = std::tanh(u);
  const T du = c * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
}

template <typename T>
PHISHLAB_NOINLINE void embed_row(const T* te, const T* pe, T* o, int d) {
  for (int i = 0; i < d; ++i) o[i] = te[i] + pe[i];
}

// One embedding-gradient column: scans rows in order so repeated token ids
// accumulate deterministically. Columns are disjoint, so the parallel
// backend can own one column per iteration.
template <typename T>
PHISHLAB_NOINLINE void embed_bwd_col(const int* ids, const T* dout, T* dtok, T* dpos, int i,
                                     int rows, int seq, int d) {
  for (int r = 0; r < rows; ++r) {
    const T g = dout[static_cast<size_t>(r) * d + i];
    dtok[static_cast<size_t>(ids[r]) * d + i] += g;
    dpos[static_cast<size_t>(r % seq) * d + i] += g;
  }
}

template <typename T>
PHISHLAB_NOINLINE void linear_row(const T* x, const T* w, const T* b, T* y, int in, int out) {
  for (int o = 0; o < out; ++o) {
    const T acc = dot(x, w + static_cast<size_t>(o) * in, in);
    y[o] = b ? b[o] + acc : acc;
  }
}

template <typename T>
PHISHLAB_NOINLINE void linear_bwd_data_row(const T* dy, const T* w, T* dx, int in, int out) {
  for (int i = 0; i < in; ++i) dx[i] = T(0);
  for (int o = 0; o < out; ++o) {
    const T g = dy[o];
    const T* wrow = w + static_cast<size_t>(o) * in;
    for (int i = 0; i < in; ++i) dx[i] += g * wrow[i];
  }
}

// One weight-gradient row (output index o): accumulates dw row and the bias
// gradient over all data rows in order. db_o may be null.
template <typename T>
PHISHLAB_NOINLINE void linear_bwd_weight_row(const T* dy, const T* x, T* dwrow, T* db_o, int o,
                                             int rows, int in, int out) {
  T acc_b = T(0);
  for (int r = 0; r < rows; ++r) {
    const T g = dy[static_cast<size_t>(r) * out + o];
    const T* xrow = x + static_cast<size_t>(r) * in;
    for (int i = 0; i < in; ++i) dwrow[i] += g * xrow[i];
    acc_b += g;
  }
  if (db_o) *db_o += acc_b;
}

template <typename T>
PHISHLAB_NOINLINE void layernorm_row(const T* x, const T* g, const T* b, T* y, int d, T* mean_out,
                                     T* rstd_out) {
  const T eps = T(1e-5);
  T mean = T(0);
  for (int i = 0; i < d; ++i) mean += x[i];
  mean /= T(d);
  T var = T(0);
  for (int i = 0; i < d; ++i) {
    const T c = x[i] - mean;
    var += c * c;
  }
  var /= T(d);
  const T rstd = T(1) / std::sqrt(var + eps);
  for (int i = 0; i < d; ++i) y[i] = g[i] * ((x[i] - mean) * rstd) + b[i];
  *mean_out = mean;
  *rstd_out = rstd;
}

template <typename T>
PHISHLAB_NOINLINE void layernorm_bwd_row(const T* dy, const T* x, const T* g, T mean, T rstd,
                                         T* dx, int d) {
  T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
  for (int i = 0; i < d; ++i) {
    const T xhat = (x[i] - mean) * rstd;
    const T dxhat = dy[i] * g[i];
    sum_dxhat += dxhat;
    sum_dxhat_xhat += dxhat * xhat;
  }
  const T inv_d = T(1) / T(d);
  for (int i = 0; i < d; ++i) {
    const T xhat = (x[i] - mean) * rstd;
    const T dxhat = dy[i] * g[i];
    dx[i] = rstd * (dxhat - sum_dxhat * inv_d - xhat * sum_dxhat_xhat * inv_d);
  }
}

// One gain/bias-gradient column, rows scanned in order.
template <typename T>
PHISHLAB_NOINLINE void layernorm_bwd_col(const T* dy, const T* x, const T* mean, const T* rstd,
                                         T* dg, T* db, int i, int rows, int d) {
  for (int r = 0; r < rows; ++r) {
    const size_t off = static_cast<size_t>(r) * d + i;
    const T xhat = (x[off] - mean[r]) * rstd[r];
    dg[i] += dy[off] * xhat;
    db[i] += dy[off];
  }
}

// Causal attention for one query row against key/value rows 0..t. k/v rows
// live at base + s*stride (base already offset to the head's columns). Shared
// by the batched forward and the KV-cache incremental forward so both produce
// bit-identical outputs. att row gets probabilities for s<=t, zeros beyond.
template <typename T>
PHISHLAB_NOINLINE void attention_row_core(const T* qrow, const T* k, const T* v, size_t stride,
                                          T* att_row, T* out_row, int t, int att_len, int hd) {
  const T scale = T(1) / std::sqrt(T(hd));
  T maxs = -std::numeric_limits<T>::infinity();
  for (int s = 0; s <= t; ++s) {
    const T sc = dot(qrow, k + static_cast<size_t>(s) * stride, hd) * scale;
    att_row[s] = sc;
    if (sc > maxs) maxs = sc;
  }
  T denom = T(0);
  for (int s = 0; s <= t; ++s) {
    att_row[s] = std::exp(att_row[s] - maxs);
    denom += att_row[s];
  }
  const T inv = T(1) / denom;
  for (int s = 0; s <= t; ++s) att_row[s] *= inv;
  for (int s = t + 1; s < att_len; ++s) att_row[s] = T(0);
  for (int i = 0; i < hd; ++i) {
    T acc = T(0);
    for (int s = 0; s <= t; ++s) acc += att_row[s] * v[static_cast<size_t>(s) * stride + i];
    out_row[i] = acc;
  }
}

template <typename T>
inline void attention_row(const T* q, const T* k, const T* v, T* att_row, T* out, int b, int h,
                          int t, int big_t, int d, int hd) {
  const size_t col = static_cast<size_t>(h) * hd;
  const size_t base = static_cast<size_t>(b) * big_t * d + col;
  attention_row_core(q + base + static_cast<size_t>(t) * d, k + base, v + base,
                     static_cast<size_t>(d), att_row, out + base + static_cast<size_t>(t) * d, t,
                     big_t, hd);
}

// Backward over one (batch, head) slice, serial in t so the scatter updates to
// dk/dv stay race-free and ordered.
template <typename T>
PHISHLAB_NOINLINE void attention_bwd_slice(const T* dout, const T* q, const T* k, const T* v,
                                           const T* att, T* dq, T* dk, T* dv, int b, int h,
                                           int big_t, int d, int hd, T* scratch) {
  const T scale = T(1) / std::sqrt(T(hd));
  const size_t col = static_cast<size_t>(h) * hd;
  auto row = [&](const T* base, int t) { return base + (static_cast<size_t>(b) * big_t + t) * d + col; };
  auto wrow = [&](T* base, int t) { return base + (static_cast<size_t>(b) * big_t + t) * d + col; };
  for (int t = 0; t < big_t; ++t) {
    for (int i = 0; i < hd; ++i) wrow(dq, t)[i] = T(0);
    for (int i = 0; i < hd; ++i) wrow(dk, t)[i] = T(0);
    for (int i = 0; i < hd; ++i) wrow(dv, t)[i] = T(0);
  }
  for (int t = 0; t < big_t; ++t) {
    const T* att_row =
        att + ((static_cast<size_t>(b) * (d / hd) + h) * big_t + t) * big_t;
    const T* dout_row = row(dout, t);
    T* datt = scratch;
    T sum = T(0);
    for (int s = 0; s <= t; ++s) {
      datt[s] = dot(dout_row, row(v, s), hd);
      sum += att_row[s] * datt[s];
    }
    for (int s = 0; s <= t; ++s) {
      const T ds = att_row[s] * (datt[s] - sum) * scale;
      const T* qrow = row(q, t);
      const T* krow = row(k, s);
      T* dkrow = wrow(dk, s);
      T* dqrow = wrow(dq, t);
      T* dvrow = wrow(dv, s);
      for (int i = 0; i < hd; ++i) {
        dqrow[i] += ds * krow[i];
        dkrow[i] += ds * qrow[i];
        dvrow[i] += att_row[s] * dout_row[i];
      }
    }
  }
}

template <typename T>
PHISHLAB_NOINLINE void softmax_row(T* x, int n) {
  T maxv = x[0];
  for (int i = 1; i < n; ++i)
    if (x[i] > maxv) maxv = x[i];
  T denom = T(0);
  for (int i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - maxv);
    denom += x[i];
  }
  const T inv = T(1) / denom;
  for (int i = 0; i < n; ++i) x[i] *= inv;
}

// Mean negative log-likelihood over rows whose target is >= 0; probs holds
// already-softmaxed rows. Serial in both backends.
template <typename T>
PHISHLAB_NOINLINE T xent_loss_mean(const T* probs, const int* targets, int rows, int vocab,
                                   int* count_out) {
  T total = T(0);
  int count = 0;
  for (int r = 0; r < rows; ++r) {
    if (targets[r] < 0) continue;
    total += -std::log(probs[static_cast<size_t>(r) * vocab + targets[r]]);
    ++count;
  }
  if (count_out) *count_out = count;
  return count ? total / T(count) : T(0);
}

template <typename T>
PHISHLAB_NOINLINE void xent_bwd_row(const T* probs, int target, T* dlogits, int vocab, T scale) {
  if (target < 0) {
    for (int c = 0; c < vocab; ++c) dlogits[c] = T(0);
  } else {
    for (int c = 0; c < vocab; ++c) dlogits[c] = probs[c] * scale;
    dlogits[target] -= scale;
  }
}

// Elementwise ranges. Both backends walk [i0, i1) chunks of the same fixed
// grain, so the serial and parallel runs execute identical calls.
inline constexpr std::ptrdiff_t kGrain = 4096;

inline std::ptrdiff_t chunk_count(std::ptrdiff_t n) { return (n + kGrain - 1) / kGrain; }

inline std::ptrdiff_t chunk_end(std::ptrdiff_t c, std::ptrdiff_t n) {
  return std::min(n, (c + 1) * kGrain);
}

template <typename T>
PHISHLAB_NOINLINE void gelu_fwd_range(const T* x, T* y, std::ptrdiff_t i0, std::ptrdiff_t i1) {
  for (std::ptrdiff_t i = i0; i < i1; ++i) y[i] = gelu_scalar(x[i]);
}

template <typename T>
PHISHLAB_NOINLINE void gelu_bwd_range(const T* dy, const T* x, T* dx, std::ptrdiff_t i0,
                                      std::ptrdiff_t i1) {
  for (std::ptrdiff_t i = i0; i < i1; ++i) dx[i] = dy[i] * gelu_grad_scalar(x[i]);
}

// AdamW over one range; step is 1-based. Bias corrections are recomputed per
// range from the same inputs, inside the single compiled copy.
template <typename T>
PHISHLAB_NOINLINE void adamw_range(T* p, const T* g, T* m, T* v, std::ptrdiff_t i0,
                                   std::ptrdiff_t i1, T lr, T beta1, T beta2, T eps, T wd,
                                   long step) {
  const T bc1 = T(1) - std::pow(beta1, T(step));
  const T bc2 = T(1) - std::pow(beta2, T(step));
  for (std::ptrdiff_t i = i0; i < i1; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
  }
}

template <typename T>
PHISHLAB_NOINLINE void add_range(T* y, const T* x, std::ptrdiff_t i0, std::ptrdiff_t i1) {
  for (std::ptrdiff_t i = i0; i < i1; ++i) y[i] += x[i];
}

}  // namespace detail

// ---- embedding ----

template <typename T>
void embed_fwd_ref(const int* ids, const T* tok, const T* pos, T* out, int batch, int seq, int d) {
  const int rows = batch * seq;
  for (int r = 0; r < rows; ++r)
    detail::embed_row(tok + static_cast<size_t>(ids[r]) * d, pos + static_cast<size_t>(r % seq) * d,
                      out + static_cast<size_t>(r) * d, d);
}

template <typename T>
void embed_fwd_par(const int* ids, const T* tok, const T* pos, T* out, int batch, int seq, int d) {
  const int rows = batch * seq;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    detail::embed_row(tok + static_cast<size_t>(ids[r]) * d, pos + static_cast<size_t>(r % seq) * d,
                      out + static_cast<size_t>(r) * d, d);
}

// Accumulates into dtok/dpos. Parallel over embedding columns: each column is
// owned by one thread and scans rows in order, so repeated token ids stay
// deterministic.
template <typename T>
void embed_bwd_ref(const int* ids, const T* dout, T* dtok, T* dpos, int batch, int seq, int d) {
  const int rows = batch * seq;
  for (int i = 0; i < d; ++i) detail::embed_bwd_col(ids, dout, dtok, dpos, i, rows, seq, d);
}

template <typename T>
void embed_bwd_par(const int* ids, const T* dout, T* dtok, T* dpos, int batch, int seq, int d) {
  const int rows = batch * seq;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < d; ++i) detail::embed_bwd_col(ids, dout, dtok, dpos, i, rows, seq, d);
}

// ---- layernorm ----

template <typename T>
void layernorm_fwd_ref(const T* x, const T* g, const T* b, T* y, T* mean, T* rstd, int rows,
                       int d) {
  for (int r = 0; r < rows; ++r)
    detail::layernorm_row(x + static_cast<size_t>(r) * d, g, b, y + static_cast<size_t>(r) * d, d,
                          mean + r, rstd + r);
}

template <typename T>
void layernorm_fwd_par(const T* x, const T* g, const T* b, T* y, T* mean, T* rstd, int rows,
                       int d) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    detail::layernorm_row(x + static_cast<size_t>(r) * d, g, b, y + static_cast<size_t>(r) * d, d,
                          mean + r, rstd + r);
}

// dx assigned; dg/db accumulated (parallel over columns, rows scanned in order)
template <typename T>
void layernorm_bwd_ref(const T* dy, const T* x, const T* g, const T* mean, const T* rstd, T* dx,
                       T* dg, T* db, int rows, int d) {
  for (int r = 0; r < rows; ++r)
    detail::layernorm_bwd_row(dy + static_cast<size_t>(r) * d, x + static_cast<size_t>(r) * d, g,
                              mean[r], rstd[r], dx + static_cast<size_t>(r) * d, d);
  for (int i = 0; i < d; ++i) detail::layernorm_bwd_col(dy, x, mean, rstd, dg, db, i, rows, d);
}

template <typename T>
void layernorm_bwd_par(const T* dy, const T* x, const T* g, const T* mean, const T* rstd, T* dx,
                       T* dg, T* db, int rows, int d) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    detail::layernorm_bwd_row(dy + static_cast<size_t>(r) * d, x + static_cast<size_t>(r) * d, g,
                              mean[r], rstd[r], dx + static_cast<size_t>(r) * d, d);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < d; ++i) detail::layernorm_bwd_col(dy, x, mean, rstd, dg, db, i, rows, d);
}

// ---- linear ----

template <typename T>
void linear_fwd_ref(const T* x, const T* w, const T* b, T* y, int rows, int in, int out) {
  for (int r = 0; r < rows; ++r)
    detail::linear_row(x + static_cast<size_t>(r) * in, w, b, y + static_cast<size_t>(r) * out, in,
                       out);
}

template <typename T>
void linear_fwd_par(const T* x, const T* w, const T* b, T* y, int rows, int in, int out) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    detail::linear_row(x + static_cast<size_t>(r) * in, w, b, y + static_cast<size_t>(r) * out, in,
                       out);
}

// dx assigned; dw/db accumulated (parallel over output index, rows in order)
template <typename T>
void linear_bwd_ref(const T* dy, const T* x, const T* w, T* dx, T* dw, T* db, int rows, int in,
                    int out) {
  for (int r = 0; r < rows; ++r)
    detail::linear_bwd_data_row(dy + static_cast<size_t>(r) * out, w,
                                dx + static_cast<size_t>(r) * in, in, out);
  for (int o = 0; o < out; ++o)
    detail::linear_bwd_weight_row(dy, x, dw + static_cast<size_t>(o) * in, db ? db + o : nullptr,
                                  o, rows, in, out);
}

template <typename T>
void linear_bwd_par(const T* dy, const T* x, const T* w, T* dx, T* dw, T* db, int rows, int in,
                    int out) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    detail::linear_bwd_data_row(dy + static_cast<size_t>(r) * out, w,
                                dx + static_cast<size_t>(r) * in, in, out);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o)
    detail::linear_bwd_weight_row(dy, x, dw + static_cast<size_t>(o) * in, db ? db + o : nullptr,
                                  o, rows, in, out);
}

// ---- gelu ----

template <typename T>
void gelu_fwd_ref(const T* x, T* y, std::ptrdiff_t n) {
  const std::ptrdiff_t chunks = detail::chunk_count(n);
  for (std::ptrdiff_t c = 0; c < chunks; ++c)
    detail::gelu_fwd_range(x, y, c * detail::kGrain, detail::chunk_end(c, n));
}

template <typename T>
void gelu_fwd_par(const T* x, T* y, std::ptrdiff_t n) {
  const std::ptrdiff_t chunks = detail::chunk_count(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c)
    detail::gelu_fwd_range(x, y, c * detail::kGrain, detail::chunk_end(c, n));
}

template <typename T>
void gelu_bwd_ref(const T* dy, const T* x, T* dx, std::ptrdiff_t n) {
  const std::ptrdiff_t chunks = detail::chunk_count(n);
  for (std::ptrdiff_t c = 0; c < chunks; ++c)
    detail::gelu_bwd_range(dy, x, dx, c * detail::kGrain, detail::chunk_end(c, n));
}

template <typename T>
void gelu_bwd_par(const T* dy, const T* x, T* dx, std::ptrdiff_t n) {
  const std::ptrdiff_t chunks = detail::chunk_count(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c)
    detail::gelu_bwd_range(dy, x, dx, c * detail::kGrain, detail::chunk_end(c, n));
}

// ---- causal attention ----

template <typename T>
void attention_fwd_ref(const T* q, const T* k, const T* v, T* att, T* out, int batch, int seq,
                       int heads, int d) {
  const int hd = d / heads;
  const int units = batch * heads * seq;
  for (int u = 0; u < units; ++u) {
    const int b = u / (heads * seq);
    const int h = (u / seq) % heads;
    const int t = u % seq;
    T* att_row = att + ((static_cast<size_t>(b) * heads + h) * seq + t) * seq;
    detail::attention_row(q, k, v, att_row, out, b, h, t, seq, d, hd);
  }
}

template <typename T>
void attention_fwd_par(const T* q, const T* k, const T* v, T* att, T* out, int batch, int seq,
                       int heads, int d) {
  const int hd = d / heads;
  const int units = batch * heads * seq;
#pragma omp parallel for schedule(static)
  for (int u = 0; u < units; ++u) {
    const int b = u / (heads * seq);
    const int h = (u / seq) % heads;
    const int t = u % seq;
    T* att_row = att + ((static_cast<size_t>(b) * heads + h) * seq + t) * seq;
    detail::attention_row(q, k, v, att_row, out, b, h, t, seq, d, hd);
  }
}

// dq/dk/dv assigned (zero-filled inside). Parallel over (batch, head) slices.
template <typename T>
void attention_bwd_ref(const T* dout, const T* q, const T* k, const T* v, const T* att, T* dq,
                       T* dk, T* dv, int batch, int seq, int heads, int d) {
  const int hd = d / heads;
  std::vector<T> scratch(static_cast<size_t>(seq));
  for (int u = 0; u < batch * heads; ++u)
    detail::attention_bwd_slice(dout, q, k, v, att, dq, dk, dv, u / heads, u % heads, seq, d, hd,
                                scratch.data());
}

template <typename T>
void attention_bwd_par(const T* dout, const T* q, const T* k, const T* v, const T* att, T* dq,
                       T* dk, T* dv, int batch, int seq, int heads, int d) {
  const int hd = d / heads;
#pragma omp parallel
  {
    std::vector<T> scratch(static_cast<size_t>(seq));
#pragma omp for schedule(static)
    for (int u = 0; u < batch * heads; ++u)
      detail::attention_bwd_slice(dout, q, k, v, att, dq, dk, dv, u / heads, u % heads, seq, d, hd,
                                  scratch.data());
  }
}

// ---- softmax cross-entropy ----

// Transforms logits into probabilities in place. Targets of -1 are ignored;
// returns mean loss over counted rows (0 if none).
template <typename T>
T xent_fwd_ref(T* logits, const int* targets, int rows, int vocab, int* count_out) {
  for (int r = 0; r < rows; ++r)
    detail::softmax_row(logits + static_cast<size_t>(r) * vocab, vocab);
  return detail::xent_loss_mean(logits, targets, rows, vocab, count_out);
}

template <typename T>
T xent_fwd_par(T* logits, const int* targets, int rows, int vocab, int* count_out) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    detail::softmax_row(logits + static_cast<size_t>(r) * vocab, vocab);
  return detail::xent_loss_mean(logits, targets, rows, vocab, count_out);
}

// dlogits may alias probs
template <typename T>
void xent_bwd_ref(const T* probs, const int* targets, T* dlogits, int rows, int vocab, int count) {
  const T scale = count ? T(1) / T(count) : T(0);
  for (int r = 0; r < rows; ++r) {
    const size_t off = static_cast<size_t>(r) * vocab;
    detail::xent_bwd_row(probs + off, targets[r], dlogits + off, vocab, scale);
  }
}

template <typename T>
void xent_bwd_par(const T* probs, const int* targets, T* dlogits, int rows, int vocab, int count) {
  const T scale = count ? T(1) / T(count) : T(0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const size_t off = static_cast<size_t>(r) * vocab;
    detail::xent_bwd_row(probs + off, targets[r], dlogits + off, vocab, scale);
  }
}

// ---- optimizer ----

// AdamW with decoupled weight decay; step is 1-based.
template <typename T>
void adamw_step_ref(T* p, const T* g, T* m, T* v, std::ptrdiff_t n, T lr, T beta1, T beta2, T eps,
                    T wd, long step) {
  const std::ptrdiff_t chunks = detail::chunk_count(n);
  for (std::ptrdiff_t c = 0; c < chunks; ++c)
    detail::adamw_range(p, g, m, v, c * detail::kGrain, detail::chunk_end(c, n), lr, beta1, beta2,
                        eps, wd, step);
}

template <typename T>
void adamw_step_par(T* p, const T* g, T* m, T* v, std::ptrdiff_t n, T lr, T beta1, T beta2, T eps,
                    T wd, long step) {
  const std::ptrdiff_t chunks = detail::chunk_count(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c)
    detail::adamw_range(p, g, m, v, c * detail::kGrain, detail::chunk_end(c, n), lr, beta1, beta2,
                        eps, wd, step);
}

// ---- elementwise ----

template <typename T>
void add_inplace_ref(T* y, const T* x, std::ptrdiff_t n) {
  const std::ptrdiff_t chunks = detail::chunk_count(n);
  for (std::ptrdiff_t c = 0; c < chunks; ++c)
    detail::add_range(y, x, c * detail::kGrain, detail::chunk_end(c, n));
}

template <typename T>
void add_inplace_par(T* y, const T* x, std::ptrdiff_t n) {
  const std::ptrdiff_t chunks = detail::chunk_count(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c)
    detail::add_range(y, x, c * detail::kGrain, detail::chunk_end(c, n));
}

// ---- dispatch ----

template <typename T>
void embed_fwd(Backend be, const int* ids, const T* tok, const T* pos, T* out, int batch, int seq,
               int d) {
  be == Backend::par ? embed_fwd_par(ids, tok, pos, out, batch, seq, d)
                     : embed_fwd_ref(ids, tok, pos, out, batch, seq, d);
}

template <typename T>
void embed_bwd(Backend be, const int* ids, const T* dout, T* dtok, T* dpos, int batch, int seq,
               int d) {
  be == Backend::par ? embed_bwd_par(ids, dout, dtok, dpos, batch, seq, d)
                     : embed_bwd_ref(ids, dout, dtok, dpos, batch, seq, d);
}

template <typename T>
void layernorm_fwd(Backend be, const T* x, const T* g, const T* b, T* y, T* mean, T* rstd,
                   int rows, int d) {
  be == Backend::par ? layernorm_fwd_par(x, g, b, y, mean, rstd, rows, d)
                     : layernorm_fwd_ref(x, g, b, y, mean, rstd, rows, d);
}

template <typename T>
void layernorm_bwd(Backend be, const T* dy, const T* x, const T* g, const T* mean, const T* rstd,
                   T* dx, T* dg, T* db, int rows, int d) {
  be == Backend::par ? layernorm_bwd_par(dy, x, g, mean, rstd, dx, dg, db, rows, d)
                     : layernorm_bwd_ref(dy, x, g, mean, rstd, dx, dg, db, rows, d);
}

template <typename T>
void linear_fwd(Backend be, const T* x, const T* w, const T* b, T* y, int rows, int in, int out) {
  be == Backend::par ? linear_fwd_par(x, w, b, y, rows, in, out)
                     : linear_fwd_ref(x, w, b, y, rows, in, out);
}

template <typename T>
void linear_bwd(Backend be, const T* dy, const T* x, const T* w, T* dx, T* dw, T* db, int rows,
                int in, int out) {
  be == Backend::par ? linear_bwd_par(dy, x, w, dx, dw, db, rows, in, out)
                     : linear_bwd_ref(dy, x, w, dx, dw, db, rows, in, out);
}

template <typename T>
void gelu_fwd(Backend be, const T* x, T* y, std::ptrdiff_t n) {
  be == Backend::par ? gelu_fwd_par(x, y, n) : gelu_fwd_ref(x, y, n);
}

template <typename T>
void gelu_bwd(Backend be, const T* dy, const T* x, T* dx, std::ptrdiff_t n) {
  be == Backend::par ? gelu_bwd_par(dy, x, dx, n) : gelu_bwd_ref(dy, x, dx, n);
}

template <typename T>
void attention_fwd(Backend be, const T* q, const T* k, const T* v, T* att, T* out, int batch,
                   int seq, int heads, int d) {
  be == Backend::par ? attention_fwd_par(q, k, v, att, out, batch, seq, heads, d)
                     : attention_fwd_ref(q, k, v, att, out, batch, seq, heads, d);
}

template <typename T>
void attention_bwd(Backend be, const T* dout, const T* q, const T* k, const T* v, const T* att,
                   T* dq, T* dk, T* dv, int batch, int seq, int heads, int d) {
  be == Backend::par ? attention_bwd_par(dout, q, k, v, att, dq, dk, dv, batch, seq, heads, d)
                     : attention_bwd_ref(dout, q, k, v, att, dq, dk, dv, batch, seq, heads, d);
}

template <typename T>
T xent_fwd(Backend be, T* logits, const int* targets, int rows, int vocab, int* count_out) {
  return be == Backend::par ? xent_fwd_par(logits, targets, rows, vocab, count_out)
                            : xent_fwd_ref(logits, targets, rows, vocab, count_out);
}

template <typename T>
void xent_bwd(Backend be, const T* probs, const int* targets, T* dlogits, int rows, int vocab,
              int count) {
  be == Backend::par ? xent_bwd_par(probs, targets, dlogits, rows, vocab, count)
                     : xent_bwd_ref(probs, targets, dlogits, rows, vocab, count);
}

template <typename T>
void adamw_step(Backend be, T* p, const T* g, T* m, T* v, std::ptrdiff_t n, T lr, T beta1, T beta2,
                T eps, T wd, long step) {
  be == Backend::par ? adamw_step_par(p, g, m, v, n, lr, beta1, beta2, eps, wd, step)
                     : adamw_step_ref(p, g, m, v, n, lr, beta1, beta2, eps, wd, step);
}

template <typename T>
void add_inplace(Backend be, T* y, const T* x, std::ptrdiff_t n) {
  be == Backend::par ? add_inplace_par(y, x, n) : add_inplace_ref(y, x, n);
}

}  // namespace phishlab::kernels
