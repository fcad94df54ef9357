// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "phishlab/kernels.hpp"
#include "phishlab/rng.hpp"

using namespace phishlab;
namespace k = phishlab::kernels;

namespace {

std::vector<double> randv(size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

std::vector<int> randids(size_t n, int vocab, Rng& rng) {
  std::vector<int> v(n);
  for (auto& x : v) x = rng.uniform_int(0, vocab - 1);
  return v;
}

}  // namespace

TEST_CASE("embed forward/backward: ref and par are bit-identical") {
  Rng rng(1);
  const int batch = 3, seq = 7, d = 16, vocab = 29, ctx = 11;
  const auto ids = randids(batch * seq, vocab, rng);
  const auto tok = randv(static_cast<size_t>(vocab) * d, rng);
  const auto pos = randv(static_cast<size_t>(ctx) * d, rng);
  std::vector<double> a(static_cast<size_t>(batch) * seq * d), b = a;
  k::embed_fwd_ref(ids.data(), tok.data(), pos.data(), a.data(), batch, seq, d);
  k::embed_fwd_par(ids.data(), tok.data(), pos.data(), b.data(), batch, seq, d);
  CHECK(a == b);

  const auto dout = randv(a.size(), rng);
  std::vector<double> dtok_a(tok.size(), 0), dpos_a(pos.size(), 0);
  auto dtok_b = dtok_a, dpos_b = dpos_a;
  k::embed_bwd_ref(ids.data(), dout.data(), dtok_a.data(), dpos_a.data(), batch, seq, d);
  k::embed_bwd_par(ids.data(), dout.data(), dtok_b.data(), dpos_b.data(), batch, seq, d);
  CHECK(dtok_a == dtok_b);
  CHECK(dpos_a == dpos_b);
}

TEST_CASE("embed forward is a table lookup plus position row") {
  Rng rng(2);
  const int vocab = 5, d = 4;
  const auto tok = randv(static_cast<size_t>(vocab) * d, rng);
  const auto pos = randv(static_cast<size_t>(3) * d, rng);
  const std::vector<int> ids = {4, 0, 2};
  std::vector<double> out(3 * d);
  k::embed_fwd_ref(ids.data(), tok.data(), pos.data(), out.data(), 1, 3, d);
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < d; ++i)
      CHECK(out[t * d + i] == tok[ids[t] * d + i] + pos[t * d + i]);
}

TEST_CASE("layernorm: backends identical, statistics correct") {
  Rng rng(3);
  const int rows = 9, d = 24;
  const auto x = randv(static_cast<size_t>(rows) * d, rng, 2.0);
  const auto g = randv(d, rng);
  const auto b = randv(d, rng);
  std::vector<double> ya(x.size()), yb(x.size()), ma(rows), mb(rows), ra(rows), rb(rows);
  k::layernorm_fwd_ref(x.data(), g.data(), b.data(), ya.data(), ma.data(), ra.data(), rows, d);
  k::layernorm_fwd_par(x.data(), g.data(), b.data(), yb.data(), mb.data(), rb.data(), rows, d);
  CHECK(ya == yb);
  CHECK(ma == mb);
  CHECK(ra == rb);

  // oracle: normalized rows have mean ~0 and unit variance when g=1, b=0
  std::vector<double> ones(d, 1.0), zeros(d, 0.0);
  std::vector<double> y(x.size()), mean(rows), rstd(rows);
  k::layernorm_fwd_ref(x.data(), ones.data(), zeros.data(), y.data(), mean.data(), rstd.data(),
                       rows, d);
  for (int r = 0; r < rows; ++r) {
    double s = 0, s2 = 0;
    for (int i = 0; i < d; ++i) {
      s += y[r * d + i];
      s2 += y[r * d + i] * y[r * d + i];
    }
    CHECK(std::abs(s / d) < 1e-12);
    CHECK(s2 / d == doctest::Approx(1.0).epsilon(1e-3));  // eps term shifts variance slightly
  }

  const auto dy = randv(x.size(), rng);
  std::vector<double> dxa(x.size()), dxb(x.size()), dga(d, 0), dgb(d, 0), dba(d, 0), dbb(d, 0);
  k::layernorm_bwd_ref(dy.data(), x.data(), g.data(), ma.data(), ra.data(), dxa.data(), dga.data(),
                       dba.data(), rows, d);
  k::layernorm_bwd_par(dy.data(), x.data(), g.data(), mb.data(), rb.data(), dxb.data(), dgb.data(),
                       dbb.data(), rows, d);
  CHECK(dxa == dxb);
  CHECK(dga == dgb);
  CHECK(dba == dbb);
}

TEST_CASE("linear: backends identical, forward matches naive matmul") {
  Rng rng(4);
  const int rows = 6, in = 13, out = 11;
  const auto x = randv(static_cast<size_t>(rows) * in, rng);
  const auto w = randv(static_cast<size_t>(out) * in, rng);
  const auto b = randv(out, rng);
  std::vector<double> ya(static_cast<size_t>(rows) * out), yb = ya;
  k::linear_fwd_ref(x.data(), w.data(), b.data(), ya.data(), rows, in, out);
  k::linear_fwd_par(x.data(), w.data(), b.data(), yb.data(), rows, in, out);
  CHECK(ya == yb);
  for (int r = 0; r < rows; ++r)
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += x[r * in + i] * w[o * in + i];
      CHECK(ya[r * out + o] == doctest::Approx(acc).epsilon(1e-10));
    }

  const auto dy = randv(ya.size(), rng);
  std::vector<double> dxa(x.size()), dxb(x.size()), dwa(w.size(), 0), dwb(w.size(), 0),
      dba(out, 0), dbb(out, 0);
  k::linear_bwd_ref(dy.data(), x.data(), w.data(), dxa.data(), dwa.data(), dba.data(), rows, in,
                    out);
  k::linear_bwd_par(dy.data(), x.data(), w.data(), dxb.data(), dwb.data(), dbb.data(), rows, in,
                    out);
  CHECK(dxa == dxb);
  CHECK(dwa == dwb);
  CHECK(dba == dbb);
}

TEST_CASE("gelu: fixed oracle points, gradient by finite differences, backends identical") {
  // oracle values for the tanh approximation, computed externally
  const std::vector<double> xs = {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0};
  const std::vector<double> want = {-0.045402305912224938, -0.15880800939172324,
                                    -0.15428599017485606,  0.0,
                                    0.34571400982514394,   0.84119199060827676,
                                    1.954597694087775,     2.9963626079182268};
  std::vector<double> got(xs.size());
  k::gelu_fwd_ref(xs.data(), got.data(), static_cast<std::ptrdiff_t>(xs.size()));
  for (size_t i = 0; i < xs.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

  Rng rng(5);
  const auto x = randv(512, rng, 1.5);
  std::vector<double> ya(x.size()), yb(x.size());
  k::gelu_fwd_ref(x.data(), ya.data(), 512);
  k::gelu_fwd_par(x.data(), yb.data(), 512);
  CHECK(ya == yb);

  const std::vector<double> dy(x.size(), 1.0);
  std::vector<double> dxa(x.size()), dxb(x.size());
  k::gelu_bwd_ref(dy.data(), x.data(), dxa.data(), 512);
  k::gelu_bwd_par(dy.data(), x.data(), dxb.data(), 512);
  CHECK(dxa == dxb);
  const double h = 1e-6;
  for (size_t i = 0; i < 16; ++i) {
    double lo, hi, xi = x[i];
    double xl = xi - h, xr = xi + h;
    k::gelu_fwd_ref(&xl, &lo, 1);
    k::gelu_fwd_ref(&xr, &hi, 1);
    CHECK(dxa[i] == doctest::Approx((hi - lo) / (2 * h)).epsilon(1e-4));
  }
}

TEST_CASE("attention: causal, uniform when q=k=0, backends identical") {
  Rng rng(6);
  const int batch = 2, seq = 5, heads = 2, d = 8, hd = d / heads;
  const auto q = randv(static_cast<size_t>(batch) * seq * d, rng);
  const auto kk = randv(q.size(), rng);
  const auto v = randv(q.size(), rng);
  std::vector<double> att_a(static_cast<size_t>(batch) * heads * seq * seq),
      att_b = att_a, oa(q.size()), ob(q.size());
  k::attention_fwd_ref(q.data(), kk.data(), v.data(), att_a.data(), oa.data(), batch, seq, heads,
                       d);
  k::attention_fwd_par(q.data(), kk.data(), v.data(), att_b.data(), ob.data(), batch, seq, heads,
                       d);
  CHECK(att_a == att_b);
  CHECK(oa == ob);

  // causality: changing v at a later position leaves earlier outputs untouched
  auto v2 = v;
  for (int i = 0; i < d; ++i) v2[(static_cast<size_t>(seq) - 1) * d + i] += 3.0;
  std::vector<double> att_c(att_a.size()), oc(q.size());
  k::attention_fwd_ref(q.data(), kk.data(), v2.data(), att_c.data(), oc.data(), batch, seq, heads,
                       d);
  for (int t = 0; t < seq - 1; ++t)
    for (int i = 0; i < d; ++i) CHECK(oc[t * d + i] == oa[t * d + i]);

  // zero scores mean uniform weights: output at t is the mean of v[0..t]
  const std::vector<double> zeros(q.size(), 0.0);
  std::vector<double> att_u(att_a.size()), ou(q.size());
  k::attention_fwd_ref(zeros.data(), zeros.data(), v.data(), att_u.data(), ou.data(), batch, seq,
                       heads, d);
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < seq; ++t)
      for (int i = 0; i < d; ++i) {
        double mean = 0;
        for (int u = 0; u <= t; ++u) mean += v[(static_cast<size_t>(b) * seq + u) * d + i];
        mean /= (t + 1);
        CHECK(ou[(static_cast<size_t>(b) * seq + t) * d + i] ==
              doctest::Approx(mean).epsilon(1e-12));
      }

  const auto dout = randv(q.size(), rng);
  std::vector<double> dqa(q.size(), 0), dka(q.size(), 0), dva(q.size(), 0);
  auto dqb = dqa, dkb = dka, dvb = dva;
  k::attention_bwd_ref(dout.data(), q.data(), kk.data(), v.data(), att_a.data(), dqa.data(),
                       dka.data(), dva.data(), batch, seq, heads, d);
  k::attention_bwd_par(dout.data(), q.data(), kk.data(), v.data(), att_b.data(), dqb.data(),
                       dkb.data(), dvb.data(), batch, seq, heads, d);
  CHECK(dqa == dqb);
  CHECK(dka == dkb);
  CHECK(dva == dvb);
}

TEST_CASE("cross entropy: uniform logits give ln(vocab), ignored rows drop out") {
  const int rows = 4, vocab = 23;
  std::vector<double> logits(static_cast<size_t>(rows) * vocab, 0.7);  // constant = uniform
  std::vector<int> targets = {0, 5, -1, 22};
  int count = 0;
  auto logits_b = logits;
  const double loss_a = k::xent_fwd_ref(logits.data(), targets.data(), rows, vocab, &count);
  int count_b = 0;
  const double loss_b = k::xent_fwd_par(logits_b.data(), targets.data(), rows, vocab, &count_b);
  CHECK(loss_a == loss_b);
  CHECK(logits == logits_b);  // identical probability buffers
  CHECK(count == 3);
  CHECK(count_b == 3);
  CHECK(loss_a == doctest::Approx(std::log(static_cast<double>(vocab))).epsilon(1e-12));

  // probabilities sum to one per row
  for (int r = 0; r < rows; ++r) {
    double s = 0;
    for (int c = 0; c < vocab; ++c) s += logits[static_cast<size_t>(r) * vocab + c];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  std::vector<double> dla(logits.size()), dlb(logits.size());
  k::xent_bwd_ref(logits.data(), targets.data(), dla.data(), rows, vocab, count);
  k::xent_bwd_par(logits.data(), targets.data(), dlb.data(), rows, vocab, count);
  CHECK(dla == dlb);
  // ignored row has zero gradient; live rows sum to zero
  for (int c = 0; c < vocab; ++c) CHECK(dla[static_cast<size_t>(2) * vocab + c] == 0.0);
  for (int r : {0, 1, 3}) {
    double s = 0;
    for (int c = 0; c < vocab; ++c) s += dla[static_cast<size_t>(r) * vocab + c];
    CHECK(std::abs(s) < 1e-15);
  }
}

TEST_CASE("adamw: first step moves each parameter by about lr, backends identical") {
  Rng rng(8);
  const std::ptrdiff_t n = 64;
  auto p0 = randv(n, rng);
  auto g = randv(n, rng);
  for (auto& x : g)
    if (std::abs(x) < 1e-3) x = 1e-3;  // keep |g| away from zero so eps is negligible
  auto pa = p0, pb = p0;
  std::vector<double> ma(n, 0), va(n, 0), mb(n, 0), vb(n, 0);
  const double lr = 1e-2;
  k::adamw_step_ref(pa.data(), g.data(), ma.data(), va.data(), n, lr, 0.9, 0.999, 1e-8, 0.0, 1L);
  k::adamw_step_par(pb.data(), g.data(), mb.data(), vb.data(), n, lr, 0.9, 0.999, 1e-8, 0.0, 1L);
  CHECK(pa == pb);
  CHECK(ma == mb);
  CHECK(va == vb);
  // with bias correction at t=1, mhat/sqrt(vhat) = sign(g)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    CHECK(pa[i] == doctest::Approx(p0[i] - lr * (g[i] > 0 ? 1.0 : -1.0)).epsilon(1e-4));

  // decoupled weight decay acts even with zero gradient
  std::vector<double> pz = {2.0}, gz = {0.0}, mz = {0.0}, vz = {0.0};
  k::adamw_step_ref(pz.data(), gz.data(), mz.data(), vz.data(), 1, lr, 0.9, 0.999, 1e-8, 0.5, 1L);
  CHECK(pz[0] == doctest::Approx(2.0 - lr * 0.5 * 2.0).epsilon(1e-12));
}

TEST_CASE("add_inplace backends identical") {
  Rng rng(9);
  auto y1 = randv(100, rng);
  auto y2 = y1;
  const auto x = randv(100, rng);
  k::add_inplace_ref(y1.data(), x.data(), 100);
  k::add_inplace_par(y2.data(), x.data(), 100);
  CHECK(y1 == y2);
}

TEST_CASE("dispatch wrappers select the same math") {
  Rng rng(10);
  const auto x = randv(64, rng);
  std::vector<double> yr(64), yp(64);
  k::gelu_fwd(k::Backend::ref, x.data(), yr.data(), 64);
  k::gelu_fwd(k::Backend::par, x.data(), yp.data(), 64);
  CHECK(yr == yp);
}
