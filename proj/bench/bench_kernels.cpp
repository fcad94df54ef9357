// SPDX-License-Identifier: Apache-2.0
//
// Serial-reference vs OpenMP kernel comparison at the training shape used by
// the default experiment condition (batch 8, context 160, d_model 32) and at
// the largest scaling-ladder shape. The two backends compute bit-identical
// results; this target measures what the parallel split buys on the machine
// at hand. Run with --benchmark_filter=... to narrow.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "phishlab/kernels.hpp"
#include "phishlab/rng.hpp"
#include "phishlab/textcore.hpp"
#include "phishlab/tinylm.hpp"

using namespace phishlab;
using kernels::Backend;

namespace {

std::vector<float> randv(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

struct Shape {
  int batch, seq, heads, d;
  int rows() const { return batch * seq; }
};

// batch x context x heads x d_model; small = default condition, large = top of
// the model-scaling ladder.
const Shape kSmall{8, 160, 4, 32};
const Shape kLarge{8, 160, 8, 256};

Shape shape_arg(const benchmark::State& state) { return state.range(0) == 0 ? kSmall : kLarge; }

void args_both(benchmark::internal::Benchmark* b) {
  b->Arg(0)->Arg(1)->ArgName("shape");  // 0 = d32 default, 1 = d256 ladder top
}

template <Backend be>
void BM_linear_fwd(benchmark::State& state) {
  const Shape s = shape_arg(state);
  const int in = s.d, out = 4 * s.d;
  const auto x = randv(static_cast<size_t>(s.rows()) * in, 1);
  const auto w = randv(static_cast<size_t>(out) * in, 2);
  const auto b = randv(static_cast<size_t>(out), 3);
  std::vector<float> y(static_cast<size_t>(s.rows()) * out);
  for (auto _ : state) {
    kernels::linear_fwd(be, x.data(), w.data(), b.data(), y.data(), s.rows(), in, out);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t(s.rows()) * in * out);
}

template <Backend be>
void BM_linear_bwd(benchmark::State& state) {
  const Shape s = shape_arg(state);
  const int in = s.d, out = 4 * s.d;
  const auto dy = randv(static_cast<size_t>(s.rows()) * out, 4);
  const auto x = randv(static_cast<size_t>(s.rows()) * in, 5);
  const auto w = randv(static_cast<size_t>(out) * in, 6);
  std::vector<float> dx(x.size()), dw(w.size()), db(static_cast<size_t>(out));
  for (auto _ : state) {
    kernels::linear_bwd(be, dy.data(), x.data(), w.data(), dx.data(), dw.data(), db.data(),
                        s.rows(), in, out);
    benchmark::DoNotOptimize(dx.data());
  }
}

template <Backend be>
void BM_attention_fwd(benchmark::State& state) {
  const Shape s = shape_arg(state);
  const size_t n = static_cast<size_t>(s.rows()) * s.d;
  const auto q = randv(n, 7), k = randv(n, 8), v = randv(n, 9);
  std::vector<float> att(static_cast<size_t>(s.batch) * s.heads * s.seq * s.seq);
  std::vector<float> out(n);
  for (auto _ : state) {
    kernels::attention_fwd(be, q.data(), k.data(), v.data(), att.data(), out.data(), s.batch,
                           s.seq, s.heads, s.d);
    benchmark::DoNotOptimize(out.data());
  }
}

template <Backend be>
void BM_attention_bwd(benchmark::State& state) {
  const Shape s = shape_arg(state);
  const size_t n = static_cast<size_t>(s.rows()) * s.d;
  const auto q = randv(n, 10), k = randv(n, 11), v = randv(n, 12), dout = randv(n, 13);
  std::vector<float> att(static_cast<size_t>(s.batch) * s.heads * s.seq * s.seq);
  std::vector<float> out(n), dq(n), dk(n), dv(n);
  kernels::attention_fwd(be, q.data(), k.data(), v.data(), att.data(), out.data(), s.batch,
                         s.seq, s.heads, s.d);
  for (auto _ : state) {
    kernels::attention_bwd(be, dout.data(), q.data(), k.data(), v.data(), att.data(), dq.data(),
                           dk.data(), dv.data(), s.batch, s.seq, s.heads, s.d);
    benchmark::DoNotOptimize(dq.data());
  }
}

template <Backend be>
void BM_layernorm_fwd(benchmark::State& state) {
  const Shape s = shape_arg(state);
  const auto x = randv(static_cast<size_t>(s.rows()) * s.d, 14);
  const auto g = randv(static_cast<size_t>(s.d), 15);
  const auto b = randv(static_cast<size_t>(s.d), 16);
  std::vector<float> y(x.size()), mean(static_cast<size_t>(s.rows())), rstd(mean.size());
  for (auto _ : state) {
    kernels::layernorm_fwd(be, x.data(), g.data(), b.data(), y.data(), mean.data(), rstd.data(),
                           s.rows(), s.d);
    benchmark::DoNotOptimize(y.data());
  }
}

template <Backend be>
void BM_gelu_fwd(benchmark::State& state) {
  const Shape s = shape_arg(state);
  const auto x = randv(static_cast<size_t>(s.rows()) * 4 * s.d, 17);
  std::vector<float> y(x.size());
  for (auto _ : state) {
    kernels::gelu_fwd(be, x.data(), y.data(), static_cast<std::ptrdiff_t>(x.size()));
    benchmark::DoNotOptimize(y.data());
  }
}

template <Backend be>
void BM_adamw_step(benchmark::State& state) {
  const Shape s = shape_arg(state);
  ModelConfig mc;
  mc.d_model = s.d;
  mc.n_heads = s.heads;
  mc.n_layers = s.d >= 256 ? 4 : 2;
  mc.context_len = s.seq;
  mc.vocab_size = 64;
  const size_t n = param_count(mc);
  auto p = randv(n, 18);
  const auto g = randv(n, 19);
  std::vector<float> m(n, 0.0f), v(n, 0.0f);
  long t = 0;
  for (auto _ : state) {
    kernels::adamw_step(be, p.data(), g.data(), m.data(), v.data(),
                        static_cast<std::ptrdiff_t>(n), 1e-3f, 0.9f, 0.999f, 1e-8f, 0.0f, ++t);
    benchmark::DoNotOptimize(p.data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t(n));
}

// One full training step (forward, backward, update) per backend: the number
// that actually bounds experiment wall time.
template <Backend be>
void BM_train_step(benchmark::State& state) {
  const Shape s = shape_arg(state);
  ModelConfig mc;
  mc.d_model = s.d;
  mc.n_heads = s.heads;
  mc.n_layers = s.d >= 256 ? 4 : 2;
  mc.context_len = s.seq;
  mc.vocab_size = 64;
  Model<float> model(mc, be);
  Rng rng(20);
  model.init(rng);
  AdamW<float> opt(model.params().size(), AdamWConfig<float>{});

  std::vector<std::vector<int>> rows;
  for (int r = 0; r < s.batch; ++r) {
    std::vector<int> ids(static_cast<size_t>(s.seq) + 1);
    for (auto& id : ids) id = rng.uniform_int(0, mc.vocab_size - 1);
    rows.push_back(std::move(ids));
  }
  const Batch batch = make_batch(rows, mc.context_len);

  for (auto _ : state) {
    const float loss = model.forward(batch);
    model.backward();
    opt.step(model.params(), model.grads(), be);
    benchmark::DoNotOptimize(loss);
  }
}

BENCHMARK(BM_linear_fwd<Backend::ref>)->Apply(args_both);
BENCHMARK(BM_linear_fwd<Backend::par>)->Apply(args_both);
BENCHMARK(BM_linear_bwd<Backend::ref>)->Apply(args_both);
BENCHMARK(BM_linear_bwd<Backend::par>)->Apply(args_both);
BENCHMARK(BM_attention_fwd<Backend::ref>)->Apply(args_both);
BENCHMARK(BM_attention_fwd<Backend::par>)->Apply(args_both);
BENCHMARK(BM_attention_bwd<Backend::ref>)->Apply(args_both);
BENCHMARK(BM_attention_bwd<Backend::par>)->Apply(args_both);
BENCHMARK(BM_layernorm_fwd<Backend::ref>)->Apply(args_both);
BENCHMARK(BM_layernorm_fwd<Backend::par>)->Apply(args_both);
BENCHMARK(BM_gelu_fwd<Backend::ref>)->Apply(args_both);
BENCHMARK(BM_gelu_fwd<Backend::par>)->Apply(args_both);
BENCHMARK(BM_adamw_step<Backend::ref>)->Apply(args_both);
BENCHMARK(BM_adamw_step<Backend::par>)->Apply(args_both);
BENCHMARK(BM_train_step<Backend::ref>)->Apply(args_both);
BENCHMARK(BM_train_step<Backend::par>)->Apply(args_both);

}  // namespace

BENCHMARK_MAIN();
