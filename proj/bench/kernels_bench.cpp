#include <benchmark/benchmark.h>

#include "immersia/energy.hpp"
#include "immersia/measure.hpp"
#include "immersia/parallel.hpp"
#include "immersia/slicing.hpp"

using namespace immersia;

namespace {

const SampledImmersion& sphere(int res) {
  static SampledImmersion s9, s17;
  ShapeSpec spec;
  auto& s = res == 9 ? s9 : s17;
  if (s.charts.empty()) s = build_shape(spec, res);
  return s;
}

Execution exec_of(const benchmark::State& st) { return st.range(1) ? Execution::parallel : Execution::serial; }

void BM_Energy(benchmark::State& st) {
  const auto& imm = sphere(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(energy(imm, {}, DerivativeMode::automatic, exec_of(st)).total);
  st.SetItemsProcessed(st.iterations() * imm.node_count());
}

void BM_Pushforward(benchmark::State& st) {
  const auto& imm = sphere(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(pushforward(imm, DerivativeMode::automatic, exec_of(st)).total());
  st.SetItemsProcessed(st.iterations() * imm.node_count());
}

void BM_Thresholds(benchmark::State& st) {
  const auto atoms = energy_atoms(sphere(static_cast<int>(st.range(0))));
  for (auto _ : st) benchmark::DoNotOptimize(all_thresholds(atoms, kDefaultEps0, exec_of(st)).front());
  st.SetItemsProcessed(st.iterations() * atoms.size());
}

void BM_Slice(benchmark::State& st) {
  const auto& imm = sphere(static_cast<int>(st.range(0)));
  Vec q = Vec::Zero(imm.d);
  q[imm.n] = 1.2;
  for (auto _ : st) benchmark::DoNotOptimize(level_set_slice(imm, q, 0.5, TangencyPolicy::skip, kTransTol,
                                                              DerivativeMode::automatic, exec_of(st))
                                                  .cells);
}

// second argument: 0 serial reference, 1 OpenMP kernel
BENCHMARK(BM_Energy)->ArgsProduct({{9, 17}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Pushforward)->ArgsProduct({{9, 17}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Thresholds)->ArgsProduct({{9}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Slice)->ArgsProduct({{9, 17}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
