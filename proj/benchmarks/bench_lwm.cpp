#include <benchmark/benchmark.h>

#include "lwm/harness.hpp"

using namespace lwm;

namespace {

struct Fixture {
  ScoreModel model;
  NoiseSchedule schedule;
  LatentCodec codec;
  GaussianShadingKey key;
  Vec z0;

  explicit Fixture(std::size_t d) {
    PriorSpec ps;
    ps.dim = d;
    ps.seed = 11;
    model = make_model(ps);
    schedule = default_schedule(50);
    codec = make_codec(static_cast<Eigen::Index>(d), 12);
    key = make_gaussian_shading_key(static_cast<int>(d), static_cast<int>(d), 1, 100000, 1e-6, 7);
    Rng rng(1);
    z0 = denoise_full(model, sample_watermarked_noise(key, static_cast<int>(d), rng), schedule);
  }
};

const Fixture& fixture(std::size_t d) {
  static const Fixture f64(64), f256(256);
  return d == 64 ? f64 : f256;
}

void BM_PredictEps(benchmark::State& st) {
  const auto& f = fixture(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(predict_eps(f.model, f.z0, 25, f.schedule));
}
BENCHMARK(BM_PredictEps)->Arg(64)->Arg(256);

void BM_InverseStep(benchmark::State& st) {
  const auto& f = fixture(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(inverse_step(f.model, f.z0, 25, f.schedule));
}
BENCHMARK(BM_InverseStep)->Arg(64)->Arg(256);

void BM_InvertFull(benchmark::State& st) {
  const auto& f = fixture(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(invert_last(f.model, f.z0, f.schedule));
}
BENCHMARK(BM_InvertFull)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_PgidR(benchmark::State& st) {
  const auto& f = fixture(256);
  for (auto _ : st) benchmark::DoNotOptimize(pgid_from_latent(pgid_r_profile(), f.model, f.z0, f.schedule));
}
BENCHMARK(BM_PgidR)->Unit(benchmark::kMillisecond);

void BM_PgidF(benchmark::State& st) {
  const auto& f = fixture(256);
  for (auto _ : st) benchmark::DoNotOptimize(pgid_from_latent(pgid_f_profile(), f.model, f.z0, f.schedule));
}
BENCHMARK(BM_PgidF)->Unit(benchmark::kMillisecond);

// one optimizer iteration: forward chain plus reverse sweep
void BM_AttackIteration(benchmark::State& st) {
  const auto& f = fixture(st.range(0));
  const Vec zT = invert_last(f.model, f.z0, f.schedule);
  const Vec delta = Vec::Zero(f.z0.size());
  for (auto _ : st) benchmark::DoNotOptimize(removal_loss(f.model, f.schedule, f.z0, zT, delta));
}
BENCHMARK(BM_AttackIteration)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_DetectGs(benchmark::State& st) {
  const auto& f = fixture(256);
  const WatermarkKey key = f.key;
  const Vec zT = invert_last(f.model, f.z0, f.schedule);
  for (auto _ : st) benchmark::DoNotOptimize(detect(key, zT));
}
BENCHMARK(BM_DetectGs);

}  // namespace

BENCHMARK_MAIN();
