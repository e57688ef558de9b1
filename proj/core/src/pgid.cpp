#include "lwm/pgid.hpp"

#include <chrono>

namespace lwm {

void PgidConfig::validate() const {
  if (T == 0) throw std::invalid_argument("pgid T must be positive");
  if (k_stop >= T) throw std::invalid_argument("pgid k_stop must be below T");
  if (s_skip > k_stop) throw std::invalid_argument("pgid s_skip must not exceed k_stop");
  if (!(gamma >= 0.0)) throw std::invalid_argument("pgid gamma must be nonnegative");
}

PgidConfig pgid_r_profile() { return PgidConfig{10, 1, 0.045, 50}; }
PgidConfig pgid_f_profile() { return PgidConfig{15, 3, 0.001, 50}; }

PgidConfig pgid_profile(const std::string& name) {
  if (name == "pgid-r") return pgid_r_profile();
  if (name == "pgid-f") return pgid_f_profile();
  throw std::invalid_argument("unknown pgid profile: " + name);
}

PgidError::PgidError(std::size_t c, const std::string& what)
    : std::runtime_error(what + " in pgid cycle " + std::to_string(c)), cycle(c) {}

StepCounter pgid_predicted_steps(const PgidConfig& cfg) {
  StepCounter c;
  for (std::size_t i = 1; i <= cfg.k_stop; ++i) {
    if (i > cfg.s_skip) c.inversions += i - cfg.s_skip;
    c.denoisings += i;
  }
  return c;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

NoiseSchedule matching_schedule(const PgidConfig& cfg, const NoiseSchedule& schedule) {
  if (schedule.T() == cfg.T) return schedule;
  return subsample(schedule, cfg.T);
}

Vec refine(const PgidConfig& cfg, const ScoreModel& model, const Vec& z0_atk,
           const NoiseSchedule& sched, PgidStats* stats) {
  auto t0 = Clock::now();
  // Stage I
  const Trajectory traj = invert_full(model, z0_atk, sched);
  if (stats) stats->ms_stage1 += ms_since(t0);

  // Stage II
  t0 = Clock::now();
  StepCounter local;
  Vec z = z0_atk;
  for (std::size_t i = 1; i <= cfg.k_stop; ++i) {
    const std::size_t n_inv = i > cfg.s_skip ? i - cfg.s_skip : 0;
    for (std::size_t t = 1; t <= n_inv; ++t) {
      z = inverse_step(model, z, t - 1, sched, &local);
      z += cfg.gamma * (z - traj[t]);
    }
    for (std::size_t t = i; t >= 1; --t) z = denoise_step(model, z, t, sched, &local);
    if (!z.allFinite()) throw PgidError(i, "non-finite latent");
  }
  if (stats) {
    stats->ms_stage2 += ms_since(t0);
    stats->stage2.inversions += local.inversions;
    stats->stage2.denoisings += local.denoisings;
  }
  return z;
}

}  // namespace

Vec pgid_refine(const PgidConfig& cfg, const ScoreModel& model, const Vec& z0_atk,
                const NoiseSchedule& schedule, PgidStats* stats) {
  cfg.validate();
  return refine(cfg, model, z0_atk, matching_schedule(cfg, schedule), stats);
}

Vec pgid_from_latent(const PgidConfig& cfg, const ScoreModel& model, const Vec& z0_atk,
                     const NoiseSchedule& schedule, PgidStats* stats) {
  cfg.validate();
  const NoiseSchedule sched = matching_schedule(cfg, schedule);
  const Vec z = refine(cfg, model, z0_atk, sched, stats);
  // Stage III
  const auto t0 = Clock::now();
  Vec zT = invert_last(model, z, sched);
  if (stats) stats->ms_stage3 += ms_since(t0);
  if (!zT.allFinite()) throw PgidError(cfg.k_stop, "non-finite final inversion");
  return zT;
}

Vec pgid_extract(const PgidConfig& cfg, const ScoreModel& model, const LatentCodec& codec,
                 const Image& x_atk, const NoiseSchedule& schedule, Rng& rng, PgidStats* stats) {
  cfg.validate();
  return pgid_from_latent(cfg, model, encode(codec, x_atk, rng), schedule, stats);
}

DetectionReport pgid_defend_removal(const WatermarkKey& key, const ScoreModel& model,
                                    const LatentCodec& codec, const Image& x_susp,
                                    const NoiseSchedule& schedule, Rng& rng) {
  return detect(key, pgid_extract(pgid_r_profile(), model, codec, x_susp, schedule, rng));
}

DetectionReport pgid_defend_forgery(const WatermarkKey& key, const ScoreModel& model,
                                    const LatentCodec& codec, const Image& x_susp,
                                    const NoiseSchedule& schedule, Rng& rng) {
  return detect(key, pgid_extract(pgid_f_profile(), model, codec, x_susp, schedule, rng));
}

}  // namespace lwm
