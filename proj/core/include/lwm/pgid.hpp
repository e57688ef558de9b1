#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "lwm/codec.hpp"
#include "lwm/diffusion.hpp"
#include "lwm/watermarks.hpp"

namespace lwm {

struct PgidConfig {
  std::size_t k_stop = 10;
  std::size_t s_skip = 1;
  double gamma = 0.045;
  std::size_t T = 50;

  void validate() const;
};

PgidConfig pgid_r_profile();
PgidConfig pgid_f_profile();
// "pgid-r" or "pgid-f"
PgidConfig pgid_profile(const std::string& name);

class PgidError : public std::runtime_error {
 public:
  PgidError(std::size_t cycle, const std::string& what);
  std::size_t cycle;
};

struct PgidStats {
  StepCounter stage2;
  double ms_stage1 = 0.0;
  double ms_stage2 = 0.0;
  double ms_stage3 = 0.0;
};

// Closed-form stage II step counts: sum max(i - s, 0) inversions, k(k+1)/2 denoisings.
StepCounter pgid_predicted_steps(const PgidConfig& cfg);

// Stages I and II from an encoded latent. Returns the refined clean latent.
Vec pgid_refine(const PgidConfig& cfg, const ScoreModel& model, const Vec& z0_atk,
                const NoiseSchedule& schedule, PgidStats* stats = nullptr);

// Stages I-III from an encoded latent. Returns the recovered initial noise.
Vec pgid_from_latent(const PgidConfig& cfg, const ScoreModel& model, const Vec& z0_atk,
                     const NoiseSchedule& schedule, PgidStats* stats = nullptr);

Vec pgid_extract(const PgidConfig& cfg, const ScoreModel& model, const LatentCodec& codec,
                 const Image& x_atk, const NoiseSchedule& schedule, Rng& rng,
                 PgidStats* stats = nullptr);

DetectionReport pgid_defend_removal(const WatermarkKey& key, const ScoreModel& model,
                                    const LatentCodec& codec, const Image& x_susp,
                                    const NoiseSchedule& schedule, Rng& rng);
DetectionReport pgid_defend_forgery(const WatermarkKey& key, const ScoreModel& model,
                                    const LatentCodec& codec, const Image& x_susp,
                                    const NoiseSchedule& schedule, Rng& rng);

}  // namespace lwm
