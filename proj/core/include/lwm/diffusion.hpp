#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "lwm/schedule.hpp"
#include "lwm/tensorgrad.hpp"

namespace lwm {

// Gaussian-mixture latent prior with a shared covariance B diag(variances) B^T.
// Means are stored in the spectral coordinates y = B^T z. A null basis means
// B = I. With all variances equal and no basis this is the isotropic mixture.
struct ScoreModel {
  Mat means;            // K x d, spectral coordinates
  Vec log_weights;      // K
  Vec variances;        // d
  std::shared_ptr<const Mat> basis;

  std::size_t dim() const { return static_cast<std::size_t>(variances.size()); }
  std::size_t components() const { return static_cast<std::size_t>(means.rows()); }
  Vec weights() const;
  Mat ambient_means() const;  // K x d
  void validate() const;
};

// Isotropic mixture with means given in latent coordinates.
ScoreModel make_isotropic_model(const Mat& means, const Vec& weights, double variance);

// Two-level spectrum: a fraction of spectral directions carry lo_variance, the
// rest hi_variance. Means are random directions scaled to mean_scale.
struct PriorSpec {
  std::size_t dim = 256;
  std::size_t components = 8;
  double mean_scale = 3.0;
  double hi_variance = 2.0;
  double lo_variance = 0.05;
  double lo_fraction = 0.5;
  bool rotate = true;
  std::uint64_t seed = 0;
};

ScoreModel make_model(const PriorSpec& spec);

// Same spectrum and basis, fresh mixture means (grey-box proxy).
ScoreModel resample_means(const ScoreModel& model, double mean_scale, std::uint64_t seed);

struct StepCounter {
  std::size_t inversions = 0;
  std::size_t denoisings = 0;
};

using Trajectory = std::vector<Vec>;

// Posterior component probabilities of z at noise level abar.
Vec posterior_weights(const ScoreModel& model, const Vec& z, double abar);

tg::Var predict_eps(const ScoreModel& model, tg::Var z, double abar);
Vec predict_eps(const ScoreModel& model, const Vec& z, std::size_t level,
                const NoiseSchedule& schedule);

// Deterministic DDIM transfer from abar_from to abar_to with eps evaluated at abar_eval.
tg::Var ddim_transfer(const ScoreModel& model, tg::Var z, double abar_from, double abar_to,
                      double abar_eval);

// Level t -> t-1 (t >= 1).
tg::Var denoise_step(const ScoreModel& model, tg::Var z, std::size_t t,
                     const NoiseSchedule& schedule, StepCounter* counter = nullptr);
Vec denoise_step(const ScoreModel& model, const Vec& z, std::size_t t,
                 const NoiseSchedule& schedule, StepCounter* counter = nullptr);

// Level t -> t+1 (t <= T-1), eps evaluated at level t.
tg::Var inverse_step(const ScoreModel& model, tg::Var z, std::size_t t,
                     const NoiseSchedule& schedule, StepCounter* counter = nullptr);
Vec inverse_step(const ScoreModel& model, const Vec& z, std::size_t t,
                 const NoiseSchedule& schedule, StepCounter* counter = nullptr);

Trajectory invert_full(const ScoreModel& model, const Vec& z0, const NoiseSchedule& schedule,
                       StepCounter* counter = nullptr);
tg::Var invert_full(const ScoreModel& model, tg::Var z0, const NoiseSchedule& schedule);
Vec invert_last(const ScoreModel& model, const Vec& z0, const NoiseSchedule& schedule);

Vec denoise_full(const ScoreModel& model, const Vec& zT, const NoiseSchedule& schedule,
                 StepCounter* counter = nullptr);

}  // namespace lwm
