#pragma once

#include <cstddef>
#include <vector>

namespace lwm {

// Variance schedule on a discrete training grid plus the inference subsequence.
//
// Inference levels are addressed by index i in [0, T]: level i >= 1 sits at grid
// index inference_timesteps[i - 1], level 0 is the clean endpoint whose alpha_bar
// is final_alpha_bar.
struct NoiseSchedule {
  std::size_t num_train_steps = 0;
  std::vector<double> betas;
  std::vector<double> alpha_bars;
  std::vector<std::size_t> inference_timesteps;
  double final_alpha_bar = 1.0;

  std::size_t T() const { return inference_timesteps.size(); }

  // alpha_bar at inference level i (0 = clean endpoint).
  double abar(std::size_t i) const;
};

enum class CleanEndpoint {
  One,       // alpha_bar = 1 at level 0
  FirstGrid  // alpha_bar = alpha_bars[0] at level 0
};

// Betas interpolated linearly between the endpoints (inclusive).
// The inference subsequence is the full grid.
NoiseSchedule linear_schedule(std::size_t num_train_steps, double beta_start,
                              double beta_end,
                              CleanEndpoint endpoint = CleanEndpoint::FirstGrid);

// Schedule from explicit betas, e.g. a flat or hand-built table.
NoiseSchedule schedule_from_betas(std::vector<double> betas,
                                  CleanEndpoint endpoint = CleanEndpoint::FirstGrid);

// Uniform-stride subsequence of length T ending at the last grid index.
NoiseSchedule subsample(const NoiseSchedule& schedule, std::size_t T);

// Default 1000-step SD-style schedule subsampled to T inference steps.
NoiseSchedule default_schedule(std::size_t T = 50);

}  // namespace lwm
