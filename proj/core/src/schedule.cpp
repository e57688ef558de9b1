#include "lwm/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lwm {

double NoiseSchedule::abar(std::size_t i) const {
  if (i == 0) return final_alpha_bar;
  if (i > inference_timesteps.size())
    throw std::out_of_range("inference level " + std::to_string(i) + " beyond T=" +
                            std::to_string(inference_timesteps.size()));
  return alpha_bars[inference_timesteps[i - 1]];
}

NoiseSchedule schedule_from_betas(std::vector<double> betas, CleanEndpoint endpoint) {
  if (betas.size() < 2) throw std::invalid_argument("schedule needs at least 2 grid points");
  for (double b : betas)
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("beta outside (0,1)");
  NoiseSchedule s;
  s.num_train_steps = betas.size();
  s.alpha_bars.resize(betas.size());
  double prod = 1.0;
  for (std::size_t t = 0; t < betas.size(); ++t) {
    prod *= 1.0 - betas[t];
    s.alpha_bars[t] = prod;
  }
  s.betas = std::move(betas);
  s.inference_timesteps.resize(s.num_train_steps);
  for (std::size_t t = 0; t < s.num_train_steps; ++t) s.inference_timesteps[t] = t;
  s.final_alpha_bar = endpoint == CleanEndpoint::One ? 1.0 : s.alpha_bars[0];
  return s;
}

NoiseSchedule linear_schedule(std::size_t num_train_steps, double beta_start, double beta_end,
                              CleanEndpoint endpoint) {
  if (num_train_steps < 2) throw std::invalid_argument("num_train_steps must be >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(num_train_steps);
  const double span = beta_end - beta_start;
  const double n1 = static_cast<double>(num_train_steps - 1);
  for (std::size_t t = 0; t < num_train_steps; ++t)
    betas[t] = beta_start + span * (static_cast<double>(t) / n1);
  betas.back() = beta_end;
  return schedule_from_betas(std::move(betas), endpoint);
}

NoiseSchedule subsample(const NoiseSchedule& schedule, std::size_t T) {
  if (T == 0) throw std::invalid_argument("T must be positive");
  if (T > schedule.num_train_steps)
    throw std::invalid_argument("T exceeds the training grid");
  NoiseSchedule s = schedule;
  const std::size_t stride = schedule.num_train_steps / T;
  const std::size_t last = schedule.num_train_steps - 1;
  s.inference_timesteps.resize(T);
  for (std::size_t i = 0; i < T; ++i) s.inference_timesteps[i] = last - stride * (T - 1 - i);
  return s;
}

NoiseSchedule default_schedule(std::size_t T) {
  return subsample(linear_schedule(1000, 0.00085, 0.012), T);
}

}  // namespace lwm
