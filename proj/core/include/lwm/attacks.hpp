#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lwm/codec.hpp"
#include "lwm/diffusion.hpp"

namespace lwm {

enum class AttackKind { Removal, Forgery, Averaging, VaeForgery };
enum class Optimizer { GradientDescent, Adam };

std::string attack_name(AttackKind k);
AttackKind parse_attack(const std::string& name);
std::string optimizer_name(Optimizer o);
Optimizer parse_optimizer(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::Removal;
  int steps = 50;
  double learning_rate = 0.01;
  Optimizer optimizer = Optimizer::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda_reg = 5e4;
  int avg_count = 500;

  void validate() const;
};

class AttackDiverged : public std::runtime_error {
 public:
  AttackDiverged(int iteration, double loss);
  int iteration;
  double loss;
};

struct LossGrad {
  double loss = 0.0;
  Vec grad;
};

// || I(z0 + delta) + zT_hat ||_2
LossGrad removal_loss(const ScoreModel& proxy, const NoiseSchedule& schedule, const Vec& z0,
                      const Vec& zT_hat, const Vec& delta);
// || I(z0c + delta) - zT_w ||_2
LossGrad forgery_loss(const ScoreModel& proxy, const NoiseSchedule& schedule, const Vec& z0c,
                      const Vec& zT_w, const Vec& delta);
// || E(xc + delta) - target_latent ||_2 + lambda ||delta||_2 with the noise-free proxy encoder
LossGrad vae_forgery_loss(const LatentCodec& proxy_codec, const Image& xc, const Vec& target_latent,
                          double lambda, const Vec& delta);

struct AttackResult {
  Image image;
  Vec delta;
  std::vector<double> losses;  // loss before each update, then the final loss
};

// Runs cfg.steps updates of delta starting from zero.
AttackResult optimize_delta(const AttackConfig& cfg, Eigen::Index dim,
                            const std::function<LossGrad(const Vec&)>& objective);

AttackResult removal_attack(const AttackConfig& cfg, const ScoreModel& proxy,
                            const LatentCodec& proxy_codec, const NoiseSchedule& schedule,
                            const Image& x_w, Rng& rng);

AttackResult forgery_attack(const AttackConfig& cfg, const ScoreModel& proxy,
                            const LatentCodec& proxy_codec, const NoiseSchedule& schedule,
                            const Image& x_c, const Image& x_w, Rng& rng);

Image averaging_attack(const std::vector<Image>& watermarked, const std::vector<Image>& clean,
                       const Image& target);

AttackResult vae_forgery_attack(const AttackConfig& cfg, const LatentCodec& proxy_codec,
                                const Image& x_c, const Image& x_w);

}  // namespace lwm
