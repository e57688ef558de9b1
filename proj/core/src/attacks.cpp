#include "lwm/attacks.hpp"

#include <cmath>
#include <functional>

namespace lwm {

std::string attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::Removal: return "removal";
    case AttackKind::Forgery: return "forgery";
    case AttackKind::Averaging: return "averaging";
    case AttackKind::VaeForgery: return "vae-forgery";
  }
  return "unknown";
}

AttackKind parse_attack(const std::string& name) {
  if (name == "removal") return AttackKind::Removal;
  if (name == "forgery") return AttackKind::Forgery;
  if (name == "averaging") return AttackKind::Averaging;
  if (name == "vae-forgery") return AttackKind::VaeForgery;
  throw std::invalid_argument("unknown attack: " + name);
}

std::string optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "gd"; }

Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "gd" || name == "sgd") return Optimizer::GradientDescent;
  throw std::invalid_argument("unknown optimizer: " + name);
}

void AttackConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("attack steps must be nonnegative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (lambda_reg < 0.0) throw std::invalid_argument("lambda_reg must be nonnegative");
  if (avg_count < 1) throw std::invalid_argument("avg_count must be positive");
}

AttackDiverged::AttackDiverged(int it, double l)
    : std::runtime_error("attack diverged at iteration " + std::to_string(it)), iteration(it), loss(l) {}

namespace {

LossGrad inversion_distance(const ScoreModel& proxy, const NoiseSchedule& schedule, const Vec& z0,
                            const Vec& target, double sign, const Vec& delta) {
  tg::Tape tape;
  tape.reserve(8 * schedule.T() + 8);
  tg::Var d = tape.input(delta);
  tg::Var z = tg::add(tape.constant(z0), d);
  tg::Var zT = invert_full(proxy, z, schedule);
  tg::Var L = tg::norm(tg::lincomb(1.0, zT, sign, tape.constant(target)));
  return LossGrad{L.scalar(), tape.gradient(L, d)};
}

}  // namespace

LossGrad removal_loss(const ScoreModel& proxy, const NoiseSchedule& schedule, const Vec& z0,
                      const Vec& zT_hat, const Vec& delta) {
  return inversion_distance(proxy, schedule, z0, zT_hat, 1.0, delta);
}

LossGrad forgery_loss(const ScoreModel& proxy, const NoiseSchedule& schedule, const Vec& z0c,
                      const Vec& zT_w, const Vec& delta) {
  return inversion_distance(proxy, schedule, z0c, zT_w, -1.0, delta);
}

LossGrad vae_forgery_loss(const LatentCodec& proxy_codec, const Image& xc, const Vec& target_latent,
                          double lambda, const Vec& delta) {
  tg::Tape tape;
  tg::Var d = tape.input(delta);
  tg::Var x = tg::add(tape.constant(xc), d);
  tg::Var z = tg::affine(proxy_codec.mixing, x, true);
  tg::Var fit = tg::norm(tg::sub(z, tape.constant(target_latent)));
  tg::Var L = tg::lincomb(1.0, fit, lambda, tg::norm(d));
  return LossGrad{L.scalar(), tape.gradient(L, d)};
}

AttackResult optimize_delta(const AttackConfig& cfg, Eigen::Index dim,
                            const std::function<LossGrad(const Vec&)>& objective) {
  cfg.validate();
  AttackResult res;
  res.delta = Vec::Zero(dim);
  Vec m = Vec::Zero(dim);
  Vec v = Vec::Zero(dim);
  double b1t = 1.0;
  double b2t = 1.0;
  for (int it = 0; it < cfg.steps; ++it) {
    LossGrad lg = objective(res.delta);
    if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) throw AttackDiverged(it, lg.loss);
    res.losses.push_back(lg.loss);
    if (cfg.optimizer == Optimizer::GradientDescent) {
      res.delta -= cfg.learning_rate * lg.grad;
      continue;
    }
    b1t *= cfg.adam_beta1;
    b2t *= cfg.adam_beta2;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * lg.grad;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * lg.grad.cwiseAbs2();
    const Vec mhat = m / (1.0 - b1t);
    const Vec vhat = v / (1.0 - b2t);
    res.delta.array() -= cfg.learning_rate * mhat.array() / (vhat.array().sqrt() + cfg.adam_eps);
  }
  const LossGrad last = objective(res.delta);
  if (!std::isfinite(last.loss)) throw AttackDiverged(cfg.steps, last.loss);
  res.losses.push_back(last.loss);
  return res;
}

AttackResult removal_attack(const AttackConfig& cfg, const ScoreModel& proxy,
                            const LatentCodec& proxy_codec, const NoiseSchedule& schedule,
                            const Image& x_w, Rng& rng) {
  const Vec z0 = encode(proxy_codec, x_w, rng);
  const Vec zT_hat = invert_last(proxy, z0, schedule);
  AttackResult res = optimize_delta(cfg, z0.size(), [&](const Vec& delta) {
    return removal_loss(proxy, schedule, z0, zT_hat, delta);
  });
  res.image = decode(proxy_codec, z0 + res.delta);
  return res;
}

AttackResult forgery_attack(const AttackConfig& cfg, const ScoreModel& proxy,
                            const LatentCodec& proxy_codec, const NoiseSchedule& schedule,
                            const Image& x_c, const Image& x_w, Rng& rng) {
  const Vec z0c = encode(proxy_codec, x_c, rng);
  const Vec zT_w = invert_last(proxy, encode(proxy_codec, x_w, rng), schedule);
  AttackResult res = optimize_delta(cfg, z0c.size(), [&](const Vec& delta) {
    return forgery_loss(proxy, schedule, z0c, zT_w, delta);
  });
  res.image = decode(proxy_codec, z0c + res.delta);
  return res;
}

Image averaging_attack(const std::vector<Image>& watermarked, const std::vector<Image>& clean,
                       const Image& target) {
  if (watermarked.empty() || watermarked.size() != clean.size())
    throw std::invalid_argument("averaging attack needs two nonempty lists of equal length");
  Vec residual = Vec::Zero(target.size());
  for (std::size_t i = 0; i < watermarked.size(); ++i) residual += watermarked[i] - clean[i];
  residual /= static_cast<double>(watermarked.size());
  return target - residual;
}

AttackResult vae_forgery_attack(const AttackConfig& cfg, const LatentCodec& proxy_codec,
                                const Image& x_c, const Image& x_w) {
  const Vec target = encode_mean(proxy_codec, x_w);
  AttackResult res = optimize_delta(cfg, x_c.size(), [&](const Vec& delta) {
    return vae_forgery_loss(proxy_codec, x_c, target, cfg.lambda_reg, delta);
  });
  res.image = x_c + res.delta;
  return res;
}

}  // namespace lwm
