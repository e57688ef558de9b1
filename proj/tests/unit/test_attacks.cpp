#include <gtest/gtest.h>

#include <cmath>

#include "lwm/attacks.hpp"
#include "lwm/watermarks.hpp"

using namespace lwm;

namespace {

ScoreModel small_model(std::size_t d, std::uint64_t seed) {
  PriorSpec s;
  s.dim = d;
  s.components = 3;
  s.seed = seed;
  return make_model(s);
}

// central differences on a scalar objective
Vec fd_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST(AttackLoss, RemovalGradientMatchesFiniteDifferences) {
  const auto m = small_model(8, 1);
  const auto s = default_schedule(6);
  Rng rng(1);
  const Vec z0 = randn(rng, 8), zT = randn(rng, 8), delta = 0.1 * randn(rng, 8);
  const auto lg = removal_loss(m, s, z0, zT, delta);
  const Vec fd = fd_grad([&](const Vec& d) { return (invert_last(m, z0 + d, s) + zT).norm(); }, delta);
  EXPECT_LT(rel_err(lg.grad, fd), 1e-6);
}

TEST(AttackLoss, ForgeryGradientMatchesFiniteDifferences) {
  const auto m = small_model(16, 2);
  const auto s = default_schedule(10);
  Rng rng(2);
  const Vec z0 = randn(rng, 16), zT = randn(rng, 16), delta = 0.1 * randn(rng, 16);
  const auto lg = forgery_loss(m, s, z0, zT, delta);
  const Vec fd = fd_grad([&](const Vec& d) { return (invert_last(m, z0 + d, s) - zT).norm(); }, delta);
  EXPECT_LT(rel_err(lg.grad, fd), 1e-6);
}

TEST(AttackLoss, VaeGradientMatchesFiniteDifferences) {
  const auto codec = make_codec(32, 3);
  Rng rng(3);
  const Vec xc = randn(rng, 32), target = randn(rng, 32), delta = randn(rng, 32);
  const double lambda = 0.7;
  const auto lg = vae_forgery_loss(codec, xc, target, lambda, delta);
  const auto f = [&](const Vec& d) {
    return (codec.mixing->transpose() * (xc + d) - target).norm() + lambda * d.norm();
  };
  EXPECT_NEAR(lg.loss, f(delta), 1e-12);
  EXPECT_LT(rel_err(lg.grad, fd_grad(f, delta)), 1e-6);
}

TEST(AttackLoss, FirstIterateEqualsDirectComputation) {
  const auto m = small_model(8, 4);
  const auto s = default_schedule(5);
  const auto codec = identity_codec(8);
  Rng rng(4);
  const Image x = randn(rng, 8);
  AttackConfig cfg;
  cfg.steps = 3;
  Rng arng(5);
  const auto res = removal_attack(cfg, m, codec, s, x, arng);
  const Vec zT = invert_last(m, x, s);
  EXPECT_NEAR(res.losses.front(), 2.0 * zT.norm(), 1e-10);
  ASSERT_EQ(res.losses.size(), 4u);
}

TEST(Attack, ZeroStepsIsCodecRoundTrip) {
  const auto m = small_model(16, 5);
  const auto s = default_schedule(5);
  const auto codec = make_codec(16, 6, 0.0);
  Rng rng(6);
  const Image x = randn(rng, 16);
  AttackConfig cfg;
  cfg.steps = 0;
  Rng arng(7);
  const auto res = removal_attack(cfg, m, codec, s, x, arng);
  EXPECT_LT((res.image - x).norm(), 1e-12);
  EXPECT_EQ(res.losses.size(), 1u);
}

TEST(Attack, ForgeryOfWatermarkedImageItselfStaysDetected) {
  const auto key = make_gaussian_shading_key(256, 256, 1, 100000, 1e-6, 7);
  PriorSpec ps;
  ps.lo_fraction = 0.0;
  ps.hi_variance = 0.1;
  ps.rotate = false;
  ps.seed = 8;
  const auto m = make_model(ps);
  const auto s = default_schedule(10);
  const auto codec = make_codec(256, 9, 0.0);
  Rng rng(8);
  const Vec zT = sample_watermarked_noise(key, 256, rng);
  const Image xw = decode(codec, denoise_full(m, zT, s));
  AttackConfig cfg;
  cfg.kind = AttackKind::Forgery;
  cfg.steps = 0;
  Rng arng(9);
  const auto res = forgery_attack(cfg, m, codec, s, xw, xw, arng);
  EXPECT_TRUE(detect(key, invert_last(m, encode_mean(codec, res.image), s)).detected);
}

TEST(Attack, AveragingAlgebra) {
  Rng rng(10);
  const Vec r = randn(rng, 12);
  std::vector<Image> w, c;
  for (int i = 0; i < 5; ++i) {
    c.push_back(randn(rng, 12));
    w.push_back(c.back() + r);
  }
  const Image t = randn(rng, 12);
  EXPECT_LT((averaging_attack(w, c, t) - (t - r)).norm(), 1e-12);
  // removing the mean residual from a watermarked image returns its clean twin
  EXPECT_LT((averaging_attack(w, c, w[2]) - c[2]).norm(), 1e-12);
  EXPECT_THROW(averaging_attack({}, {}, t), std::invalid_argument);
  w.pop_back();
  EXPECT_THROW(averaging_attack(w, c, t), std::invalid_argument);
}

TEST(Attack, VaeHugePenaltyKeepsDeltaSmall) {
  const auto codec = make_codec(32, 11);
  Rng rng(11);
  const Image xc = randn(rng, 32), xw = randn(rng, 32);
  AttackConfig cfg;
  cfg.kind = AttackKind::VaeForgery;
  cfg.steps = 50;
  cfg.lambda_reg = 1e8;
  const auto big = vae_forgery_attack(cfg, codec, xc, xw);
  cfg.lambda_reg = 0.0;
  const auto free = vae_forgery_attack(cfg, codec, xc, xw);
  EXPECT_LT(big.delta.norm(), 0.1 * free.delta.norm());
  EXPECT_LT(free.losses.back(), free.losses.front());
}

TEST(Attack, VaeIdenticalImagesStayPut) {
  const auto codec = make_codec(16, 12);
  Rng rng(12);
  const Image x = randn(rng, 16);
  AttackConfig cfg;
  cfg.kind = AttackKind::VaeForgery;
  cfg.steps = 20;
  cfg.optimizer = Optimizer::GradientDescent;
  const auto res = vae_forgery_attack(cfg, codec, x, x);
  EXPECT_EQ(res.delta.norm(), 0.0);
}

TEST(Attack, RemovalLossDecreases) {
  const auto m = small_model(16, 13);
  const auto s = default_schedule(8);
  const auto codec = make_codec(16, 14);
  Rng rng(13);
  const Image x = decode(codec, denoise_full(m, randn(rng, 16), s));
  for (Optimizer o : {Optimizer::Adam, Optimizer::GradientDescent}) {
    AttackConfig cfg;
    cfg.steps = 40;
    cfg.optimizer = o;
    Rng arng(15);
    const auto res = removal_attack(cfg, m, codec, s, x, arng);
    EXPECT_LT(res.losses.back(), res.losses.front()) << optimizer_name(o);
    for (double l : res.losses) EXPECT_TRUE(std::isfinite(l));
  }
}

TEST(Attack, DivergenceReportsIteration) {
  for (int bad : {0, 7, 19}) {
    AttackConfig cfg;
    cfg.steps = 20;
    int calls = 0;
    try {
      optimize_delta(cfg, 4, [&](const Vec& d) {
        const double l = calls++ == bad ? std::nan("") : d.squaredNorm() + 1.0;
        return LossGrad{l, 2.0 * d + Vec::Ones(4)};
      });
      FAIL() << "no throw";
    } catch (const AttackDiverged& e) {
      EXPECT_EQ(e.iteration, bad);
    }
  }
}

TEST(Attack, ConfigValidation) {
  AttackConfig cfg;
  cfg.steps = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = AttackConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(parse_attack(attack_name(AttackKind::VaeForgery)), AttackKind::VaeForgery);
  EXPECT_THROW(parse_attack("blur"), std::invalid_argument);
}
