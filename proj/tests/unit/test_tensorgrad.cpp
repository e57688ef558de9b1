#include <gtest/gtest.h>

#include <random>

#include "lwm/tensorgrad.hpp"

using namespace lwm;

namespace {

Vec rand_vec(std::mt19937_64& g, int n) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(g);
  return v;
}

// central differences of a scalar function
Vec fd_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

double rel_err(const Vec& a, const Vec& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-12, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(Tape, IdentityRecordsOnlyInput) {
  tg::Tape t;
  Vec x(3);
  x << 1, 2, 3;
  auto v = t.input(x);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(v.value(), x);
}

TEST(Tape, SquaredNormOfZero) {
  tg::Tape t;
  auto v = tg::squared_norm(t.input(Vec::Zero(5)));
  EXPECT_EQ(v.scalar(), 0.0);
}

TEST(Tape, SquaredNormGradient) {
  std::mt19937_64 g(1);
  tg::Tape t;
  const Vec x = rand_vec(g, 7);
  auto in = t.input(x);
  auto L = tg::squared_norm(in);
  EXPECT_LT((t.gradient(L, in) - 2 * x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Tape, AffineSquaredNormGradient) {
  std::mt19937_64 g(2);
  auto A = std::make_shared<const Mat>(Mat::Random(5, 4));
  const Vec b = rand_vec(g, 5);
  const Vec x = rand_vec(g, 4);
  tg::Tape t;
  auto in = t.input(x);
  auto L = tg::squared_norm(tg::affine(A, in, false, &b));
  const Vec expect = 2 * A->transpose() * (*A * x + b);
  EXPECT_LT((t.gradient(L, in) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tape, SeedIsLinear) {
  std::mt19937_64 g(3);
  tg::Tape t;
  auto in = t.input(rand_vec(g, 6));
  auto L = tg::log_sum_exp(tg::exp(in));
  const Vec g1 = t.gradient(L, in, 1.0);
  const Vec g3 = t.gradient(L, in, -3.5);
  EXPECT_LT((g3 + 3.5 * g1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tape, NonScalarRootRejected) {
  tg::Tape t;
  auto in = t.input(Vec::Ones(3));
  EXPECT_THROW(t.backward(tg::scale(in, 2.0)), tg::TapeError);
}

TEST(Tape, MixingTapesRejected) {
  tg::Tape a, b;
  auto x = a.input(Vec::Ones(3));
  auto y = b.input(Vec::Ones(3));
  EXPECT_THROW(tg::add(x, y), tg::TapeError);
}

TEST(Tape, SizeMismatchRejected) {
  tg::Tape t;
  auto x = t.input(Vec::Ones(3));
  auto y = t.input(Vec::Ones(4));
  EXPECT_THROW(tg::add(x, y), tg::TapeError);
}

TEST(Tape, EveryPrimitiveMatchesFiniteDifferences) {
  std::mt19937_64 g(4);
  const int n = 6;
  auto M = std::make_shared<const Mat>(Mat::Random(n, n));
  const Vec c = rand_vec(g, n);
  const Vec da = rand_vec(g, n);
  const Vec db = rand_vec(g, n);
  auto build = [&](tg::Tape& t, const Vec& x) {
    auto in = t.input(x);
    auto a = tg::affine(M, in, true, &c);
    auto b = tg::diag_lincomb(da, a, db, tg::softmax(in));
    auto e = tg::log(tg::add(tg::exp(tg::scale(b, 0.3)), t.constant(Vec::Constant(n, 2.0))));
    auto f = tg::lincomb(0.7, e, -1.2, tg::sub(in, a));
    auto s = tg::add(tg::add(tg::norm(f), tg::log_sum_exp(f)), tg::sum(tg::scale(f, 0.1)));
    return std::make_pair(in, tg::add(s, tg::squared_norm(b)));
  };
  for (int trial = 0; trial < 5; ++trial) {
    const Vec x = rand_vec(g, n);
    tg::Tape t;
    auto [in, L] = build(t, x);
    const Vec grad = t.gradient(L, in);
    const Vec fd = fd_grad(
        [&](const Vec& y) {
          tg::Tape u;
          return build(u, y).second.scalar();
        },
        x);
    EXPECT_LT(rel_err(grad, fd), 1e-7);
  }
}

TEST(Tape, NormSubgradientAtZero) {
  tg::Tape t;
  auto in = t.input(Vec::Zero(4));
  auto L = tg::norm(in);
  EXPECT_EQ(L.scalar(), 0.0);
  EXPECT_EQ(t.gradient(L, in), Vec::Zero(4));
}

TEST(Tape, ReplayMatchesFreshRecording) {
  std::mt19937_64 g(5);
  auto M = std::make_shared<const Mat>(Mat::Random(4, 4));
  tg::Tape t;
  auto in = t.input(rand_vec(g, 4));
  auto L = tg::log_sum_exp(tg::affine(M, tg::softmax(in)));
  const Vec x2 = rand_vec(g, 4);
  t.set_input(in, x2);
  t.replay();
  tg::Tape u;
  auto L2 = tg::log_sum_exp(tg::affine(M, tg::softmax(u.input(x2))));
  EXPECT_EQ(L.scalar(), L2.scalar());
}

TEST(Tape, OpNames) {
  EXPECT_STREQ(tg::op_name(tg::Op::LogSumExp), "log_sum_exp");
}
