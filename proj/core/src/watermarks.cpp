#include "lwm/watermarks.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lwm {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::TreeRing: return "tree-ring";
    case Scheme::GaussianShading: return "gaussian-shading";
    case Scheme::T2SMark: return "t2smark";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "tree-ring" || name == "tr") return Scheme::TreeRing;
  if (name == "gaussian-shading" || name == "gs") return Scheme::GaussianShading;
  if (name == "t2smark" || name == "t2s") return Scheme::T2SMark;
  throw std::invalid_argument("unknown watermark scheme: " + name);
}

Scheme scheme_of(const WatermarkKey& key) {
  switch (key.index()) {
    case 0: return Scheme::TreeRing;
    case 1: return Scheme::GaussianShading;
    default: return Scheme::T2SMark;
  }
}

bool detects_below(Scheme s) { return s == Scheme::TreeRing; }

namespace {

int side_of(int dim) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  if (side * side != dim) throw std::invalid_argument("latent dimension is not a square grid");
  return side;
}

std::vector<std::uint8_t> random_bits(Rng& rng, int n) {
  std::vector<std::uint8_t> b(static_cast<std::size_t>(n));
  for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1ULL);
  return b;
}

double normal_upper_quantile(double p) {
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), p));
}

}  // namespace

std::vector<std::complex<double>> fft2(const Vec& z, int side) {
  if (z.size() != static_cast<Eigen::Index>(side) * side) throw std::invalid_argument("fft2 size mismatch");
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> F(static_cast<std::size_t>(side * side));
  std::vector<double> row(static_cast<std::size_t>(side));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(side));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) row[c] = z[r * side + c];
    fft.fwd(out, row);
    for (int c = 0; c < side; ++c) F[r * side + c] = out[c];
  }
  std::vector<std::complex<double>> col(static_cast<std::size_t>(side));
  for (int c = 0; c < side; ++c) {
    for (int r = 0; r < side; ++r) col[r] = F[r * side + c];
    fft.fwd(out, col);
    for (int r = 0; r < side; ++r) F[r * side + c] = out[r];
  }
  return F;
}

Vec ifft2_real(const std::vector<std::complex<double>>& F, int side) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> G = F;
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(side));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(side));
  for (int c = 0; c < side; ++c) {
    for (int r = 0; r < side; ++r) buf[r] = G[r * side + c];
    fft.inv(out, buf);
    for (int r = 0; r < side; ++r) G[r * side + c] = out[r];
  }
  Vec z(side * side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) buf[c] = G[r * side + c];
    fft.inv(out, buf);
    for (int c = 0; c < side; ++c) z[r * side + c] = out[c].real();
  }
  return z;
}

TreeRingKey make_tree_ring_key(int dim, double radius, double value_std, std::uint64_t seed) {
  const int side = side_of(dim);
  if (!(radius > 0.0 && radius < side / 2.0)) throw std::invalid_argument("ring radius out of range");
  Rng rng(derive_seed(seed, 0x7472ULL));
  const int n_rings = static_cast<int>(std::floor(radius)) + 2;
  std::normal_distribution<double> nd(0.0, value_std);
  std::vector<double> ring_value(static_cast<std::size_t>(n_rings));
  for (auto& v : ring_value) v = nd(rng);

  TreeRingKey key;
  key.side = side;
  key.radius = radius;
  for (int u = 0; u < side; ++u) {
    const int fu = u <= side / 2 ? u : u - side;
    for (int v = 0; v < side; ++v) {
      const int fv = v <= side / 2 ? v : v - side;
      const double r = std::sqrt(static_cast<double>(fu * fu + fv * fv));
      if (r > radius) continue;
      key.mask.push_back(u * side + v);
      key.target.emplace_back(ring_value[static_cast<std::size_t>(std::lround(r))], 0.0);
    }
  }
  return key;
}

GaussianShadingKey make_gaussian_shading_key(int dim, int k_bits, int rho, std::uint64_t n_users,
                                             double target_fpr, std::uint64_t seed) {
  if (k_bits < 1 || rho < 1) throw std::invalid_argument("k_bits and rho must be positive");
  if (static_cast<long long>(k_bits) * rho > dim) throw std::invalid_argument("k_bits * rho exceeds latent size");
  GaussianShadingKey key;
  key.key_seed = derive_seed(seed, 0x6773ULL);
  key.k_bits = k_bits;
  key.rho = rho;
  key.n_users = n_users;
  key.target_fpr = target_fpr;
  Rng rng(derive_seed(seed, 0x6d7367ULL));
  key.message = random_bits(rng, k_bits);
  const GsThreshold th = gs_threshold(k_bits, n_users, target_fpr);
  key.c_tau = th.c_tau;
  key.tau = th.tau_bitacc;
  return key;
}

T2SMarkKey make_t2smark_key(int dim, int n_bits, int carriers_per_bit, double tts_tau,
                            std::uint64_t seed) {
  if (n_bits < 1 || carriers_per_bit < 1) throw std::invalid_argument("empty T2SMark payload");
  if (static_cast<long long>(n_bits) * carriers_per_bit > dim)
    throw std::invalid_argument("carrier sets exceed latent size");
  T2SMarkKey key;
  key.tts_tau = tts_tau;
  Rng carrier_rng(derive_seed(seed, 0x7432ULL, 1));
  std::vector<int> perm(static_cast<std::size_t>(dim));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), carrier_rng);
  Rng sign_rng(derive_seed(seed, 0x7432ULL, 2));
  for (int b = 0; b < n_bits; ++b) {
    std::vector<int> c(perm.begin() + b * carriers_per_bit, perm.begin() + (b + 1) * carriers_per_bit);
    std::vector<double> s(static_cast<std::size_t>(carriers_per_bit));
    for (auto& x : s) x = (sign_rng() & 1ULL) ? 1.0 : -1.0;
    key.carriers.push_back(std::move(c));
    key.signs.push_back(std::move(s));
  }
  Rng msg_rng(derive_seed(seed, 0x7432ULL, 3));
  key.message = random_bits(msg_rng, n_bits);
  return key;
}

std::vector<std::uint8_t> gs_encrypt(const GaussianShadingKey& key,
                                     const std::vector<std::uint8_t>& bits) {
  Rng stream(key.key_seed);
  std::vector<std::uint8_t> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i)
    out[i] = static_cast<std::uint8_t>((bits[i] ^ (stream() & 1ULL)) & 1U);
  return out;
}

namespace {

Vec sample_tree_ring(const TreeRingKey& key, int dim, Rng& rng) {
  if (dim != key.side * key.side) throw std::invalid_argument("tree-ring key does not match the latent grid");
  auto F = fft2(randn(rng, dim), key.side);
  for (std::size_t i = 0; i < key.mask.size(); ++i) F[static_cast<std::size_t>(key.mask[i])] = key.target[i];
  return ifft2_real(F, key.side);
}

Vec sample_gaussian_shading(const GaussianShadingKey& key, int dim, Rng& rng) {
  if (key.k_bits * key.rho > dim) throw std::invalid_argument("gaussian-shading key does not fit the latent");
  const auto enc = gs_encrypt(key, key.message);
  Vec z = randn(rng, dim);
  for (int c = 0; c < key.rho; ++c)
    for (int b = 0; b < key.k_bits; ++b) {
      const int j = c * key.k_bits + b;
      z[j] = enc[static_cast<std::size_t>(b)] ? std::abs(z[j]) : -std::abs(z[j]);
    }
  return z;
}

Vec sample_t2smark(const T2SMarkKey& key, int dim, Rng& rng) {
  Vec z = randn(rng, dim);
  const boost::math::normal_distribution<double> nd;
  const double p0 = boost::math::cdf(nd, key.tts_tau);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (std::size_t b = 0; b < key.carriers.size(); ++b) {
    const double bit_sign = key.message[b] ? 1.0 : -1.0;
    for (std::size_t j = 0; j < key.carriers[b].size(); ++j) {
      const int idx = key.carriers[b][j];
      if (idx >= dim) throw std::invalid_argument("t2smark carrier outside latent");
      double mag = boost::math::quantile(nd, p0 + U(rng) * (1.0 - p0));
      if (!std::isfinite(mag)) mag = key.tts_tau;
      z[idx] = bit_sign * key.signs[b][j] * std::max(mag, key.tts_tau);
    }
  }
  return z;
}

std::vector<double> t2s_projection(const T2SMarkKey& key, const Vec& z) {
  std::vector<double> p(key.carriers.size(), 0.0);
  for (std::size_t b = 0; b < key.carriers.size(); ++b)
    for (std::size_t j = 0; j < key.carriers[b].size(); ++j) p[b] += key.signs[b][j] * z[key.carriers[b][j]];
  return p;
}

double tree_ring_statistic(const TreeRingKey& key, const Vec& z) {
  const auto F = fft2(z, key.side);
  double s = 0.0;
  for (std::size_t i = 0; i < key.mask.size(); ++i) s += std::norm(F[static_cast<std::size_t>(key.mask[i])] - key.target[i]);
  return s;
}

struct GsDecode {
  std::vector<std::uint8_t> bits;
  int correct = 0;
};

GsDecode gs_decode(const GaussianShadingKey& key, const Vec& z) {
  std::vector<std::uint8_t> enc(static_cast<std::size_t>(key.k_bits));
  for (int b = 0; b < key.k_bits; ++b) {
    int votes = 0;
    for (int c = 0; c < key.rho; ++c) votes += z[c * key.k_bits + b] > 0.0 ? 1 : 0;
    enc[static_cast<std::size_t>(b)] = 2 * votes > key.rho ? 1 : 0;
  }
  GsDecode out;
  out.bits = gs_encrypt(key, enc);
  for (int b = 0; b < key.k_bits; ++b) out.correct += out.bits[b] == key.message[b] ? 1 : 0;
  return out;
}

}  // namespace

Vec sample_watermarked_noise(const WatermarkKey& key, int dim, Rng& rng) {
  switch (scheme_of(key)) {
    case Scheme::TreeRing: return sample_tree_ring(std::get<TreeRingKey>(key), dim, rng);
    case Scheme::GaussianShading: return sample_gaussian_shading(std::get<GaussianShadingKey>(key), dim, rng);
    case Scheme::T2SMark: return sample_t2smark(std::get<T2SMarkKey>(key), dim, rng);
  }
  throw std::logic_error("unreachable");
}

double statistic(const WatermarkKey& key, const Vec& z) {
  switch (scheme_of(key)) {
    case Scheme::TreeRing: return tree_ring_statistic(std::get<TreeRingKey>(key), z);
    case Scheme::GaussianShading: {
      const auto& k = std::get<GaussianShadingKey>(key);
      return static_cast<double>(gs_decode(k, z).correct) / k.k_bits;
    }
    case Scheme::T2SMark: {
      const auto p = t2s_projection(std::get<T2SMarkKey>(key), z);
      double s = 0.0;
      for (double x : p) s += std::abs(x);
      return s;
    }
  }
  throw std::logic_error("unreachable");
}

DetectionReport detect(const WatermarkKey& key, const Vec& z) {
  DetectionReport r;
  r.scheme = scheme_of(key);
  r.detect_below = detects_below(r.scheme);
  switch (r.scheme) {
    case Scheme::TreeRing: {
      const auto& k = std::get<TreeRingKey>(key);
      if (std::isnan(k.threshold)) throw std::logic_error("tree-ring key is not calibrated");
      r.statistic = tree_ring_statistic(k, z);
      r.threshold = k.threshold;
      r.detected = r.statistic < r.threshold;
      return r;
    }
    case Scheme::GaussianShading: {
      const auto& k = std::get<GaussianShadingKey>(key);
      const GsDecode dec = gs_decode(k, z);
      r.statistic = static_cast<double>(dec.correct) / k.k_bits;
      r.threshold = k.tau;
      r.detected = dec.correct > k.c_tau;
      r.bit_accuracy = r.statistic;
      r.bits = dec.bits;
      r.p_value = dec.correct == 0 ? 1.0 : gs_fpr(dec.correct - 1, k.k_bits);
      return r;
    }
    case Scheme::T2SMark: {
      const auto& k = std::get<T2SMarkKey>(key);
      if (std::isnan(k.threshold)) throw std::logic_error("t2smark key is not calibrated");
      const auto p = t2s_projection(k, z);
      std::vector<std::uint8_t> bits(p.size());
      int correct = 0;
      double s = 0.0;
      for (std::size_t b = 0; b < p.size(); ++b) {
        s += std::abs(p[b]);
        bits[b] = p[b] > 0.0 ? 1 : 0;
        correct += bits[b] == k.message[b] ? 1 : 0;
      }
      r.statistic = s;
      r.threshold = k.threshold;
      r.detected = s > k.threshold;
      r.bits = std::move(bits);
      r.bit_accuracy = static_cast<double>(correct) / static_cast<double>(p.size());
      if (k.null_std > 0.0) {
        const boost::math::normal_distribution<double> nd(k.null_mean, k.null_std);
        r.p_value = boost::math::cdf(boost::math::complement(nd, s));
      }
      return r;
    }
  }
  throw std::logic_error("unreachable");
}

double gs_fpr(int c_tau, int k_bits) {
  if (k_bits < 1 || c_tau < 0 || c_tau > k_bits) throw std::invalid_argument("gs_fpr needs 0 <= c_tau <= k_bits");
  if (c_tau == k_bits) return 0.0;
  return boost::math::ibeta(static_cast<double>(c_tau + 1), static_cast<double>(k_bits - c_tau), 0.5);
}

double gs_fpr_multi(int c_tau, int k_bits, std::uint64_t n_users) {
  const double f = gs_fpr(c_tau, k_bits);
  if (n_users <= 1) return f;
  return -std::expm1(static_cast<double>(n_users) * std::log1p(-f));
}

GsThreshold gs_threshold(int k_bits, std::uint64_t n_users, double target_fpr) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) throw std::invalid_argument("target FPR must lie in (0,1)");
  if (n_users < 1) throw std::invalid_argument("n_users must be positive");
  // c_tau = k_bits can never fire, so it does not count as a solution
  for (int c = 0; c < k_bits; ++c) {
    if (gs_fpr_multi(c, k_bits, n_users) <= target_fpr)
      return GsThreshold{c, static_cast<double>(c) / k_bits};
  }
  throw std::invalid_argument("target FPR unsatisfiable");
}

double calibrate_empirical(std::vector<double> null_stats, double target_fpr, bool detect_below) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) throw std::invalid_argument("target FPR must lie in (0,1)");
  const std::size_t M = null_stats.size();
  if (M < 100) throw std::invalid_argument("calibration needs at least 100 null samples");
  const auto m = static_cast<std::size_t>(std::floor(static_cast<double>(M) * target_fpr));
  if (m < 1) throw std::invalid_argument("too few null samples for the requested FPR");
  std::sort(null_stats.begin(), null_stats.end());
  return detect_below ? null_stats[m - 1] : null_stats[M - m];
}

GaussianFit calibrate_gaussian(const std::vector<double>& null_stats, double target_fpr) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) throw std::invalid_argument("target FPR must lie in (0,1)");
  if (null_stats.size() < 2) throw std::invalid_argument("need at least two null samples");
  const double n = static_cast<double>(null_stats.size());
  const double mean = std::accumulate(null_stats.begin(), null_stats.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : null_stats) ss += (x - mean) * (x - mean);
  GaussianFit fit;
  fit.mean = mean;
  fit.stddev = std::sqrt(ss / (n - 1.0));
  fit.threshold = mean + normal_upper_quantile(target_fpr) * fit.stddev;
  return fit;
}

double calibrate_threshold(WatermarkKey& key, const std::function<Vec(std::size_t)>& null_sampler,
                           std::size_t M, double target_fpr) {
  const Scheme s = scheme_of(key);
  if (s == Scheme::GaussianShading) return std::get<GaussianShadingKey>(key).tau;
  if (M < 100) throw std::invalid_argument("calibration needs at least 100 null samples");
  std::vector<double> stats(M);
  for (std::size_t i = 0; i < M; ++i) stats[i] = statistic(key, null_sampler(i));
  if (s == Scheme::TreeRing) {
    auto& k = std::get<TreeRingKey>(key);
    k.threshold = calibrate_empirical(std::move(stats), target_fpr, true);
    return k.threshold;
  }
  auto& k = std::get<T2SMarkKey>(key);
  const GaussianFit fit = calibrate_gaussian(stats, target_fpr);
  k.null_mean = fit.mean;
  k.null_std = fit.stddev;
  k.threshold = fit.threshold;
  return k.threshold;
}

}  // namespace lwm
