#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lwm/random.hpp"
#include "lwm/tensorgrad.hpp"

namespace lwm {

enum class Scheme { TreeRing, GaussianShading, T2SMark };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

// Ring values imposed on a disc of low frequencies of the side x side 2-D DFT.
struct TreeRingKey {
  int side = 16;
  double radius = 3.0;
  std::vector<int> mask;                     // flat DFT indices (row-major, unshifted)
  std::vector<std::complex<double>> target;  // one per mask entry
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

struct GaussianShadingKey {
  std::uint64_t key_seed = 0;
  int k_bits = 256;
  int rho = 1;
  std::uint64_t n_users = 100000;
  double target_fpr = 1e-6;
  std::vector<std::uint8_t> message;
  int c_tau = 0;
  double tau = 0.0;  // c_tau / k_bits
};

struct T2SMarkKey {
  double tts_tau = 0.674;
  std::vector<std::vector<int>> carriers;      // per bit, disjoint
  std::vector<std::vector<double>> signs;      // first-stage signs, +-1
  std::vector<std::uint8_t> message;
  double null_mean = std::numeric_limits<double>::quiet_NaN();
  double null_std = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

using WatermarkKey = std::variant<TreeRingKey, GaussianShadingKey, T2SMarkKey>;

Scheme scheme_of(const WatermarkKey& key);

struct DetectionReport {
  Scheme scheme = Scheme::GaussianShading;
  double statistic = 0.0;
  double threshold = 0.0;
  bool detected = false;
  bool detect_below = false;
  std::optional<std::vector<std::uint8_t>> bits;
  std::optional<double> bit_accuracy;
  std::optional<double> p_value;

  // Statistic oriented so that larger means more watermark-like.
  double score() const { return detect_below ? -statistic : statistic; }
};

TreeRingKey make_tree_ring_key(int dim, double radius, double value_std, std::uint64_t seed);
GaussianShadingKey make_gaussian_shading_key(int dim, int k_bits, int rho, std::uint64_t n_users,
                                             double target_fpr, std::uint64_t seed);
T2SMarkKey make_t2smark_key(int dim, int n_bits, int carriers_per_bit, double tts_tau,
                            std::uint64_t seed);

// Keyed bijection on bit strings (XOR with a keyed stream). Self-inverse.
std::vector<std::uint8_t> gs_encrypt(const GaussianShadingKey& key,
                                     const std::vector<std::uint8_t>& bits);

// 2-D DFT of a row-major side x side latent.
std::vector<std::complex<double>> fft2(const Vec& z, int side);
Vec ifft2_real(const std::vector<std::complex<double>>& F, int side);

Vec sample_watermarked_noise(const WatermarkKey& key, int dim, Rng& rng);

// Scheme statistic only (no threshold needed).
double statistic(const WatermarkKey& key, const Vec& zT_hat);
bool detects_below(Scheme s);

DetectionReport detect(const WatermarkKey& key, const Vec& zT_hat);

// P(Bin(k, 1/2) > c_tau).
double gs_fpr(int c_tau, int k_bits);
// Family-wise FPR over n_users independent tests.
double gs_fpr_multi(int c_tau, int k_bits, std::uint64_t n_users);

struct GsThreshold {
  int c_tau = 0;
  double tau_bitacc = 0.0;
};
GsThreshold gs_threshold(int k_bits, std::uint64_t n_users, double target_fpr);

// Empirical threshold: detect_below -> the floor(M*fpr)-th smallest null statistic,
// otherwise the floor(M*fpr)-th largest.
double calibrate_empirical(std::vector<double> null_stats, double target_fpr, bool detect_below);

struct GaussianFit {
  double mean = 0.0;
  double stddev = 0.0;
  double threshold = 0.0;
};
// Upper-tail critical value of a normal fitted to the null statistics.
GaussianFit calibrate_gaussian(const std::vector<double>& null_stats, double target_fpr);

// Draws M null latents, fits the scheme's threshold and stores it in the key.
// Gaussian Shading needs no sampling and returns its analytic bit-accuracy threshold.
double calibrate_threshold(WatermarkKey& key, const std::function<Vec(std::size_t)>& null_sampler,
                           std::size_t M, double target_fpr);

}  // namespace lwm
