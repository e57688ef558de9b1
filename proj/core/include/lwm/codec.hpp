#pragma once

#include <cstdint>
#include <memory>

#include "lwm/random.hpp"
#include "lwm/tensorgrad.hpp"

namespace lwm {

using Image = Vec;

// Orthogonal linear stand-in for the VAE: decode x = A z, encode z = A^T x + noise.
struct LatentCodec {
  std::shared_ptr<const Mat> mixing;  // d x d orthogonal
  double noise_std = 0.01;

  Eigen::Index dim() const { return mixing->rows(); }
};

LatentCodec make_codec(Eigen::Index d, std::uint64_t seed, double noise_std = 0.01);
LatentCodec identity_codec(Eigen::Index d, double noise_std = 0.0);
// Throws unless the mixing matrix is orthogonal to 1e-10.
LatentCodec codec_from_matrix(const Mat& A, double noise_std);

Image decode(const LatentCodec& codec, const Vec& z0);
Vec encode(const LatentCodec& codec, const Image& x, Rng& rng);
// Encoder mean, without reconstruction noise.
Vec encode_mean(const LatentCodec& codec, const Image& x);

}  // namespace lwm
