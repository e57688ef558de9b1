#include "lwm/codec.hpp"

#include <stdexcept>

namespace lwm {

namespace {
void require_finite(const Vec& v) {
  if (!v.allFinite()) throw std::invalid_argument("codec input is not finite");
}
}  // namespace

LatentCodec codec_from_matrix(const Mat& A, double noise_std) {
  if (A.rows() != A.cols()) throw std::invalid_argument("codec matrix must be square");
  if (noise_std < 0.0) throw std::invalid_argument("negative reconstruction noise");
  const double err = (A.transpose() * A - Mat::Identity(A.rows(), A.cols())).cwiseAbs().maxCoeff();
  if (err >= 1e-10) throw std::invalid_argument("codec matrix is not orthogonal");
  return LatentCodec{std::make_shared<const Mat>(A), noise_std};
}

LatentCodec make_codec(Eigen::Index d, std::uint64_t seed, double noise_std) {
  Rng rng(derive_seed(seed, 0x636f646563ULL));
  return codec_from_matrix(random_orthogonal(rng, d), noise_std);
}

LatentCodec identity_codec(Eigen::Index d, double noise_std) {
  return codec_from_matrix(Mat::Identity(d, d), noise_std);
}

Image decode(const LatentCodec& codec, const Vec& z0) {
  require_finite(z0);
  return (*codec.mixing) * z0;
}

Vec encode_mean(const LatentCodec& codec, const Image& x) {
  require_finite(x);
  return codec.mixing->transpose() * x;
}

Vec encode(const LatentCodec& codec, const Image& x, Rng& rng) {
  Vec z = encode_mean(codec, x);
  if (codec.noise_std > 0.0) z += codec.noise_std * randn(rng, z.size());
  return z;
}

}  // namespace lwm
