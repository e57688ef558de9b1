#pragma once

#include <cstdint>
#include <random>

#include "lwm/tensorgrad.hpp"

namespace lwm {

using Rng = std::mt19937_64;

// Independent stream seed from a base seed and a tag path (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

Vec randn(Rng& rng, Eigen::Index n);

// Haar-distributed orthogonal matrix.
Mat random_orthogonal(Rng& rng, Eigen::Index d);

}  // namespace lwm
