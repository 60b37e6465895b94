#ifndef GRADFIELD_RNG_HPP
#define GRADFIELD_RNG_HPP

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace gradfield {

// splitmix64 step; used to derive decorrelated substream seeds from
// (master seed, stream index) so parallel and serial runs agree.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(mix64(master) ^ mix64(stream + 0x51ed2701a2c5e43bULL));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t stream = 0) {
  return Rng(derive_seed(master, stream));
}

inline Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = nd(rng);
  return z;
}

}  // namespace gradfield

#endif
