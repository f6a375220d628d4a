#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace stabcp {

// splitmix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed; stream tags keep substreams
// (data, noise, permutations, splits, bags) from colliding.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed ^ mix64(stream + 0x517cc1b727220a95ULL));
}

// Uniform double in [0, 1) from a hashed word (53 mantissa bits).
constexpr double unit_double(std::uint64_t h) noexcept {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Stateless per-index sort key for epoch permutations. For a fixed
// (seed, epoch) the key of index i does not depend on how many indices
// exist, so deleting the last index of a dataset induces exactly the
// permutation with that entry removed. Coupled leave-one-out training
// relies on this.
inline double permutation_key(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) noexcept {
    return unit_double(mix64(derive_seed(seed, epoch) + index * 0x9e3779b97f4a7c15ULL));
}

// Permutation of [0, n) ordered by ascending key; ties (probability ~0)
// break toward the smaller index.
std::vector<Eigen::Index> keyed_permutation(std::uint64_t seed, std::uint64_t epoch, Eigen::Index n);

// Deterministic generator: mt19937_64 underneath, uniforms built from the
// top 53 bits, normals via the Marsaglia polar method so results do not
// depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();                       // [0, 1)
    double normal();                        // standard normal
    std::uint64_t integer(std::uint64_t n); // uniform on [0, n)

    Eigen::VectorXd normal_vector(Eigen::Index n);
    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);  // row-major fill

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace stabcp
