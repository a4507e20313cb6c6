#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mklnet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Caller passed an argument outside the documented domain.
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to reach its documented accuracy.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A function value was requested that the stored representation cannot express.
struct representation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64; used to derive independent per-cell seeds from a global seed.
inline std::uint64_t mix_seed(std::uint64_t seed) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return mix_seed(a ^ mix_seed(b));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

using Rng = std::mt19937_64;

}  // namespace mklnet
