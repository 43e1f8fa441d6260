#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include "bico/matrix.hpp"

namespace bico {

/// Deterministic splitmix64-based generator. Same seed gives the same
/// stream on every platform; no libc randomness involved.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed), seed_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();

    /// Fisher-Yates shuffle of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    /// Derive an independent stream; stable function of (seed, tag).
    Rng fork(std::uint64_t tag) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t state_;
    std::uint64_t seed_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// d x d matrix with orthonormal rows/columns built by orthonormalizing a
/// standard-normal matrix. ||QQ^T - I||_max <= 1e-10.
DenseMatrix random_orthogonal(std::size_t d, Rng& rng);

/// 0/1 matrix with exactly one 1 per row and column.
DenseMatrix random_permutation_matrix(std::size_t d, Rng& rng);

/// Matrix of iid standard normals.
DenseMatrix random_normal_matrix(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace bico
