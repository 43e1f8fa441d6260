#include "bico/rng.hpp"

#include <cmath>
#include <numbers>

namespace bico {

std::uint64_t Rng::next_u64() {
    // splitmix64 (Steele, Lea, Flood 2014)
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) throw argument_error("uniform_index: n == 0");
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_index(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

Rng Rng::fork(std::uint64_t tag) const {
    Rng probe(seed_ ^ (0x6a09e667f3bcc909ULL + tag * 0x9e3779b97f4a7c15ULL));
    probe.next_u64();
    return probe;
}

DenseMatrix random_normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    DenseMatrix m(rows, cols);
    for (double& v : m.values()) v = rng.normal();
    return m;
}

DenseMatrix random_orthogonal(std::size_t d, Rng& rng) {
    if (d == 0) throw argument_error("random_orthogonal: d == 0");
    // Modified Gram-Schmidt on a Gaussian matrix, re-drawing any column that
    // degenerates (probability ~0, but keeps the contract unconditional).
    DenseMatrix q(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        for (int attempt = 0;; ++attempt) {
            for (std::size_t i = 0; i < d; ++i) q(i, j) = rng.normal();
            for (int pass = 0; pass < 2; ++pass) {  // twice is enough
                for (std::size_t k = 0; k < j; ++k) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < d; ++i) dot += q(i, k) * q(i, j);
                    for (std::size_t i = 0; i < d; ++i) q(i, j) -= dot * q(i, k);
                }
            }
            double norm = 0.0;
            for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (std::size_t i = 0; i < d; ++i) q(i, j) /= norm;
                break;
            }
            if (attempt > 64) throw numeric_error("random_orthogonal: degenerate draw");
        }
    }
    return q;
}

DenseMatrix random_permutation_matrix(std::size_t d, Rng& rng) {
    if (d == 0) throw argument_error("random_permutation_matrix: d == 0");
    const auto p = rng.permutation(d);
    DenseMatrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, p[i]) = 1.0;
    return m;
}

}  // namespace bico
