#pragma once

#include "bico/matrix.hpp"

namespace bico {

/// Thin SVD, A = U diag(S) V^T with k = min(rows, cols).
/// S nonincreasing and nonnegative; U, V have orthonormal columns even for
/// rank-deficient input (null columns are completed deterministically).
struct SvdResult {
    DenseMatrix u;          // m x k
    std::vector<double> s;  // length k
    DenseMatrix v;          // n x k
};

SvdResult svd(const DenseMatrix& a);

/// Numerical rank at tolerance tol * s_max.
std::size_t svd_rank(const SvdResult& r, double tol = 1e-10);

}  // namespace bico
