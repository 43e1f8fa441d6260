#include "bico/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bico {
namespace {

// One-sided Jacobi on a matrix with rows >= cols: rotate column pairs of
// `work` until all pairs are mutually orthogonal, accumulating rotations
// into v. Columns of `work` end up as U scaled by the singular values.
void jacobi_orthogonalize(DenseMatrix& work, DenseMatrix& v) {
    const std::size_t m = work.rows(), n = work.cols();
    constexpr double kTol = 1e-12;
    constexpr int kMaxSweeps = 60;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool converged = true;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = work(i, p), wq = work(i, q);
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if (std::fabs(apq) <= kTol * std::sqrt(app * aqq) || apq == 0.0) continue;
                converged = false;

                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = work(i, p), wq = work(i, q);
                    work(i, p) = c * wp - s * wq;
                    work(i, q) = s * wp + c * wq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (converged) break;
    }
}

// Replace near-null columns of u (rank-deficient input) with an orthonormal
// completion built from standard basis vectors, lowest index first.
void complete_null_columns(DenseMatrix& u, const std::vector<bool>& null_col) {
    const std::size_t m = u.rows(), k = u.cols();
    std::size_t basis_cursor = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (!null_col[j]) continue;
        for (; basis_cursor < m; ++basis_cursor) {
            std::vector<double> cand(m, 0.0);
            cand[basis_cursor] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < k; ++c) {
                    if (c == j || (null_col[c] && c > j)) continue;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < m; ++i) dot += cand[i] * u(i, c);
                    for (std::size_t i = 0; i < m; ++i) cand[i] -= dot * u(i, c);
                }
            }
            double norm = 0.0;
            for (double x : cand) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 0.5) {
                for (std::size_t i = 0; i < m; ++i) u(i, j) = cand[i] / norm;
                ++basis_cursor;
                break;
            }
        }
    }
}

SvdResult svd_tall(const DenseMatrix& a) {
    const std::size_t m = a.rows(), n = a.cols();
    DenseMatrix work = a;
    DenseMatrix v = DenseMatrix::identity(n);
    jacobi_orthogonalize(work, v);

    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) {
        double norm = 0.0;
        for (std::size_t i = 0; i < m; ++i) norm += work(i, j) * work(i, j);
        s[j] = std::sqrt(norm);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return s[i] > s[j]; });

    // Columns this far below s_max hold only rotation roundoff; their U
    // direction is noise, so rebuild it orthonormally instead.
    const double smax = s.empty() ? 0.0 : s[order[0]];
    const double null_tol = smax * 1e-13;

    SvdResult r;
    r.u = DenseMatrix(m, n);
    r.v = DenseMatrix(n, n);
    r.s.resize(n);
    std::vector<bool> null_col(n, false);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        r.s[j] = s[src];
        if (s[src] <= null_tol) {
            null_col[j] = true;
            r.s[j] = 0.0;
            for (std::size_t i = 0; i < n; ++i) r.v(i, j) = v(i, src);
            continue;
        }
        for (std::size_t i = 0; i < m; ++i) r.u(i, j) = work(i, src) / s[src];
        for (std::size_t i = 0; i < n; ++i) r.v(i, j) = v(i, src);
    }
    complete_null_columns(r.u, null_col);
    return r;
}

// Sign convention: largest-magnitude entry of each U column positive,
// magnitude ties broken by lowest row index.
void apply_sign_convention(SvdResult& r) {
    const std::size_t m = r.u.rows(), n = r.v.rows(), k = r.s.size();
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double mag = std::fabs(r.u(i, j));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (r.u(arg, j) < 0.0) {
            for (std::size_t i = 0; i < m; ++i) r.u(i, j) = -r.u(i, j);
            for (std::size_t i = 0; i < n; ++i) r.v(i, j) = -r.v(i, j);
        }
    }
}

}  // namespace

SvdResult svd(const DenseMatrix& a) {
    a.require_finite("svd");
    if (a.rows() == 0 || a.cols() == 0)
        throw argument_error("svd: empty matrix " + shape_string(a));
    SvdResult r;
    if (a.rows() >= a.cols()) {
        r = svd_tall(a);
    } else {
        // A = (A^T)^T: svd(A^T) = U' S V'^T  =>  A = V' S U'^T.
        SvdResult t = svd_tall(a.transposed());
        r = SvdResult{std::move(t.v), std::move(t.s), std::move(t.u)};
    }
    apply_sign_convention(r);
    return r;
}

std::size_t svd_rank(const SvdResult& r, double tol) {
    if (r.s.empty()) return 0;
    const double cut = tol * r.s.front();
    std::size_t rank = 0;
    for (double v : r.s)
        if (v > cut) ++rank;
    return rank;
}

}  // namespace bico
