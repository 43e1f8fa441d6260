#include "bico/matrix.hpp"

#include <cmath>
#include <string>

namespace bico {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw shape_error("DenseMatrix: data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
    }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw shape_error("DenseMatrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t d) {
    DenseMatrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

DenseMatrix DenseMatrix::row(std::size_t i) const {
    DenseMatrix r(1, cols_);
    for (std::size_t j = 0; j < cols_; ++j) r(0, j) = (*this)(i, j);
    return r;
}

bool DenseMatrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void DenseMatrix::require_finite(const char* context) const {
    if (!all_finite()) throw numeric_error(std::string(context) + ": non-finite entries");
}

double DenseMatrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double DenseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw shape_error("operator+=: " + shape_string(*this) + " vs " + shape_string(o));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw shape_error("operator-=: " + shape_string(*this) + " vs " + shape_string(o));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

std::string shape_string(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw shape_error("matmul: " + shape_string(a) + " x " + shape_string(b));
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows())
        throw shape_error("matmul_at_b: " + shape_string(a) + " vs " + shape_string(b));
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t m = 0; m < a.rows(); ++m) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ami = a(m, i);
            if (ami == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += ami * b(m, j);
        }
    }
    return c;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols())
        throw shape_error("matmul_a_bt: " + shape_string(a) + " vs " + shape_string(b));
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    }
    return c;
}

}  // namespace bico
