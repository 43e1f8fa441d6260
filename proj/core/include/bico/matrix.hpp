#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "bico/error.hpp"

namespace bico {

/// Dense row-major real matrix. The universal numeric carrier for
/// activations, gradients, weights and alignment maps.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    DenseMatrix transposed() const;
    DenseMatrix row(std::size_t i) const;

    bool all_finite() const;
    void require_finite(const char* context) const;

    double frobenius_norm() const;
    double max_abs() const;

    DenseMatrix& operator+=(const DenseMatrix& o);
    DenseMatrix& operator-=(const DenseMatrix& o);
    DenseMatrix& operator*=(double s);
    friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
    friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
    friend DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
    friend DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }
    bool operator==(const DenseMatrix& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// a^T * b without materializing the transpose.
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b);

/// a * b^T without materializing the transpose.
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b);

std::string shape_string(const DenseMatrix& m);

}  // namespace bico
