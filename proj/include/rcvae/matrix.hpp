#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rcvae/errors.hpp"

namespace rcvae {

// Dense row-major matrix of 64-bit floats.
//
// Batch convention used across the code base: columns are batch items,
// rows are feature dimensions. A "vector" is a one-column matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix column(const std::vector<double>& values) {
        Matrix m(values.size(), 1);
        m.data = values;
        return m;
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return rows * cols; }
    bool empty() const { return size() == 0; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    std::vector<double> col_vector(std::size_t c) const;
};

std::string shape_str(const Matrix& m);

// Throws NumericError naming `context` if any entry is NaN or Inf.
void ensure_finite(const Matrix& m, const std::string& context);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// a + col broadcast over every column of a; col must be a.rows x 1.
Matrix add_col_broadcast(const Matrix& a, const Matrix& col);

// Sum over columns -> rows x 1.
Matrix row_sum(const Matrix& a);

// Stack top over bottom (column counts must match).
Matrix vconcat(const Matrix& top, const Matrix& bottom);

// Inverse of vconcat.
void split_rows(const Matrix& m, std::size_t top_rows, Matrix* top, Matrix* bottom);

}  // namespace rcvae
