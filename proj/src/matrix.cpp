#include "rcvae/matrix.hpp"

#include <cmath>

namespace rcvae {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) +
                             " vs " + shape_str(b));
    }
}

}  // namespace

std::vector<double> Matrix::col_vector(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
    return out;
}

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

void ensure_finite(const Matrix& m, const std::string& context) {
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        if (!std::isfinite(m.data[i])) {
            throw NumericError(context + ": non-finite value at flat index " +
                               std::to_string(i) + " of " + shape_str(m));
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: inner dims differ, " + shape_str(a) + " * " +
                             shape_str(b));
    }
    Matrix c(a.rows, b.cols, 0.0);
    const std::size_t m = a.rows, k = a.cols, n = b.cols;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.data[i * k];
        double* crow = &c.data[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &b.data[p * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) t.at(c, r) = m.at(r, c);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.data) v *= s;
    return c;
}

Matrix add_col_broadcast(const Matrix& a, const Matrix& col) {
    if (col.cols != 1 || col.rows != a.rows) {
        throw DimensionError("add_col_broadcast: column is " + shape_str(col) +
                             ", target " + shape_str(a));
    }
    Matrix c = a;
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double v = col.data[r];
        double* crow = &c.data[r * a.cols];
        for (std::size_t j = 0; j < a.cols; ++j) crow[j] += v;
    }
    return c;
}

Matrix row_sum(const Matrix& a) {
    Matrix s(a.rows, 1, 0.0);
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* arow = &a.data[r * a.cols];
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) acc += arow[j];
        s.data[r] = acc;
    }
    return s;
}

Matrix vconcat(const Matrix& top, const Matrix& bottom) {
    if (top.cols != bottom.cols) {
        throw DimensionError("vconcat: column counts differ, " + shape_str(top) +
                             " over " + shape_str(bottom));
    }
    Matrix c(top.rows + bottom.rows, top.cols);
    for (std::size_t r = 0; r < top.rows; ++r)
        for (std::size_t j = 0; j < top.cols; ++j) c.at(r, j) = top.at(r, j);
    for (std::size_t r = 0; r < bottom.rows; ++r)
        for (std::size_t j = 0; j < bottom.cols; ++j) c.at(top.rows + r, j) = bottom.at(r, j);
    return c;
}

void split_rows(const Matrix& m, std::size_t top_rows, Matrix* top, Matrix* bottom) {
    if (top_rows > m.rows) {
        throw DimensionError("split_rows: asked for " + std::to_string(top_rows) +
                             " rows of " + shape_str(m));
    }
    if (top) {
        *top = Matrix(top_rows, m.cols);
        for (std::size_t r = 0; r < top_rows; ++r)
            for (std::size_t j = 0; j < m.cols; ++j) top->at(r, j) = m.at(r, j);
    }
    if (bottom) {
        *bottom = Matrix(m.rows - top_rows, m.cols);
        for (std::size_t r = top_rows; r < m.rows; ++r)
            for (std::size_t j = 0; j < m.cols; ++j) bottom->at(r - top_rows, j) = m.at(r, j);
    }
}

}  // namespace rcvae
