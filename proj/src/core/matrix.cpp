#include "core/matrix.hpp"

#include "core/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace marscache::core {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) :
    rows_(rows),
    cols_(cols),
    data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        fail(ErrorKind::invalid_argument, "matrix data length " + std::to_string(data_.size()) + " does not match " +
                                              std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n_rows = rows.size();
    const std::size_t n_cols = n_rows == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(n_rows * n_cols);
    for (const auto & r : rows) {
        if (r.size() != n_cols) {
            fail(ErrorKind::invalid_argument, "ragged row list");
        }
        data.insert(data.end(), r.begin(), r.end());
    }
    return Matrix(n_rows, n_cols, std::move(data));
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) {
            fail(ErrorKind::invalid_argument, "row index out of range");
        }
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_, out.row(i).begin());
    }
    return out;
}

void Matrix::scatter_rows(std::span<const std::size_t> indices, const Matrix & src) {
    if (src.rows() != indices.size() || src.cols() != cols_) {
        fail(ErrorKind::invalid_argument, "scatter_rows shape mismatch");
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) {
            fail(ErrorKind::invalid_argument, "row index out of range");
        }
        std::copy(src.row(i).begin(), src.row(i).end(), row(indices[i]).begin());
    }
}

Matrix Matrix::columns(std::size_t begin, std::size_t count) const {
    if (begin + count > cols_) {
        fail(ErrorKind::invalid_argument, "column slice out of range");
    }
    Matrix out(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r) {
        std::copy_n(row(r).begin() + static_cast<std::ptrdiff_t>(begin), count, out.row(r).begin());
    }
    return out;
}

Matrix Matrix::transpose() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            out(c, r) = (*this)(r, c);
        }
    }
    return out;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix & a, const Matrix & b) {
    if (a.cols() != b.rows()) {
        fail(ErrorKind::invalid_argument, "matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                                              std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t width = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double *       dst = out.row(i).data();
        const double * src = a.row(i).data();
        for (std::size_t k = 0; k < inner; ++k) {
            const double   s    = src[k];
            const double * brow = b.row(k).data();
            for (std::size_t j = 0; j < width; ++j) {
                dst[j] += s * brow[j];
            }
        }
    }
    return out;
}

Matrix matmul_transposed(const Matrix & a, const Matrix & b) {
    if (a.cols() != b.cols()) {
        fail(ErrorKind::invalid_argument, "matmul_transposed shape mismatch");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double * x = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double * y   = b.row(j).data();
            double         acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += x[k] * y[k];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

double max_abs_diff(const Matrix & a, const Matrix & b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorKind::invalid_argument, "max_abs_diff shape mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

}  // namespace marscache::core
