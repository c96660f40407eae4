#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace marscache::core {

// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double & operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double   operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double>       row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double>       data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    // Copies the listed rows, in order, into a new matrix.
    Matrix gather_rows(std::span<const std::size_t> indices) const;
    // Writes row i of `src` into row indices[i] of this matrix.
    void   scatter_rows(std::span<const std::size_t> indices, const Matrix & src);
    // Column slice [begin, begin + count) of every row.
    Matrix columns(std::size_t begin, std::size_t count) const;
    Matrix transpose() const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix &, const Matrix &) = default;

  private:
    std::size_t         rows_ = 0;
    std::size_t         cols_ = 0;
    std::vector<double> data_;
};

// a * b
Matrix matmul(const Matrix & a, const Matrix & b);
// a * b^T
Matrix matmul_transposed(const Matrix & a, const Matrix & b);

double max_abs_diff(const Matrix & a, const Matrix & b);

}  // namespace marscache::core
