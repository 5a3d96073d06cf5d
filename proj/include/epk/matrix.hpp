#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace epk {

/// Dense, row-major, real matrix. Entries are finite whenever the matrix is
/// built from external data; arithmetic helpers keep that property for finite
/// inputs.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, double fill);
    /// Throws ArgumentError on a size mismatch or a non-finite entry.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    std::vector<double> column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const double> values);

    Matrix transposed() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s) noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// a * b
Matrix multiply(const Matrix& a, const Matrix& b);
/// aᵀ * b
Matrix multiply_transposed_left(const Matrix& a, const Matrix& b);
/// a * bᵀ
Matrix multiply_transposed_right(const Matrix& a, const Matrix& b);

std::vector<double> multiply(const Matrix& a, std::span<const double> x);
std::vector<double> multiply_transposed(const Matrix& a, std::span<const double> x);

double frobenius_norm(const Matrix& m) noexcept;
double max_abs(const Matrix& m) noexcept;
double nuclear_norm_of(std::span<const double> singular_values) noexcept;
bool all_finite(std::span<const double> values) noexcept;

/// ‖a − b‖_F / ‖b‖_F, or ‖a‖_F when b is zero.
double relative_error(const Matrix& a, const Matrix& b);

} // namespace epk
