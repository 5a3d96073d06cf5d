#include "epk/matrix.hpp"

#include "epk/error.hpp"
#include "epk/kernels.hpp"

#include <cmath>
#include <string>

namespace epk {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ArgumentError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : Matrix(rows, cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw ArgumentError("Matrix: non-finite fill value");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw ArgumentError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    if (!all_finite(data_)) throw ArgumentError("Matrix: non-finite entry");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ArgumentError("Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> values) {
    if (values.size() != rows_) throw ArgumentError("Matrix::set_column: length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "Matrix::operator+=");
    kernels::axpy(1.0, other.data_, data_);
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "Matrix::operator-=");
    kernels::axpy(-1.0, other.data_, data_);
    return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ArgumentError("multiply: inner dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik != 0.0) kernels::axpy(aik, b.row(k), dst);
        }
    }
    return out;
}

Matrix multiply_transposed_left(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ArgumentError("multiply_transposed_left: row mismatch");
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki != 0.0) kernels::axpy(aki, brow, out.row(i));
        }
    }
    return out;
}

Matrix multiply_transposed_right(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ArgumentError("multiply_transposed_right: column mismatch");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = kernels::dot(a.row(i), b.row(j));
    return out;
}

std::vector<double> multiply(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw ArgumentError("multiply: vector length mismatch");
    std::vector<double> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = kernels::dot(a.row(i), x);
    return y;
}

std::vector<double> multiply_transposed(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw ArgumentError("multiply_transposed: vector length mismatch");
    std::vector<double> y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        if (x[i] != 0.0) kernels::axpy(x[i], a.row(i), y);
    return y;
}

double frobenius_norm(const Matrix& m) noexcept { return std::sqrt(kernels::sum_squares(m.values())); }

double max_abs(const Matrix& m) noexcept { return kernels::max_abs(m.values()); }

double nuclear_norm_of(std::span<const double> singular_values) noexcept {
    double s = 0.0;
    for (double v : singular_values) s += v;
    return s;
}

bool all_finite(std::span<const double> values) noexcept {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

double relative_error(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "relative_error");
    const double denom = frobenius_norm(b);
    const double diff = frobenius_norm(a - b);
    return denom > 0.0 ? diff / denom : diff;
}

} // namespace epk
