#include "epk/numkit.hpp"

#include "epk/error.hpp"
#include "epk/kernels.hpp"
#include "epk/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace epk {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
    Eigen::Map<RowMajor>(m.values().data(), e.rows(), e.cols()) = e;
    return m;
}

} // namespace

Matrix SvdFactors::reconstruct() const {
    Matrix scaled = left;
    for (std::size_t r = 0; r < scaled.rows(); ++r)
        for (std::size_t k = 0; k < rank(); ++k) scaled(r, k) *= singular_values[k];
    return multiply_transposed_right(scaled, right);
}

SvdFactors SvdFactors::truncated(std::size_t k) const {
    k = std::min(k, rank());
    SvdFactors out;
    out.left = Matrix(left.rows(), k);
    out.right = Matrix(right.rows(), k);
    for (std::size_t r = 0; r < left.rows(); ++r)
        for (std::size_t c = 0; c < k; ++c) out.left(r, c) = left(r, c);
    for (std::size_t r = 0; r < right.rows(); ++r)
        for (std::size_t c = 0; c < k; ++c) out.right(r, c) = right(r, c);
    out.singular_values.assign(singular_values.begin(), singular_values.begin() + static_cast<long>(k));
    return out;
}

SvdFactors svd(const Matrix& m) {
    if (m.empty()) throw ArgumentError("svd: empty matrix");
    if (!all_finite(m.values())) throw ArgumentError("svd: non-finite entry");

    const auto rows = static_cast<Eigen::Index>(m.rows());
    const auto cols = static_cast<Eigen::Index>(m.cols());
    const Eigen::Map<const RowMajor> view(m.values().data(), rows, cols);
    Eigen::BDCSVD<Eigen::MatrixXd> solver(view, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("svd: no convergence for " + std::to_string(m.rows()) + "x" +
                               std::to_string(m.cols()) + " matrix");

    SvdFactors f;
    f.left = from_eigen(solver.matrixU());
    f.right = from_eigen(solver.matrixV());
    const auto& s = solver.singularValues();
    f.singular_values.assign(s.data(), s.data() + s.size());
    return f;
}

Matrix soft_threshold(const Matrix& m, double tau) {
    if (!(tau >= 0.0)) throw ArgumentError("soft_threshold: tau must be non-negative");
    Matrix out(m.rows(), m.cols());
    kernels::soft_threshold(m.values(), out.values(), tau);
    return out;
}

SvtResult singular_value_threshold(const Matrix& m, double tau) {
    if (!(tau >= 0.0)) throw ArgumentError("singular_value_threshold: tau must be non-negative");
    SvdFactors f = svd(m);
    // Singular values at round-off level are not directions of m; counting
    // them would make the rank of an exactly low-rank input depend on noise.
    const double floor = f.rank() == 0 ? 0.0
                                       : f.singular_values[0] * std::numeric_limits<double>::epsilon() *
                                             static_cast<double>(std::max(m.rows(), m.cols()));
    const double cut = std::max(tau, floor);
    std::size_t rank = 0;
    while (rank < f.rank() && f.singular_values[rank] > cut) ++rank;

    SvtResult out;
    out.rank = rank;
    out.factors = f.truncated(rank);
    for (double& s : out.factors.singular_values) s -= tau;
    out.value = rank == 0 ? Matrix(m.rows(), m.cols()) : out.factors.reconstruct();
    return out;
}

double spectral_norm_estimate(const Matrix& m, double tol) {
    if (!(tol > 0.0)) throw ArgumentError("spectral_norm_estimate: tol must be positive");
    if (m.empty() || max_abs(m) == 0.0) throw ArgumentError("spectral_norm_estimate: zero matrix");

    // Column and row norms are lower bounds of σ₁ and never exceed ‖M‖_F.
    double lower = 0.0;
    std::vector<double> colsq(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        lower = std::max(lower, std::sqrt(kernels::sum_squares(row)));
        for (std::size_t c = 0; c < m.cols(); ++c) colsq[c] += row[c] * row[c];
    }
    for (double c : colsq) lower = std::max(lower, std::sqrt(c));

    Rng rng(0x5eed5eedULL);
    std::vector<double> v(m.cols());
    for (double& x : v) x = rng.normal();

    double estimate = 0.0;
    double prev_change = 0.0;
    constexpr int kMaxIterations = 20000;
    for (int it = 0; it < kMaxIterations; ++it) {
        const double vn = std::sqrt(kernels::sum_squares(v));
        if (vn == 0.0) break;
        for (double& x : v) x /= vn;
        const std::vector<double> mv = multiply(m, v);
        const double next = std::sqrt(kernels::sum_squares(mv));
        v = multiply_transposed(m, mv);

        const double change = std::fabs(next - estimate);
        estimate = next;
        if (it > 1 && change <= tol * estimate) {
            // Geometric tail estimate of the remaining error.
            const double q = prev_change > 0.0 ? std::min(change / prev_change, 0.999999) : 0.0;
            if (change * q / (1.0 - q) <= 0.5 * tol * estimate) break;
        }
        prev_change = change;
    }
    return std::max(estimate, lower);
}

} // namespace epk
