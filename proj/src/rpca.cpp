#include "epk/rpca.hpp"

#include "epk/error.hpp"
#include "epk/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace epk::rpca {

void RpcaConfig::validate() const {
    if (lambda && !(*lambda > 0.0)) throw ArgumentError("rpca: lambda must be positive");
    if (!(tolerance > 0.0 && tolerance < 1.0)) throw ArgumentError("rpca: tolerance must lie in (0, 1)");
    if (max_iterations == 0) throw ArgumentError("rpca: max_iterations must be positive");
    if (!(penalty_growth > 1.0)) throw ArgumentError("rpca: penalty_growth must exceed 1");
    if (penalty_initial && !(*penalty_initial > 0.0)) throw ArgumentError("rpca: penalty_initial must be positive");
    if (penalty_cap && !(*penalty_cap > 0.0)) throw ArgumentError("rpca: penalty_cap must be positive");
}

double default_lambda(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw ArgumentError("default_lambda: dimensions must be positive");
    return 1.0 / std::sqrt(static_cast<double>(std::max(rows, cols)));
}

RpcaResult decompose(const Matrix& x, const RpcaConfig& cfg) {
    cfg.validate();
    if (x.empty()) throw ArgumentError("rpca::decompose: empty input");
    if (!all_finite(x.values())) throw ArgumentError("rpca::decompose: non-finite input");
    const double x_norm = frobenius_norm(x);
    if (x_norm == 0.0) throw ArgumentError("rpca::decompose: zero input");

    const double lambda = cfg.lambda.value_or(default_lambda(x.rows(), x.cols()));
    const double spectral = spectral_norm_estimate(x, 1e-8);
    double rho = cfg.penalty_initial.value_or(1.25 / spectral);
    const double rho_cap = cfg.penalty_cap.value_or(1e7 * rho);

    // Dual start scaled so that it is feasible for the dual norm ball.
    Matrix y = x * (1.0 / std::max(spectral, max_abs(x) / lambda));
    Matrix s(x.rows(), x.cols());

    RpcaResult res;
    res.lambda = lambda;
    SvtResult svt;
    Matrix work(x.rows(), x.cols());
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        const double inv_rho = 1.0 / rho;

        // U ← SVT_{1/ρ}(X − S + Y/ρ)
        work = x;
        work -= s;
        kernels::axpy(inv_rho, y.values(), work.values());
        svt = singular_value_threshold(work, inv_rho);

        // S ← soft(X − U + Y/ρ, λ/ρ)
        work = x;
        work -= svt.value;
        kernels::axpy(inv_rho, y.values(), work.values());
        kernels::soft_threshold(work.values(), s.values(), lambda * inv_rho);

        // Y ← Y + ρ(X − U − S)
        work = x;
        work -= svt.value;
        work -= s;
        kernels::axpy(rho, work.values(), y.values());

        rho = std::min(rho * cfg.penalty_growth, rho_cap);

        res.iterations = it + 1;
        res.rank_history.push_back(svt.rank);
        res.final_residual = frobenius_norm(work) / x_norm;
        if (res.final_residual <= cfg.tolerance) {
            res.converged = true;
            break;
        }
    }

    res.low_rank = std::move(svt.value);
    res.sparse = std::move(s);
    res.singular_values = svt.factors.singular_values;
    res.basis = std::move(svt.factors);
    return res;
}

FrameProjection project_frame(const SvdFactors& basis, std::span<const double> column, double lambda) {
    const std::size_t d = basis.left.rows();
    if (column.size() != d)
        throw ArgumentError("project_frame: column length " + std::to_string(column.size()) +
                            " does not match basis dimension " + std::to_string(d));
    if (!(lambda >= 0.0)) throw ArgumentError("project_frame: lambda must be non-negative");

    const std::size_t k = basis.left.cols();
    const auto project = [&](std::span<const double> v) {
        std::vector<double> coeff = multiply_transposed(basis.left, v);
        return multiply(basis.left, coeff);
    };
    if (k == 0) {
        // Nothing is typical: everything above λ is an outlier.
        FrameProjection out;
        out.outlier.resize(d);
        kernels::soft_threshold(column, out.outlier, lambda);
        out.typical.assign(column.begin(), column.end());
        kernels::axpy(-1.0, out.outlier, out.typical);
        out.iterations = 1;
        return out;
    }

    constexpr std::size_t kMaxIterations = 100;
    constexpr double kChangeTol = 1e-8;

    FrameProjection out;
    out.outlier.assign(d, 0.0);
    std::vector<double> residual(d);
    std::vector<double> next(d);
    for (std::size_t it = 0; it < kMaxIterations; ++it) {
        // residual = c − P(c − o)
        for (std::size_t i = 0; i < d; ++i) residual[i] = column[i] - out.outlier[i];
        const std::vector<double> proj = project(residual);
        for (std::size_t i = 0; i < d; ++i) residual[i] = column[i] - proj[i];
        kernels::soft_threshold(residual, next, lambda);

        double change = 0.0;
        for (std::size_t i = 0; i < d; ++i) change = std::max(change, std::fabs(next[i] - out.outlier[i]));
        out.outlier.swap(next);
        out.iterations = it + 1;
        if (change <= kChangeTol) break;
    }
    out.typical.assign(column.begin(), column.end());
    kernels::axpy(-1.0, out.outlier, out.typical);
    return out;
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Mask outlier_mask(const Matrix& sparse, double threshold) {
    if (!(threshold >= 0.0)) throw ArgumentError("outlier_mask: threshold must be non-negative");
    Mask m{sparse.rows(), sparse.cols(), std::vector<std::uint8_t>(sparse.size(), 0)};
    const auto v = sparse.values();
    for (std::size_t i = 0; i < v.size(); ++i) m.bits[i] = std::fabs(v[i]) > threshold ? 1 : 0;
    return m;
}

std::vector<double> column_energy(const Matrix& sparse) {
    std::vector<double> e(sparse.cols(), 0.0);
    for (std::size_t r = 0; r < sparse.rows(); ++r) {
        const auto row = sparse.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) e[c] += row[c] * row[c];
    }
    return e;
}

} // namespace epk::rpca
