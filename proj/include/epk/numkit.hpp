#pragma once

#include "epk/matrix.hpp"

#include <cstddef>
#include <vector>

namespace epk {

/// Thin SVD: m ≈ left · diag(singular_values) · rightᵀ, with r = min(D, T)
/// unless truncated by a caller.
struct SvdFactors {
    Matrix left;                          // D×r, orthonormal columns
    std::vector<double> singular_values;  // non-increasing, ≥ 0
    Matrix right;                         // T×r, orthonormal columns

    std::size_t rank() const noexcept { return singular_values.size(); }
    Matrix reconstruct() const;
    /// Keep the leading k factors.
    SvdFactors truncated(std::size_t k) const;
};

/// Throws ArgumentError on non-finite input and ConvergenceError (naming the
/// dimensions) if the factorization does not converge.
SvdFactors svd(const Matrix& m);

/// Entrywise sign(x)·max(|x| − tau, 0). tau < 0 is an ArgumentError.
Matrix soft_threshold(const Matrix& m, double tau);

struct SvtResult {
    Matrix value;
    std::size_t rank = 0;
    /// Factors of `value`: the σᵢ > tau directions with shrunk singular values.
    SvdFactors factors;
};

/// Proximal operator of tau·‖·‖_*: shrink every singular value by tau.
SvtResult singular_value_threshold(const Matrix& m, double tau);

/// Largest singular value by power iteration on MᵀM, accurate to relative
/// tolerance `tol`. The zero matrix is an ArgumentError.
double spectral_norm_estimate(const Matrix& m, double tol = 1e-8);

} // namespace epk
