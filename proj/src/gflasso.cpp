#include "epk/gflasso.hpp"

#include "epk/error.hpp"
#include "epk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace epk::gfl {

namespace {

std::vector<double> difference_coefficients(std::size_t p) {
    // c_k = (−1)^{p−k} C(p, k)
    std::vector<double> c(p + 1);
    double binom = 1.0;
    for (std::size_t k = 0; k <= p; ++k) {
        c[k] = ((p - k) % 2 == 0 ? 1.0 : -1.0) * binom;
        binom = binom * static_cast<double>(p - k) / static_cast<double>(k + 1);
    }
    return c;
}

/// Cholesky factor of a symmetric positive definite band matrix, lower band
/// stored as band[i][k] = L(i, i − k) for k = 0..p.
class BandCholesky {
public:
    BandCholesky(std::size_t n, std::size_t p) : n_(n), p_(p), band_(n * (p + 1), 0.0) {}

    double& entry(std::size_t i, std::size_t k) noexcept { return band_[i * (p_ + 1) + k]; }
    double entry(std::size_t i, std::size_t k) const noexcept { return band_[i * (p_ + 1) + k]; }

    /// Factor in place; the band must hold A's lower band. False if not PD.
    bool factor() noexcept {
        double scale = 0.0;
        for (std::size_t i = 0; i < n_; ++i) scale = std::max(scale, entry(i, 0));
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t jlo = i >= p_ ? i - p_ : 0;
            for (std::size_t j = jlo; j <= i; ++j) {
                double s = entry(i, i - j);
                const std::size_t klo = std::max(jlo, j >= p_ ? j - p_ : 0);
                for (std::size_t k = klo; k < j; ++k) s -= entry(i, i - k) * entry(j, j - k);
                if (i == j) {
                    if (!(s > 1e-13 * scale)) return false;
                    entry(i, 0) = std::sqrt(s);
                } else {
                    entry(i, i - j) = s / entry(j, 0);
                }
            }
        }
        return true;
    }

    void solve(std::span<double> b) const noexcept {
        for (std::size_t i = 0; i < n_; ++i) {
            double s = b[i];
            const std::size_t klo = i >= p_ ? i - p_ : 0;
            for (std::size_t k = klo; k < i; ++k) s -= entry(i, i - k) * b[k];
            b[i] = s / entry(i, 0);
        }
        for (std::size_t ii = n_; ii-- > 0;) {
            double s = b[ii];
            const std::size_t khi = std::min(n_ - 1, ii + p_);
            for (std::size_t k = ii + 1; k <= khi; ++k) s -= entry(k, k - ii) * b[k];
            b[ii] = s / entry(ii, 0);
        }
    }

private:
    std::size_t n_;
    std::size_t p_;
    std::vector<double> band_;
};

void check_inputs(const Matrix& x, const Matrix& w, const GflConfig& cfg, const char* who) {
    if (x.empty()) throw ArgumentError(std::string(who) + ": empty input");
    if (x.rows() != w.rows() || x.cols() != w.cols())
        throw ArgumentError(std::string(who) + ": X and W shapes differ");
    cfg.validate(x.cols());
    for (std::size_t d = 0; d < w.rows(); ++d) {
        bool any = false;
        for (double v : w.row(d)) {
            if (!(v >= 0.0)) throw ArgumentError(std::string(who) + ": negative weight in row " + std::to_string(d));
            any = any || v > 0.0;
        }
        if (!any) throw ArgumentError(std::string(who) + ": all-zero weight row " + std::to_string(d));
    }
}

/// (diag(w²) + ρ·QQᵀ) for one row, factored.
BandCholesky factor_row(std::span<const double> w, const std::vector<double>& coeff, double rho, std::size_t row) {
    const std::size_t n = w.size();
    const std::size_t p = coeff.size() - 1;
    BandCholesky chol(n, p);
    for (std::size_t i = 0; i < n; ++i) chol.entry(i, 0) = w[i] * w[i];
    for (std::size_t t = 0; t + p < n; ++t)
        for (std::size_t a = 0; a <= p; ++a)
            for (std::size_t b = 0; b <= a; ++b) chol.entry(t + a, a - b) += rho * coeff[a] * coeff[b];
    if (!chol.factor())
        throw ArgumentError("gfl::solve: weights of row " + std::to_string(row) +
                            " do not determine an order-" + std::to_string(p) + " fit");
    return chol;
}

} // namespace

void GflConfig::validate(std::size_t frames) const {
    if (!(lambda >= 0.0)) throw ArgumentError("gfl: lambda must be non-negative");
    if (order < 1 || order >= frames)
        throw ArgumentError("gfl: order " + std::to_string(order) + " must satisfy 1 <= p < T = " +
                            std::to_string(frames));
    if (!(admm_penalty > 0.0)) throw ArgumentError("gfl: admm_penalty must be positive");
    if (!(tolerance > 0.0)) throw ArgumentError("gfl: tolerance must be positive");
}

Matrix differencing_matrix(std::size_t t, std::size_t p) {
    if (p < 1 || p >= t) throw ArgumentError("differencing_matrix: need 1 <= p < t");
    const std::vector<double> c = difference_coefficients(p);
    Matrix q(t, t - p);
    for (std::size_t col = 0; col < t - p; ++col)
        for (std::size_t k = 0; k <= p; ++k) q(col + k, col) = c[k];
    return q;
}

std::vector<double> difference(std::span<const double> row, std::size_t p) {
    if (p >= row.size()) throw ArgumentError("difference: order too large");
    const std::vector<double> c = difference_coefficients(p);
    std::vector<double> out(row.size() - p, 0.0);
    for (std::size_t t = 0; t < out.size(); ++t) {
        double s = 0.0;
        for (std::size_t k = 0; k <= p; ++k) s += c[k] * row[t + k];
        out[t] = s;
    }
    return out;
}

std::vector<double> difference_adjoint(std::span<const double> z, std::size_t p) {
    const std::vector<double> c = difference_coefficients(p);
    std::vector<double> out(z.size() + p, 0.0);
    for (std::size_t t = 0; t < z.size(); ++t)
        for (std::size_t k = 0; k <= p; ++k) out[t + k] += c[k] * z[t];
    return out;
}

double objective(const Matrix& x, const Matrix& w, const Matrix& v, double lambda, std::size_t order) {
    double fit = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = w.values()[i] * (x.values()[i] - v.values()[i]);
        fit += r * r;
    }
    const std::size_t steps = v.cols() - order;
    std::vector<double> colsq(steps, 0.0);
    for (std::size_t d = 0; d < v.rows(); ++d) {
        const std::vector<double> dv = difference(v.row(d), order);
        for (std::size_t t = 0; t < steps; ++t) colsq[t] += dv[t] * dv[t];
    }
    double pen = 0.0;
    for (double s : colsq) pen += std::sqrt(s);
    return 0.5 * fit + lambda * pen;
}

GflResult solve(const Matrix& x, const Matrix& w, const GflConfig& cfg) {
    check_inputs(x, w, cfg, "gfl::solve");
    const std::size_t rows = x.rows();
    const std::size_t frames = x.cols();
    const std::size_t p = cfg.order;
    const std::size_t steps = frames - p;
    const std::vector<double> coeff = difference_coefficients(p);

    double rho = cfg.admm_penalty;
    std::vector<BandCholesky> factors;
    const auto refactor = [&] {
        factors.clear();
        factors.reserve(rows);
        for (std::size_t d = 0; d < rows; ++d) factors.push_back(factor_row(w.row(d), coeff, rho, d));
    };
    refactor();

    // w²∘x, fixed across iterations
    Matrix wx(rows, frames);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double wi = w.values()[i];
        wx.values()[i] = wi * wi * x.values()[i];
    }

    // Warm start from the data, but never from entries with zero weight: they
    // must not influence the result, and the optimum may not be unique there.
    Matrix v = x;
    for (std::size_t d = 0; d < rows; ++d) {
        double sw = 0.0, swx = 0.0;
        for (std::size_t t = 0; t < frames; ++t) {
            sw += w(d, t);
            swx += w(d, t) * x(d, t);
        }
        for (std::size_t t = 0; t < frames; ++t)
            if (w(d, t) == 0.0) v(d, t) = swx / sw;
    }
    Matrix z(rows, steps);
    Matrix y(rows, steps);
    Matrix dv(rows, steps);
    for (std::size_t d = 0; d < rows; ++d) {
        const auto diff = difference(v.row(d), p);
        std::copy(diff.begin(), diff.end(), dv.row(d).begin());
    }
    z = dv;

    GflResult res;
    std::vector<double> rhs(frames);
    std::vector<double> colnorm(steps);
    std::vector<double> u(steps);
    const double sqrt_pri = std::sqrt(static_cast<double>(rows * steps));
    const double sqrt_dual = std::sqrt(static_cast<double>(rows * frames));

    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        // V-update: one banded solve per row.
        for (std::size_t d = 0; d < rows; ++d) {
            for (std::size_t t = 0; t < steps; ++t) u[t] = rho * z(d, t) - y(d, t);
            const std::vector<double> qu = difference_adjoint(u, p);
            const auto wxr = wx.row(d);
            for (std::size_t t = 0; t < frames; ++t) rhs[t] = wxr[t] + qu[t];
            factors[d].solve(rhs);
            std::copy(rhs.begin(), rhs.end(), v.row(d).begin());
            const std::vector<double> diff = difference(v.row(d), p);
            std::copy(diff.begin(), diff.end(), dv.row(d).begin());
        }

        // Z-update: group soft-threshold of each column of VQ + Y/ρ.
        Matrix z_old = z;
        std::fill(colnorm.begin(), colnorm.end(), 0.0);
        for (std::size_t d = 0; d < rows; ++d)
            for (std::size_t t = 0; t < steps; ++t) {
                const double a = dv(d, t) + y(d, t) / rho;
                z(d, t) = a;
                colnorm[t] += a * a;
            }
        for (std::size_t t = 0; t < steps; ++t) {
            const double n = std::sqrt(colnorm[t]);
            colnorm[t] = n > 0.0 ? std::max(1.0 - cfg.lambda / (rho * n), 0.0) : 0.0;
        }
        for (std::size_t d = 0; d < rows; ++d)
            for (std::size_t t = 0; t < steps; ++t) z(d, t) *= colnorm[t];

        // Y-update and residuals.
        double r2 = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = dv.values()[i] - z.values()[i];
            y.values()[i] += rho * r;
            r2 += r * r;
        }
        double s2 = 0.0;
        double yq2 = 0.0;
        for (std::size_t d = 0; d < rows; ++d) {
            for (std::size_t t = 0; t < steps; ++t) u[t] = z(d, t) - z_old(d, t);
            s2 += kernels::sum_squares(difference_adjoint(u, p));
            yq2 += kernels::sum_squares(difference_adjoint(y.row(d), p));
        }
        const double primal = std::sqrt(r2);
        const double dual = rho * std::sqrt(s2);
        const double eps_pri = cfg.tolerance * (sqrt_pri + std::max(frobenius_norm(dv), frobenius_norm(z)));
        const double eps_dual = cfg.tolerance * (sqrt_dual + std::sqrt(yq2));

        res.iterations = it + 1;
        if (primal <= eps_pri && dual <= eps_dual) {
            res.converged = true;
            break;
        }
        if (cfg.adaptive_penalty && (it + 1) % 10 == 0) {
            if (primal > 10.0 * dual) {
                rho *= 2.0;
                refactor();
            } else if (dual > 10.0 * primal) {
                rho *= 0.5;
                refactor();
            }
        }
    }

    res.jump_strengths.assign(steps, 0.0);
    for (std::size_t d = 0; d < rows; ++d)
        for (std::size_t t = 0; t < steps; ++t) res.jump_strengths[t] += z(d, t) * z(d, t);
    for (double& s : res.jump_strengths) s = std::sqrt(s);
    res.objective = objective(x, w, v, cfg.lambda, p);
    res.smoothed = std::move(v);
    return res;
}

SegmentLabeling extract_change_points(std::span<const double> strengths, double threshold,
                                      std::size_t min_gap, std::size_t order) {
    if (min_gap < 1) throw ArgumentError("extract_change_points: min_gap must be >= 1");
    if (!(threshold >= 0.0)) throw ArgumentError("extract_change_points: threshold must be non-negative");

    std::vector<std::size_t> candidates;
    for (std::size_t t = 0; t < strengths.size(); ++t)
        if (strengths[t] > threshold) candidates.push_back(t);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return strengths[a] > strengths[b]; });

    SegmentLabeling out;
    for (std::size_t t : candidates) {
        const bool clear = std::all_of(out.jump_indices.begin(), out.jump_indices.end(), [&](std::size_t k) {
            return (t > k ? t - k : k - t) >= min_gap;
        });
        if (clear) out.jump_indices.push_back(t);
    }
    std::sort(out.jump_indices.begin(), out.jump_indices.end());
    for (std::size_t j : out.jump_indices) out.change_points.push_back(j + 1);
    out.group_ids = group_ids_from_change_points(out.change_points, strengths.size() + order);
    return out;
}

std::vector<std::size_t> group_ids_from_change_points(std::span<const std::size_t> change_points,
                                                      std::size_t frames) {
    std::vector<std::size_t> ids(frames, 0);
    std::size_t g = 0;
    std::size_t next = 0;
    for (std::size_t f = 0; f < frames; ++f) {
        while (next < change_points.size() && change_points[next] <= f) {
            ++g;
            ++next;
        }
        ids[f] = g;
    }
    return ids;
}

double suggest_lambda(const Matrix& x, const Matrix& w, double factor) {
    std::vector<double> diffs;
    for (std::size_t d = 0; d < x.rows(); ++d)
        for (std::size_t t = 0; t + 1 < x.cols(); ++t)
            if (w(d, t) > 0.0 && w(d, t + 1) > 0.0) diffs.push_back(std::fabs(x(d, t + 1) - x(d, t)));
    double sigma = 0.0;
    if (!diffs.empty()) {
        auto mid = diffs.begin() + static_cast<long>(diffs.size() / 2);
        std::nth_element(diffs.begin(), mid, diffs.end());
        // MAD of a difference of two iid normals, rescaled to one sample.
        sigma = 1.4826 * *mid / std::sqrt(2.0);
    }
    sigma = std::max(sigma, 1e-3);
    return factor * sigma * std::sqrt(static_cast<double>(x.rows() * x.cols()));
}

WeightedSeries normalize_and_weight(std::span<const PoseFrame> stream) {
    if (stream.empty()) throw ArgumentError("normalize_and_weight: empty pose stream");
    const std::size_t frames = stream.size();
    WeightedSeries out{Matrix(8, frames), Matrix(8, frames)};

    for (std::size_t j = 0; j < kArmJoints.size(); ++j) {
        const Joint joint = kArmJoints[j];
        bool seen = false;
        for (std::size_t f = 0; f < frames; ++f) {
            const auto& kp = stream[f][joint];
            if (kp && kp->score > 0.0) {
                seen = true;
                out.x(2 * j, f) = kp->x;
                out.x(2 * j + 1, f) = kp->y;
                out.w(2 * j, f) = kp->score;
                out.w(2 * j + 1, f) = kp->score;
            }
        }
        if (!seen)
            throw ArgumentError("normalize_and_weight: joint '" + std::string(joint_name(joint)) +
                                "' is missing from every frame");
    }

    for (std::size_t r = 0; r < 8; ++r) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t f = 0; f < frames; ++f)
            if (out.w(r, f) > 0.0) {
                sum += out.x(r, f);
                ++n;
            }
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t f = 0; f < frames; ++f)
            if (out.w(r, f) > 0.0) var += (out.x(r, f) - mean) * (out.x(r, f) - mean);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        for (std::size_t f = 0; f < frames; ++f) {
            if (out.w(r, f) > 0.0 && sd > 1e-12) {
                out.x(r, f) = (out.x(r, f) - mean) / sd;
            } else {
                out.x(r, f) = 0.0;
            }
        }
    }
    return out;
}

} // namespace epk::gfl
