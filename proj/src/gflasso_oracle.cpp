// Reference solver for the Group Fused LASSO. It works on the dual
//   min_{‖U_{·,t}‖ ≤ λ} ½ Σ (UQᵀ)²/w² − ⟨UQᵀ, X⟩,   V(U) = X − (UQᵀ)/w²,
// with accelerated projected gradient and adaptive restart, and stops on the
// duality gap. It shares no code path with the ADMM solver beyond the
// differencing helpers.
#include "epk/gflasso.hpp"

#include "epk/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace epk::gfl {

namespace {

struct DualState {
    Matrix v;        // V(U)
    double dual = 0; // dual objective g(U) (to be maximized)
};

DualState evaluate(const Matrix& x, const Matrix& w, const Matrix& u, std::size_t p) {
    DualState s{Matrix(x.rows(), x.cols()), 0.0};
    for (std::size_t d = 0; d < x.rows(); ++d) {
        const std::vector<double> uq = difference_adjoint(u.row(d), p);
        for (std::size_t t = 0; t < x.cols(); ++t) {
            const double w2 = w(d, t) * w(d, t);
            s.v(d, t) = x(d, t) - uq[t] / w2;
            s.dual += uq[t] * x(d, t) - 0.5 * uq[t] * uq[t] / w2;
        }
    }
    return s;
}

void project_columns(Matrix& u, double lambda) {
    for (std::size_t t = 0; t < u.cols(); ++t) {
        double n2 = 0.0;
        for (std::size_t d = 0; d < u.rows(); ++d) n2 += u(d, t) * u(d, t);
        const double n = std::sqrt(n2);
        if (n > lambda) {
            const double s = lambda / n;
            for (std::size_t d = 0; d < u.rows(); ++d) u(d, t) *= s;
        }
    }
}

GflResult finish(const Matrix& x, const Matrix& w, Matrix v, double lambda, std::size_t p, bool converged,
                 std::size_t iterations) {
    GflResult r;
    r.jump_strengths.assign(x.cols() - p, 0.0);
    for (std::size_t d = 0; d < v.rows(); ++d) {
        const std::vector<double> dv = difference(v.row(d), p);
        for (std::size_t t = 0; t < dv.size(); ++t) r.jump_strengths[t] += dv[t] * dv[t];
    }
    for (double& s : r.jump_strengths) s = std::sqrt(s);
    r.objective = objective(x, w, v, lambda, p);
    r.smoothed = std::move(v);
    r.converged = converged;
    r.iterations = iterations;
    return r;
}

} // namespace

GflResult oracle_solve(const Matrix& x, const Matrix& w, const GflConfig& cfg) {
    if (x.rows() * x.cols() > 200)
        throw ArgumentError("gfl::oracle_solve: instance too large (D*T = " +
                            std::to_string(x.rows() * x.cols()) + " > 200)");
    if (x.empty() || x.rows() != w.rows() || x.cols() != w.cols())
        throw ArgumentError("gfl::oracle_solve: X and W shapes differ");
    cfg.validate(x.cols());
    const std::size_t p = cfg.order;

    if (cfg.lambda == 0.0) return finish(x, w, x, 0.0, p, true, 0);

    double wmin = std::numeric_limits<double>::infinity();
    for (double v : w.values()) wmin = std::min(wmin, v);
    if (!(wmin > 0.0)) throw ArgumentError("gfl::oracle_solve: weights must be strictly positive when lambda > 0");

    // ‖Q‖² ≤ 4^p bounds the Lipschitz constant together with 1/min w².
    const double lipschitz = std::pow(4.0, static_cast<double>(p)) / (wmin * wmin);
    const double step = 1.0 / lipschitz;

    const std::size_t steps = x.cols() - p;
    Matrix u(x.rows(), steps);
    Matrix u_prev = u;
    Matrix look = u;
    double momentum = 1.0;

    constexpr std::size_t kMaxIterations = 1'000'000;
    double best_primal = std::numeric_limits<double>::infinity();
    Matrix best_v = x;
    double prev_h = std::numeric_limits<double>::infinity();

    for (std::size_t it = 0; it < kMaxIterations; ++it) {
        // Gradient of h = −g at the look-ahead point is −V(look)·Q.
        const DualState at_look = evaluate(x, w, look, p);
        Matrix next = look;
        for (std::size_t d = 0; d < x.rows(); ++d) {
            const std::vector<double> dv = difference(at_look.v.row(d), p);
            for (std::size_t t = 0; t < steps; ++t) next(d, t) += step * dv[t];
        }
        project_columns(next, cfg.lambda);

        const DualState at_next = evaluate(x, w, next, p);
        const double primal = objective(x, w, at_next.v, cfg.lambda, p);
        if (primal < best_primal) {
            best_primal = primal;
            best_v = at_next.v;
        }
        const double gap = best_primal - at_next.dual;
        if (gap <= 1e-12 * (1.0 + std::fabs(best_primal)))
            return finish(x, w, std::move(best_v), cfg.lambda, p, true, it + 1);

        // Restart the momentum whenever the dual objective stops improving.
        const double h = -at_next.dual;
        if (h > prev_h) momentum = 1.0;
        prev_h = h;

        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        const double beta = (momentum - 1.0) / next_momentum;
        momentum = next_momentum;
        u_prev = std::move(u);
        u = std::move(next);
        look = u;
        for (std::size_t i = 0; i < look.size(); ++i)
            look.values()[i] += beta * (u.values()[i] - u_prev.values()[i]);
    }
    return finish(x, w, std::move(best_v), cfg.lambda, p, false, kMaxIterations);
}

} // namespace epk::gfl
