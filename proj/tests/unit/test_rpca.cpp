#include "doctest.h"

#include "epk/error.hpp"
#include "epk/rpca.hpp"
#include "epk/synth.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace epk;
using namespace epk::rpca;

TEST_CASE("default lambda") {
    CHECK(default_lambda(100, 400) == doctest::Approx(0.05));
    CHECK(default_lambda(9, 9) == doctest::Approx(1.0 / 3.0));
    CHECK(default_lambda(1, 1) == 1.0);
}

TEST_CASE("config validation") {
    RpcaConfig cfg;
    cfg.tolerance = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = {};
    cfg.penalty_growth = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = {};
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("single gross entry on a constant matrix") {
    Matrix x(6, 8, 5.0);
    x(2, 3) = 50.0;
    const auto r = decompose(x);
    REQUIRE(r.converged);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(std::abs(r.low_rank(i, j) - 5.0) <= 1e-3);
            const double want = (i == 2 && j == 3) ? 45.0 : 0.0;
            CHECK(std::abs(r.sparse(i, j) - want) <= 1e-3);
        }
    CHECK(r.singular_values.size() == 1);
}

TEST_CASE("uncorrupted rank-1 matrix") {
    Matrix x(12, 15);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 15; ++j) x(i, j) = (1.0 + 0.1 * i) * std::cos(0.3 * j + 0.2);
    const auto r = decompose(x);
    REQUIRE(r.converged);
    CHECK(relative_error(r.low_rank, x) <= 1e-5);
    CHECK(max_abs(r.sparse) <= 1e-5 * max_abs(x));
}

TEST_CASE("recovery of a planted 200x200 instance") {
    const auto b = synth::gen_lowrank_sparse(200, 200, 10, 0.05, 5.0, 7);
    const auto r = decompose(b.x);
    REQUIRE(r.converged);
    CHECK(relative_error(r.low_rank, b.low_rank) <= 1e-4);
    CHECK(relative_error(r.sparse, b.sparse) <= 1e-4);
    CHECK(r.final_residual <= 1e-7);

    const auto mask = outlier_mask(r.sparse, 0.5);
    std::size_t both = 0;
    for (std::size_t idx : b.support) both += mask.bits[idx];
    const double jaccard = static_cast<double>(both) / (mask.count() + b.support.size() - both);
    CHECK(jaccard >= 0.99);

    // Rank settles over the final iterations.
    const auto& h = r.rank_history;
    REQUIRE(h.size() >= 10);
    for (std::size_t i = h.size() - 9; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
    CHECK(h.back() <= 200);
}

TEST_CASE("scaling equivariance") {
    const auto b = synth::gen_lowrank_sparse(40, 50, 3, 0.05, 5.0, 21);
    const auto base = decompose(b.x);
    REQUIRE(base.converged);
    for (double c : {2.0, 10.0}) {
        const auto scaled = decompose(b.x * c);
        REQUIRE(scaled.converged);
        CHECK(relative_error(scaled.low_rank, base.low_rank * c) <= 10 * 1e-7);
        CHECK(relative_error(scaled.sparse, base.sparse * c) <= 10 * 1e-7);
    }
}

TEST_CASE("iteration cap returns an unconverged result") {
    const auto b = synth::gen_lowrank_sparse(30, 30, 2, 0.05, 5.0, 4);
    RpcaConfig cfg;
    cfg.max_iterations = 2;
    const auto r = decompose(b.x, cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 2);
    CHECK(r.final_residual > cfg.tolerance);
}

TEST_CASE("zero and non-finite inputs are rejected") {
    CHECK_THROWS_AS(decompose(Matrix(3, 4)), ArgumentError);
}

TEST_SUITE("project_frame") {
namespace {
SvdFactors column_basis() {
    // Orthonormal basis of span{e0 + e1, e2} in R^5.
    SvdFactors f;
    f.left = Matrix(5, 2);
    f.left(0, 0) = f.left(1, 0) = 1.0 / std::sqrt(2.0);
    f.left(2, 1) = 1.0;
    f.singular_values = {1.0, 1.0};
    f.right = Matrix::identity(2);
    return f;
}
} // namespace

TEST_CASE("column in the span") {
    const auto basis = column_basis();
    const std::vector<double> c{2, 2, -1, 0, 0};
    for (double lambda : {0.01, 1.0, 100.0}) {
        const auto p = project_frame(basis, c, lambda);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(p.outlier[i] == doctest::Approx(0.0));
            CHECK(p.typical[i] == doctest::Approx(c[i]));
        }
    }
}

TEST_CASE("orthogonal spike is isolated") {
    const auto basis = column_basis();
    const std::vector<double> c{2, 2, -1, 10, 0};
    const auto p = project_frame(basis, c, 0.01);
    // Shrinkage of the spike by λ is the only expected distortion.
    CHECK(std::abs(p.outlier[3] - 10.0) <= 0.01 + 1e-3);
    for (std::size_t i : {0, 1, 2, 4}) CHECK(std::abs(p.outlier[i]) <= 1e-3);
}

TEST_CASE("large lambda kills the outlier") {
    const auto basis = column_basis();
    const std::vector<double> c{2, 1, -1, 3, -2};
    const auto p = project_frame(basis, c, 3.0);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(p.outlier[i] == 0.0);
        CHECK(p.typical[i] == c[i]);
    }
}

TEST_CASE("dimension mismatch") {
    const std::vector<double> c{1, 2, 3};
    CHECK_THROWS_AS(project_frame(column_basis(), c, 1.0), ArgumentError);
}
}

TEST_CASE("outlier mask") {
    CHECK(outlier_mask(Matrix(3, 3), 0.5).count() == 0);
    Matrix s(3, 3);
    s(1, 2) = 45.0;
    const auto m = outlier_mask(s, 1.0);
    CHECK(m.count() == 1);
    CHECK(m(1, 2));
    CHECK_THROWS_AS(outlier_mask(s, -1.0), ArgumentError);
}

TEST_CASE("column energy") {
    Matrix s(2, 3);
    s(0, 1) = 3;
    s(1, 1) = 4;
    CHECK(column_energy(s) == std::vector<double>{0, 25, 0});
}
