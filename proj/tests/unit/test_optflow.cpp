#include "doctest.h"

#include "epk/error.hpp"
#include "epk/optflow.hpp"
#include "epk/synth.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace epk;
using namespace epk::flow;

namespace {

GrayFrame random_frame(std::size_t w, std::size_t h, std::uint64_t seed) {
    Rng rng(seed);
    GrayFrame f(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) f.set(x, y, rng.uniform());
    return f;
}

// Every (frame, box) appears in exactly one group, and frames increase
// strictly within each group.
void check_partition(const std::vector<BoxTrackGroup>& groups, const std::vector<std::vector<Box>>& boxes) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::size_t total = 0;
    for (const auto& b : boxes) total += b.size();
    for (const auto& g : groups) {
        REQUIRE_FALSE(g.members.empty());
        for (std::size_t i = 0; i < g.members.size(); ++i) {
            const auto& m = g.members[i];
            REQUIRE(m.frame < boxes.size());
            REQUIRE(m.box_index < boxes[m.frame].size());
            CHECK(m.box == boxes[m.frame][m.box_index]);
            CHECK(seen.insert({m.frame, m.box_index}).second);
            if (i > 0) CHECK(g.members[i - 1].frame < m.frame);
        }
    }
    CHECK(seen.size() == total);
}

std::map<std::pair<std::size_t, std::size_t>, std::size_t> group_of(const std::vector<BoxTrackGroup>& groups) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> out;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (const auto& m : groups[g].members) out[{m.frame, m.box_index}] = g;
    return out;
}

} // namespace

TEST_SUITE("image_gradients") {
TEST_CASE("constant frame") {
    const auto g = image_gradients(GrayFrame(10, 7, 0.3));
    for (double v : g.ix.values()) CHECK(v == 0.0);
    for (double v : g.iy.values()) CHECK(v == 0.0);
}

TEST_CASE("horizontal ramp") {
    const std::size_t w = 16, h = 9;
    GrayFrame f(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) f.set(x, y, static_cast<double>(x) / w);
    const auto g = image_gradients(f);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            CHECK(g.ix.at(x, y) == doctest::Approx(1.0 / w).epsilon(1e-12));
            CHECK(g.iy.at(x, y) == 0.0);
        }
}

TEST_CASE("random frame against an independent stencil") {
    const std::size_t w = 13, h = 11;
    const auto f = random_frame(w, h, 3);
    const auto g = image_gradients(f);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double ex, ey;
            if (x == 0) ex = f.at(1, y) - f.at(0, y);
            else if (x == w - 1) ex = f.at(w - 1, y) - f.at(w - 2, y);
            else ex = (f.at(x + 1, y) - f.at(x - 1, y)) / 2;
            if (y == 0) ey = f.at(x, 1) - f.at(x, 0);
            else if (y == h - 1) ey = f.at(x, h - 1) - f.at(x, h - 2);
            else ey = (f.at(x, y + 1) - f.at(x, y - 1)) / 2;
            CHECK(g.ix.at(x, y) == ex);
            CHECK(g.iy.at(x, y) == ey);
        }
}

TEST_CASE("degenerate size") {
    CHECK_THROWS_AS(image_gradients(GrayFrame(2, 5)), ArgumentError);
}
}

TEST_SUITE("good_features") {
TEST_CASE("flat frame") {
    CHECK(good_features(GrayFrame(20, 20, 0.4), 10, 0.01).empty());
}

TEST_CASE("single bright pixel") {
    GrayFrame f(15, 15, 0.0);
    f.set(7, 7, 1.0);
    const auto pts = good_features(f, 10, 0.01);
    REQUIRE_FALSE(pts.empty());
    for (const auto& p : pts) CHECK(std::hypot(p.x - 7, p.y - 7) <= 2.0);
}

TEST_CASE("checkerboard corners") {
    const std::size_t cell = 8, size = 64;
    GrayFrame f(size, size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) f.set(x, y, ((x / cell + y / cell) % 2) ? 0.9 : 0.1);
    const auto pts = good_features(f, 500, 0.01);
    const std::size_t interior = (size / cell - 1) * (size / cell - 1);
    CHECK(pts.size() * 2 >= interior);
    // Every reported point sits near a lattice corner.
    for (const auto& p : pts) {
        const double cx = std::round(p.x / cell) * cell, cy = std::round(p.y / cell) * cell;
        CHECK(std::hypot(p.x - cx, p.y - cy) <= 2.0);
    }
}

TEST_CASE("count cap and spacing") {
    const auto f = random_frame(40, 40, 9);
    FlowConfig cfg;
    const auto pts = good_features(f, 12, 0.01, cfg);
    CHECK(pts.size() <= 12);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            CHECK(std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) >= cfg.feature_min_distance);
    CHECK_THROWS_AS(good_features(f, 0, 0.01), ArgumentError);
    CHECK_THROWS_AS(good_features(f, 3, 0.0), ArgumentError);
}
}

TEST_SUITE("lk_flow") {
TEST_CASE("zero motion is exact") {
    const auto b = synth::gen_shifted_pair(64, 0.0, 0.0, 2.0, 5);
    CHECK(b.first == b.second);
    const auto pts = good_features(b.first, 60, 0.01);
    REQUIRE(pts.size() > 10);
    for (const auto& v : lk_flow(b.first, b.first, pts)) {
        if (!v.valid) continue;
        CHECK(v.dx == 0.0);
        CHECK(v.dy == 0.0);
    }
}

TEST_CASE("known shifts") {
    for (auto [dx, dy] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {0.5, -0.5}, {-2.0, 1.0}}) {
        const auto b = synth::gen_shifted_pair(64, dx, dy, 2.0, 12);
        const auto pts = good_features(b.first, 80, 0.01);
        const auto flow = lk_flow(b.first, b.second, pts);
        std::size_t valid = 0, close = 0;
        for (const auto& v : flow) {
            if (!v.valid) continue;
            ++valid;
            close += std::hypot(v.dx - dx, v.dy - dy) <= 0.2 ? 1 : 0;
        }
        CAPTURE(dx);
        CAPTURE(dy);
        REQUIRE(valid > 10);
        CHECK(close >= 0.9 * valid);
    }
}

TEST_CASE("flat region is invalid") {
    const GrayFrame f(30, 30, 0.5);
    const std::vector<Point> pts{{15, 15}};
    const auto v = lk_flow(f, f, pts)[0];
    CHECK_FALSE(v.valid);
    CHECK(v.dx == 0.0);
    CHECK(v.dy == 0.0);
    CHECK(v.min_eigenvalue < FlowConfig{}.eigen_floor());
}

TEST_CASE("points too close to the border are invalid") {
    const auto b = synth::gen_shifted_pair(32, 0, 0, 2.0, 1);
    const std::vector<Point> pts{{1, 1}, {-3, 10}, {31, 16}};
    for (const auto& v : lk_flow(b.first, b.second, pts)) CHECK_FALSE(v.valid);
}

TEST_CASE("frame sizes must match") {
    const std::vector<Point> pts{{5, 5}};
    CHECK_THROWS_AS(lk_flow(GrayFrame(10, 10), GrayFrame(11, 10), pts), ArgumentError);
}
}

TEST_SUITE("box_similarity") {
TEST_CASE("identical frames and boxes") {
    const auto f = test::patch_frame(64, 48, {{{10, 10}, 1}}, 24);
    const Box b{10, 10, 34, 34};
    CHECK(box_similarity(f, f, b, b) == 1.0);
}

TEST_CASE("box far from every landing point") {
    const auto f = test::patch_frame(96, 48, {{{6, 10}, 1}}, 24);
    CHECK(box_similarity(f, f, Box{6, 10, 30, 34}, Box{60, 10, 84, 34}) == 0.0);
}

TEST_CASE("following box versus stray box") {
    const auto a = test::patch_frame(96, 64, {{{20, 20}, 4}}, 24);
    const auto b = test::patch_frame(96, 64, {{{22, 21}, 4}}, 24);
    const double follow = box_similarity(a, b, Box{20, 20, 44, 44}, Box{22, 21, 46, 45});
    const double stray = box_similarity(a, b, Box{20, 20, 44, 44}, Box{64, 30, 88, 54});
    CHECK(follow > 0.8);
    CHECK(stray < 0.2);
}

TEST_CASE("empty box") {
    const GrayFrame f(20, 20, 0.5);
    CHECK_THROWS_AS(box_similarity(f, f, Box{3, 3, 3, 9}, Box{3, 3, 9, 9}), ArgumentError);
}
}

TEST_SUITE("grouping") {
TEST_CASE("stationary patch forms one group") {
    const auto f = test::patch_frame(64, 48, {{{12, 10}, 2}}, 24);
    const std::vector<GrayFrame> frames(6, f);
    const std::vector<std::vector<Box>> boxes(6, {Box{12, 10, 36, 34}});
    const auto groups = group_boxes(frames, boxes, 0.5);
    check_partition(groups, boxes);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].members.size() == 6);
}

TEST_CASE("two interleaved patches form two pure groups") {
    const auto f = test::patch_frame(100, 40, {{{6, 8}, 2}, {{66, 8}, 3}}, 24);
    const std::vector<GrayFrame> frames(8, f);
    std::vector<std::vector<Box>> boxes;
    const Box left{6, 8, 30, 32}, right{66, 8, 90, 32};
    for (int i = 0; i < 8; ++i) boxes.push_back(i % 2 ? std::vector<Box>{right, left} : std::vector<Box>{left, right});
    const auto groups = group_boxes(frames, boxes, 0.5);
    check_partition(groups, boxes);
    REQUIRE(groups.size() == 2);
    for (const auto& g : groups)
        for (const auto& m : g.members) CHECK(m.box == g.members.front().box);
}

TEST_CASE("threshold above one keeps singletons") {
    const auto f = test::patch_frame(64, 48, {{{12, 10}, 2}}, 24);
    const std::vector<GrayFrame> frames(5, f);
    const std::vector<std::vector<Box>> boxes(5, {Box{12, 10, 36, 34}});
    const auto groups = group_boxes(frames, boxes, 1.01);
    check_partition(groups, boxes);
    CHECK(groups.size() == 5);
}

TEST_CASE("frame and box counts must agree") {
    const std::vector<GrayFrame> frames(3, GrayFrame(20, 20, 0.5));
    const std::vector<std::vector<Box>> boxes(2);
    CHECK_THROWS_AS(group_boxes(frames, boxes, 0.5), ArgumentError);
}

TEST_CASE("split then merge") {
    // The patch disappears for longer than gap_max, so tracking splits it.
    const auto on = test::patch_frame(64, 48, {{{12, 10}, 2}}, 24);
    const GrayFrame off(64, 48, 0.5);
    std::vector<GrayFrame> frames{on, on, on, off, off, off, off, on, on, on};
    std::vector<std::vector<Box>> boxes(10);
    for (std::size_t i : {0, 1, 2, 7, 8, 9}) boxes[i] = {Box{12, 10, 36, 34}};
    const auto groups = group_boxes(frames, boxes, 0.5);
    check_partition(groups, boxes);
    REQUIRE(groups.size() == 2);
    const auto merged = merge_groups(groups, frames, 0.9);
    check_partition(merged, boxes);
    CHECK(merged.size() == 1);
    CHECK(merge_groups(groups, frames, 1.01).size() == 2);
}

TEST_CASE("identical boxes on alternating frames end up in one group") {
    const auto f = test::patch_frame(64, 48, {{{12, 10}, 7}}, 24);
    const std::vector<GrayFrame> frames(8, f);
    std::vector<std::vector<Box>> boxes(8);
    for (std::size_t i = 0; i < 8; ++i) boxes[i] = {Box{12, 10, 36, 34}};
    // Start from singletons so only the merge step can join them.
    const auto singletons = group_boxes(frames, boxes, 2.0);
    REQUIRE(singletons.size() == 8);
    const auto merged = merge_groups(singletons, frames, 0.9);
    check_partition(merged, boxes);
    CHECK(merged.size() == 1);
}

TEST_CASE("randomized partition, coarsening and threshold monotonicity") {
    Rng rng(31);
    for (int run = 0; run < 15; ++run) {
        const std::size_t n = 4 + rng.below(4);
        std::vector<GrayFrame> frames;
        std::vector<std::vector<Box>> boxes(n);
        const double x0 = rng.uniform(4, 20), x1 = rng.uniform(50, 60);
        for (std::size_t i = 0; i < n; ++i) {
            const double ox = rng.uniform(-1.5, 1.5), oy = rng.uniform(-1.5, 1.5);
            frames.push_back(test::patch_frame(90, 48, {{{x0 + ox, 8 + oy}, 11}, {{x1 - ox, 10 - oy}, 12}}, 22));
            const std::size_t count = rng.below(4);
            for (std::size_t k = 0; k < count; ++k) {
                const double bx = rng.uniform(1, 60), by = rng.uniform(1, 20);
                boxes[i].push_back(Box{bx, by, bx + rng.uniform(8, 28), by + rng.uniform(8, 26)});
            }
        }
        std::size_t previous = SIZE_MAX;
        for (double th : {1.1, 0.9, 0.6, 0.3, 0.0}) {
            const auto groups = group_boxes(frames, boxes, th);
            check_partition(groups, boxes);
            CHECK(groups.size() <= previous);
            previous = groups.size();

            const auto merged = merge_groups(groups, frames, 0.5);
            check_partition(merged, boxes);
            // Coarsening: members of one input group stay together.
            const auto where = group_of(merged);
            for (const auto& g : groups)
                for (const auto& m : g.members)
                    CHECK(where.at({m.frame, m.box_index}) == where.at({g.members[0].frame, g.members[0].box_index}));
        }
    }
}
}

TEST_CASE("correlation") {
    const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1}, flat{5, 5, 5, 5};
    CHECK(correlation(a, b) == doctest::Approx(1.0));
    CHECK(correlation(a, c) == doctest::Approx(-1.0));
    CHECK(correlation(a, flat) == 0.0);
}

TEST_CASE("config validation") {
    FlowConfig cfg;
    cfg.window = 8;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg.window = 1;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}
