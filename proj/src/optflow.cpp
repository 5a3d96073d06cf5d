#include "epk/optflow.hpp"

#include "epk/error.hpp"
#include "epk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

namespace epk::flow {

namespace {

double min_eigenvalue(double a, double b, double c) noexcept {
    const double half_trace = 0.5 * (a + c);
    const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    return std::max(half_trace - disc, 0.0);
}

bool window_inside(double x, double y, double r, std::size_t w, std::size_t h) noexcept {
    return x - r >= 0.0 && y - r >= 0.0 && x + r <= static_cast<double>(w - 1) &&
           y + r <= static_cast<double>(h - 1);
}

} // namespace

void FlowConfig::validate() const {
    if (window < 3 || window % 2 == 0) throw ArgumentError("flow: window must be an odd integer >= 3");
    if (canonical_size < 8) throw ArgumentError("flow: canonical_size must be at least 8");
    if (!(feature_quality > 0.0 && feature_quality <= 1.0)) throw ArgumentError("flow: feature_quality must lie in (0, 1]");
    if (max_iterations == 0) throw ArgumentError("flow: max_iterations must be positive");
}

Gradients image_gradients(const GrayFrame& frame) {
    const std::size_t w = frame.width();
    const std::size_t h = frame.height();
    if (w < 3 || h < 3) throw ArgumentError("image_gradients: frame must be at least 3x3");
    const Plane& img = frame.plane();
    Gradients g{Plane(w, h), Plane(w, h)};

    for (std::size_t y = 0; y < h; ++y) {
        const auto src = img.row(y);
        auto dst = g.ix.row(y);
        kernels::half_difference(src.subspan(2), src.first(w - 2), dst.subspan(1, w - 2));
        dst[0] = src[1] - src[0];
        dst[w - 1] = src[w - 1] - src[w - 2];
    }
    for (std::size_t y = 1; y + 1 < h; ++y) kernels::half_difference(img.row(y + 1), img.row(y - 1), g.iy.row(y));
    for (std::size_t x = 0; x < w; ++x) {
        g.iy.at(x, 0) = img.at(x, 1) - img.at(x, 0);
        g.iy.at(x, h - 1) = img.at(x, h - 1) - img.at(x, h - 2);
    }
    return g;
}

std::vector<Point> good_features(const GrayFrame& frame, std::size_t max_count, double quality,
                                 const FlowConfig& cfg) {
    if (max_count == 0) throw ArgumentError("good_features: max_count must be >= 1");
    if (!(quality > 0.0 && quality <= 1.0)) throw ArgumentError("good_features: quality must lie in (0, 1]");
    const Gradients g = image_gradients(frame);
    const std::size_t w = frame.width();
    const std::size_t h = frame.height();
    const std::size_t r = cfg.feature_block_radius;
    const std::size_t margin = std::max(r, cfg.window / 2);
    const auto nms = static_cast<std::ptrdiff_t>(cfg.window / 2);
    if (w <= 2 * margin || h <= 2 * margin) return {};

    Plane score(w, h);
    double best = 0.0;
    for (std::size_t y = r; y + r < h; ++y)
        for (std::size_t x = r; x + r < w; ++x) {
            double a = 0.0, b = 0.0, c = 0.0;
            for (std::size_t yy = y - r; yy <= y + r; ++yy)
                for (std::size_t xx = x - r; xx <= x + r; ++xx) {
                    const double gx = g.ix.at(xx, yy);
                    const double gy = g.iy.at(xx, yy);
                    a += gx * gx;
                    b += gx * gy;
                    c += gy * gy;
                }
            const double e = min_eigenvalue(a, b, c);
            score.at(x, y) = e;
            best = std::max(best, e);
        }
    if (!(best > 0.0)) return {};

    struct Candidate {
        double score;
        std::size_t x, y;
    };
    std::vector<Candidate> cands;
    const double floor = quality * best;
    const auto sw = static_cast<std::ptrdiff_t>(w);
    const auto sh = static_cast<std::ptrdiff_t>(h);
    for (std::size_t y = margin; y + margin < h; ++y)
        for (std::size_t x = margin; x + margin < w; ++x) {
            const double s = score.at(x, y);
            if (s < floor || s <= 0.0) continue;
            bool is_max = true;
            const auto cx = static_cast<std::ptrdiff_t>(x);
            const auto cy = static_cast<std::ptrdiff_t>(y);
            for (std::ptrdiff_t yy = std::max<std::ptrdiff_t>(cy - nms, 0); yy <= std::min(cy + nms, sh - 1) && is_max; ++yy)
                for (std::ptrdiff_t xx = std::max<std::ptrdiff_t>(cx - nms, 0); xx <= std::min(cx + nms, sw - 1); ++xx)
                    if (score.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy)) > s) {
                        is_max = false;
                        break;
                    }
            if (is_max) cands.push_back({s, x, y});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

    std::vector<Point> out;
    const double min_d2 = cfg.feature_min_distance * cfg.feature_min_distance;
    for (const Candidate& c : cands) {
        const Point p{static_cast<double>(c.x), static_cast<double>(c.y)};
        const bool clear = std::all_of(out.begin(), out.end(), [&](const Point& q) {
            return (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) >= min_d2;
        });
        if (!clear) continue;
        out.push_back(p);
        if (out.size() == max_count) break;
    }
    return out;
}

std::vector<FlowVector> lk_flow(const GrayFrame& prev, const GrayFrame& next, std::span<const Point> points,
                                const FlowConfig& cfg) {
    cfg.validate();
    if (prev.width() != next.width() || prev.height() != next.height())
        throw ArgumentError("lk_flow: frames differ in size");
    const Gradients g = image_gradients(prev);
    const std::size_t w = prev.width();
    const std::size_t h = prev.height();
    const auto half = static_cast<std::ptrdiff_t>(cfg.window / 2);
    const double r = static_cast<double>(half);
    const double floor = cfg.eigen_floor();
    const std::size_t area = cfg.window * cfg.window;

    std::vector<FlowVector> out;
    out.reserve(points.size());
    std::vector<double> wi(area), wx(area), wy(area);
    for (const Point& p : points) {
        FlowVector fv;
        fv.origin = p;
        if (!window_inside(p.x, p.y, r, w, h)) {
            out.push_back(fv);
            continue;
        }
        double a = 0.0, b = 0.0, c = 0.0;
        std::size_t k = 0;
        for (std::ptrdiff_t j = -half; j <= half; ++j)
            for (std::ptrdiff_t i = -half; i <= half; ++i, ++k) {
                const double sx = p.x + static_cast<double>(i);
                const double sy = p.y + static_cast<double>(j);
                wi[k] = prev.sample(sx, sy);
                wx[k] = g.ix.sample(sx, sy);
                wy[k] = g.iy.sample(sx, sy);
                a += wx[k] * wx[k];
                b += wx[k] * wy[k];
                c += wy[k] * wy[k];
            }
        fv.min_eigenvalue = min_eigenvalue(a, b, c);
        const double det = a * c - b * b;
        if (fv.min_eigenvalue < floor || !(det > 0.0)) {
            out.push_back(fv);
            continue;
        }

        double dx = 0.0, dy = 0.0;
        bool ok = true;
        for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
            if (!window_inside(p.x + dx, p.y + dy, r, w, h)) {
                ok = false;
                break;
            }
            double bx = 0.0, by = 0.0;
            k = 0;
            for (std::ptrdiff_t j = -half; j <= half; ++j)
                for (std::ptrdiff_t i = -half; i <= half; ++i, ++k) {
                    const double it_val = next.sample(p.x + dx + static_cast<double>(i), p.y + dy + static_cast<double>(j)) - wi[k];
                    bx += wx[k] * it_val;
                    by += wy[k] * it_val;
                }
            // G·δ = −b
            const double ddx = -(c * bx - b * by) / det;
            const double ddy = -(a * by - b * bx) / det;
            dx += ddx;
            dy += ddy;
            if (std::hypot(dx, dy) > static_cast<double>(cfg.window)) {
                ok = false;
                break;
            }
            if (std::hypot(ddx, ddy) < cfg.epsilon) break;
        }
        if (ok) {
            fv.dx = dx;
            fv.dy = dy;
            fv.valid = true;
        }
        out.push_back(fv);
    }
    return out;
}

GrayFrame canonical_patch(const GrayFrame& frame, const Box& box, std::size_t size) {
    if (!box.valid()) throw ArgumentError("canonical_patch: empty box");
    if (size < 2) throw ArgumentError("canonical_patch: size must be at least 2");
    Plane out(size, size);
    const double sx = box.width() / static_cast<double>(size - 1);
    const double sy = box.height() / static_cast<double>(size - 1);
    for (std::size_t v = 0; v < size; ++v)
        for (std::size_t u = 0; u < size; ++u)
            out.at(u, v) = frame.sample(box.x0 + static_cast<double>(u) * sx, box.y0 + static_cast<double>(v) * sy);
    return GrayFrame(std::move(out));
}

double box_similarity(const GrayFrame& prev, const GrayFrame& next, const Box& box_prev, const Box& box_next,
                      const FlowConfig& cfg) {
    if (!box_prev.valid() || !box_next.valid()) throw ArgumentError("box_similarity: empty box");
    const std::size_t size = cfg.canonical_size;
    const GrayFrame patch = canonical_patch(prev, box_prev, size);
    const std::vector<Point> local = good_features(patch, cfg.max_features, cfg.feature_quality, cfg);

    std::vector<Point> pts;
    pts.reserve(local.size());
    const double sx = box_prev.width() / static_cast<double>(size - 1);
    const double sy = box_prev.height() / static_cast<double>(size - 1);
    for (const Point& q : local) pts.push_back({box_prev.x0 + q.x * sx, box_prev.y0 + q.y * sy});

    const std::vector<FlowVector> fwd = lk_flow(prev, next, pts, cfg);
    std::vector<Point> landings;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < fwd.size(); ++i)
        if (fwd[i].valid) {
            landings.push_back(fwd[i].landing());
            which.push_back(i);
        }
    if (landings.empty()) return 0.0;

    const std::vector<FlowVector> bwd = lk_flow(next, prev, landings, cfg);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < bwd.size(); ++k) {
        if (!bwd[k].valid) continue;
        const Point back = bwd[k].landing();
        const Point& origin = pts[which[k]];
        if (std::hypot(back.x - origin.x, back.y - origin.y) > cfg.fb_max_error) continue;
        if (box_next.contains(landings[k])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(landings.size());
}

namespace {

std::vector<BoxTrackGroup> ordered_groups(std::vector<std::vector<BoxRef>> parts) {
    for (auto& m : parts)
        std::sort(m.begin(), m.end(), [](const BoxRef& a, const BoxRef& b) {
            return std::tie(a.frame, a.box_index) < std::tie(b.frame, b.box_index);
        });
    std::erase_if(parts, [](const auto& m) { return m.empty(); });
    std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) {
        return std::tie(a.front().frame, a.front().box_index) < std::tie(b.front().frame, b.front().box_index);
    });
    std::vector<BoxTrackGroup> out;
    out.reserve(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) out.push_back({i, std::move(parts[i])});
    return out;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
};

} // namespace

std::vector<BoxTrackGroup> group_boxes(std::span<const GrayFrame> frames,
                                       std::span<const std::vector<Box>> boxes_per_frame, double threshold,
                                       const FlowConfig& cfg) {
    if (frames.size() != boxes_per_frame.size())
        throw ArgumentError("group_boxes: " + std::to_string(frames.size()) + " frames but " +
                            std::to_string(boxes_per_frame.size()) + " box lists");
    cfg.validate();

    std::vector<std::size_t> offset(boxes_per_frame.size() + 1, 0);
    for (std::size_t f = 0; f < boxes_per_frame.size(); ++f) offset[f + 1] = offset[f] + boxes_per_frame[f].size();
    const std::size_t total = offset.back();

    struct Link {
        double similarity;
        std::size_t gap, frame, from, to;
    };
    std::vector<Link> links;
    const double reach = static_cast<double>(cfg.window);
    for (std::size_t f = 0; f < frames.size(); ++f)
        for (std::size_t gap = 1; gap <= cfg.gap_max + 1 && f + gap < frames.size(); ++gap)
            for (std::size_t i = 0; i < boxes_per_frame[f].size(); ++i)
                for (std::size_t j = 0; j < boxes_per_frame[f + gap].size(); ++j) {
                    const Box& a = boxes_per_frame[f][i];
                    const Box& b = boxes_per_frame[f + gap][j];
                    // Tracks move at most `window` pixels, so farther boxes score 0.
                    if (!b.intersects(a.expanded(reach))) continue;
                    const double s = box_similarity(frames[f], frames[f + gap], a, b, cfg);
                    if (s > threshold) links.push_back({s, gap, f, offset[f] + i, offset[f + gap] + j});
                }
    std::stable_sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return std::tie(a.gap, a.from, a.to) < std::tie(b.gap, b.from, b.to);
    });

    std::vector<bool> has_succ(total, false), has_pred(total, false);
    UnionFind uf(total);
    for (const Link& l : links) {
        if (has_succ[l.from] || has_pred[l.to]) continue;
        has_succ[l.from] = true;
        has_pred[l.to] = true;
        uf.parent[uf.find(l.to)] = uf.find(l.from);
    }

    std::vector<std::vector<BoxRef>> parts(total);
    for (std::size_t f = 0; f < boxes_per_frame.size(); ++f)
        for (std::size_t i = 0; i < boxes_per_frame[f].size(); ++i)
            parts[uf.find(offset[f] + i)].push_back({f, i, boxes_per_frame[f][i]});
    return ordered_groups(std::move(parts));
}

double correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw ArgumentError("correlation: size mismatch");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 1e-18 || sbb <= 1e-18) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::vector<BoxTrackGroup> merge_groups(const std::vector<BoxTrackGroup>& groups, std::span<const GrayFrame> frames,
                                        double merge_threshold, const FlowConfig& cfg) {
    const std::size_t n = groups.size();
    const std::size_t size = cfg.canonical_size;

    std::vector<std::vector<double>> descriptor(n, std::vector<double>(size * size, 0.0));
    std::vector<std::vector<std::size_t>> frames_of(n);
    for (std::size_t g = 0; g < n; ++g) {
        for (const BoxRef& m : groups[g].members) {
            if (m.frame >= frames.size()) throw ArgumentError("merge_groups: member frame out of range");
            const GrayFrame patch = canonical_patch(frames[m.frame], m.box, size);
            kernels::axpy(1.0, patch.pixels(), descriptor[g]);
            frames_of[g].push_back(m.frame);
        }
        if (!groups[g].members.empty())
            for (double& v : descriptor[g]) v /= static_cast<double>(groups[g].members.size());
        std::sort(frames_of[g].begin(), frames_of[g].end());
    }

    struct Pair {
        double corr;
        std::size_t a, b;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double c = correlation(descriptor[a], descriptor[b]);
            if (c > merge_threshold) pairs.push_back({c, a, b});
        }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.corr > y.corr; });

    UnionFind uf(n);
    for (const Pair& p : pairs) {
        const std::size_t ra = uf.find(p.a);
        const std::size_t rb = uf.find(p.b);
        if (ra == rb) continue;
        std::vector<std::size_t> both;
        std::set_intersection(frames_of[ra].begin(), frames_of[ra].end(), frames_of[rb].begin(), frames_of[rb].end(),
                              std::back_inserter(both));
        if (!both.empty()) continue;
        const std::size_t root = std::min(ra, rb);
        const std::size_t child = std::max(ra, rb);
        uf.parent[child] = root;
        std::vector<std::size_t> merged;
        std::merge(frames_of[ra].begin(), frames_of[ra].end(), frames_of[rb].begin(), frames_of[rb].end(),
                   std::back_inserter(merged));
        frames_of[root] = std::move(merged);
    }

    std::vector<std::vector<BoxRef>> parts(n);
    for (std::size_t g = 0; g < n; ++g) {
        auto& dst = parts[uf.find(g)];
        dst.insert(dst.end(), groups[g].members.begin(), groups[g].members.end());
    }
    return ordered_groups(std::move(parts));
}

} // namespace epk::flow
