#pragma once

// Point sets on the raster domain: discrete Voronoi labeling, (weighted)
// Lloyd relaxation and incremental Delaunay triangulation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptex/raster.hpp"

namespace ptex {

class DegenerateInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Sites in continuous pixel coordinates on the domain [0,width]x[0,height].
struct PointSet {
    std::vector<Vec2> points;
    int width = 0;
    int height = 0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    Vec2 clamp(Vec2 p) const {
        return {std::clamp(p.x, 0.0, static_cast<double>(width)),
                std::clamp(p.y, 0.0, static_cast<double>(height))};
    }
};

/// Uniform bucket grid answering exact nearest-site queries. Ties go to the
/// lowest site index, matching an exhaustive scan bit for bit.
class SiteGrid {
public:
    SiteGrid(const std::vector<Vec2>& sites, int width, int height) : sites_(&sites) {
        const double area = static_cast<double>(width) * height;
        cell_ = std::max(1.0, std::sqrt(area / std::max<std::size_t>(1, sites.size())));
        nx_ = std::max(1, static_cast<int>(std::ceil(width / cell_)));
        ny_ = std::max(1, static_cast<int>(std::ceil(height / cell_)));
        start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
        std::vector<int> bucket_of(sites.size());
        for (std::size_t i = 0; i < sites.size(); ++i) {
            bucket_of[i] = bucket(sites[i]);
            ++start_[bucket_of[i] + 1];
        }
        for (std::size_t b = 1; b < start_.size(); ++b) start_[b] += start_[b - 1];
        items_.resize(sites.size());
        std::vector<int> fill(start_.begin(), start_.end() - 1);
        // Index order inside each bucket is preserved.
        for (std::size_t i = 0; i < sites.size(); ++i) items_[fill[bucket_of[i]]++] = static_cast<int>(i);
    }

    int nearest(Vec2 p) const {
        const auto& s = *sites_;
        const int bx = std::clamp(static_cast<int>(p.x / cell_), 0, nx_ - 1);
        const int by = std::clamp(static_cast<int>(p.y / cell_), 0, ny_ - 1);
        double best_d2 = std::numeric_limits<double>::infinity();
        int best = -1;
        for (int r = 0;; ++r) {
            const int x0 = bx - r, x1 = bx + r, y0 = by - r, y1 = by + r;
            for (int y = std::max(0, y0); y <= std::min(ny_ - 1, y1); ++y) {
                const bool edge_row = (y == y0 || y == y1);
                for (int x = std::max(0, x0); x <= std::min(nx_ - 1, x1); ++x) {
                    if (!edge_row && x != x0 && x != x1) continue;
                    const int b = y * nx_ + x;
                    for (int k = start_[b]; k < start_[b + 1]; ++k) {
                        const int i = items_[k];
                        const double dx = p.x - s[i].x;
                        const double dy = p.y - s[i].y;
                        const double d2 = dx * dx + dy * dy;
                        if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
                            best_d2 = d2;
                            best = i;
                        }
                    }
                }
            }
            if (x0 <= 0 && y0 <= 0 && x1 >= nx_ - 1 && y1 >= ny_ - 1) break;
            // Anything outside the searched block is at least this far away.
            double gap = std::numeric_limits<double>::infinity();
            if (x0 > 0) gap = std::min(gap, p.x - x0 * cell_);
            if (y0 > 0) gap = std::min(gap, p.y - y0 * cell_);
            if (x1 < nx_ - 1) gap = std::min(gap, (x1 + 1) * cell_ - p.x);
            if (y1 < ny_ - 1) gap = std::min(gap, (y1 + 1) * cell_ - p.y);
            if (best >= 0 && best_d2 < gap * gap) break;
        }
        return best;
    }

private:
    int bucket(Vec2 p) const {
        const int bx = std::clamp(static_cast<int>(std::floor(p.x / cell_)), 0, nx_ - 1);
        const int by = std::clamp(static_cast<int>(std::floor(p.y / cell_)), 0, ny_ - 1);
        return by * nx_ + bx;
    }

    const std::vector<Vec2>* sites_;
    double cell_ = 1.0;
    int nx_ = 1;
    int ny_ = 1;
    std::vector<int> start_;
    std::vector<int> items_;
};

struct CellStats {
    double mass = 0.0;   // sum of weights (pixel count when unweighted)
    double count = 0.0;  // pixel count
    double sx = 0.0, sy = 0.0;              // weighted first moments
    double sxx = 0.0, sxy = 0.0, syy = 0.0;  // weighted second moments

    Vec2 centroid() const { return {sx / mass, sy / mass}; }
};

struct VoronoiLabels {
    int width = 0;
    int height = 0;
    std::vector<int> label;  // per pixel, row major
    std::vector<CellStats> cells;

    int at(int x, int y) const { return label[static_cast<std::size_t>(y) * width + x]; }
};

inline void check_weight(const PointSet& points, const Raster* weight) {
    if (weight && (weight->width() != points.width || weight->height() != points.height))
        throw std::invalid_argument("weight raster does not match the point domain");
}

/// Labels each pixel center with its nearest site and accumulates per-cell
/// (weighted) moments.
inline VoronoiLabels voronoi_labels(const PointSet& points, const Raster* weight = nullptr) {
    if (points.empty()) throw std::invalid_argument("voronoi_labels: empty point set");
    if (points.width <= 0 || points.height <= 0)
        throw std::invalid_argument("voronoi_labels: empty domain");
    check_weight(points, weight);
    VoronoiLabels out;
    out.width = points.width;
    out.height = points.height;
    out.label.resize(static_cast<std::size_t>(points.width) * points.height);
    out.cells.resize(points.size());
    const SiteGrid grid(points.points, points.width, points.height);
    for (int y = 0; y < points.height; ++y) {
        for (int x = 0; x < points.width; ++x) {
            const Vec2 c{x + 0.5, y + 0.5};
            const int l = grid.nearest(c);
            const std::size_t idx = static_cast<std::size_t>(y) * points.width + x;
            out.label[idx] = l;
            const double w = weight ? weight->values()[idx] : 1.0;
            auto& cell = out.cells[l];
            cell.count += 1.0;
            cell.mass += w;
            cell.sx += w * c.x;
            cell.sy += w * c.y;
            cell.sxx += w * c.x * c.x;
            cell.sxy += w * c.x * c.y;
            cell.syy += w * c.y * c.y;
        }
    }
    return out;
}

/// E = sum over pixels of w(p) * |p - nearest site|^2.
inline double quantization_energy(const PointSet& points, const Raster* weight = nullptr) {
    const auto labels = voronoi_labels(points, weight);
    double e = 0.0;
    for (int y = 0; y < points.height; ++y) {
        for (int x = 0; x < points.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * points.width + x;
            const double w = weight ? weight->values()[idx] : 1.0;
            e += w * norm2(Vec2{x + 0.5, y + 0.5} - points.points[labels.label[idx]]);
        }
    }
    return e;
}

/// Moves every site to its cell's (weighted) centroid. Cells without mass
/// keep their site where it is.
inline PointSet lloyd_step(const PointSet& points, const Raster* weight = nullptr) {
    const auto labels = voronoi_labels(points, weight);
    PointSet next = points;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& cell = labels.cells[i];
        if (cell.mass > 0.0) next.points[i] = next.clamp(cell.centroid());
    }
    return next;
}

struct LloydResult {
    PointSet points;
    int iterations = 0;
    double max_move = 0.0;
};

inline LloydResult lloyd_relax(PointSet points, const Raster* weight, int max_iters, double move_tol) {
    if (max_iters < 1) throw std::invalid_argument("lloyd_relax: max_iters must be >= 1");
    if (move_tol < 0.0) throw std::invalid_argument("lloyd_relax: move_tol must be >= 0");
    LloydResult result;
    for (int it = 0; it < max_iters; ++it) {
        PointSet next = lloyd_step(points, weight);
        double move = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            move = std::max(move, std::sqrt(norm2(next.points[i] - points.points[i])));
        points = std::move(next);
        result.iterations = it + 1;
        result.max_move = move;
        if (move < move_tol) break;
    }
    result.points = std::move(points);
    return result;
}

struct Triangulation {
    PointSet vertices;
    std::vector<std::array<int, 3>> triangles;  // counter-clockwise in y-up orientation

    /// Unique undirected edges, each as (lower index, higher index), sorted.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> e;
        e.reserve(triangles.size() * 3);
        for (const auto& t : triangles) {
            for (int k = 0; k < 3; ++k) {
                int a = t[k], b = t[(k + 1) % 3];
                if (a > b) std::swap(a, b);
                e.emplace_back(a, b);
            }
        }
        std::sort(e.begin(), e.end());
        e.erase(std::unique(e.begin(), e.end()), e.end());
        return e;
    }
};

/// Geometric predicates on coordinates normalized by the domain diagonal.
struct DelaunayPredicates {
    static constexpr double kInCircleEps = 1e-9;
    static constexpr double kOrientEps = 1e-12;

    static double orient(Vec2 a, Vec2 b, Vec2 c) {
        return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    }

    /// Positive when d lies inside the circumcircle of counter-clockwise (a,b,c).
    static double incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
        const double adx = a.x - d.x, ady = a.y - d.y;
        const double bdx = b.x - d.x, bdy = b.y - d.y;
        const double cdx = c.x - d.x, cdy = c.y - d.y;
        return (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) -
               (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady) +
               (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    }

    /// Sum of the absolute incircle terms, a scale for its rounding error.
    static double incircle_magnitude(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
        const double adx = a.x - d.x, ady = a.y - d.y;
        const double bdx = b.x - d.x, bdy = b.y - d.y;
        const double cdx = c.x - d.x, cdy = c.y - d.y;
        return (adx * adx + ady * ady) * (std::abs(bdx * cdy) + std::abs(cdx * bdy)) +
               (bdx * bdx + bdy * bdy) * (std::abs(adx * cdy) + std::abs(cdx * ady)) +
               (cdx * cdx + cdy * cdy) * (std::abs(adx * bdy) + std::abs(bdx * ady));
    }

    /// d strictly inside the circumcircle. The 1e-9 slack shrinks with the
    /// triangle so that small triangles in dense sets are still tested.
    static bool in_circle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
        const double slack = kInCircleEps * std::min(1.0, incircle_magnitude(a, b, c, d));
        return incircle(a, b, c, d) > slack;
    }
};

namespace detail {

// Bowyer-Watson insertion. The hull is closed with ghost triangles (one
// ghost vertex per hull edge) instead of a finite super-triangle, so the
// result covers exactly the convex hull.
class DelaunayBuilder {
public:
    static constexpr int kGhost = -1;

    explicit DelaunayBuilder(std::vector<Vec2> normalized) : p_(std::move(normalized)) {}

    std::vector<std::array<int, 3>> run() {
        const int n = static_cast<int>(p_.size());
        if (n < 3) throw DegenerateInputError("delaunay: need at least 3 points, got " + std::to_string(n));
        // First three non-collinear points in index order seed the mesh.
        const int i0 = 0;
        int i1 = -1, i2 = -1;
        for (int i = 1; i < n && i1 < 0; ++i)
            if (norm2(p_[i] - p_[i0]) > 0.0) i1 = i;
        if (i1 >= 0) {
            for (int i = i1 + 1; i < n && i2 < 0; ++i)
                if (std::abs(DelaunayPredicates::orient(p_[i0], p_[i1], p_[i])) > DelaunayPredicates::kOrientEps) i2 = i;
        }
        if (i1 < 0 || i2 < 0) throw DegenerateInputError("delaunay: all points are collinear or coincident");
        seed(i0, i1, i2);
        for (int i = 0; i < n; ++i) {
            if (i == i0 || i == i1 || i == i2) continue;
            insert(i);
        }
        std::vector<std::array<int, 3>> out;
        for (const auto& t : tris_)
            if (t.alive && t.v[0] != kGhost && t.v[1] != kGhost && t.v[2] != kGhost) out.push_back(t.v);
        return out;
    }

private:
    struct Tri {
        std::array<int, 3> v{};
        std::array<int, 3> n{-1, -1, -1};  // n[k] lies across the edge opposite v[k]
        bool alive = true;
    };

    static bool is_ghost(const Tri& t) { return t.v[2] == kGhost; }

    // Keeps the ghost vertex, if any, in slot 2 while preserving cyclic order.
    static std::array<int, 3> canonical(int a, int b, int c) {
        if (a == kGhost) return {b, c, a};
        if (b == kGhost) return {c, a, b};
        return {a, b, c};
    }

    bool in_conflict(const Tri& t, Vec2 q) const {
        if (is_ghost(t)) {
            const Vec2 a = p_[t.v[0]], b = p_[t.v[1]];
            const double o = DelaunayPredicates::orient(a, b, q);
            if (o > DelaunayPredicates::kOrientEps) return true;
            if (o < -DelaunayPredicates::kOrientEps) return false;
            // On the hull line: conflict only strictly between the endpoints.
            const double s = dot(q - a, b - a);
            return s > 0.0 && s < norm2(b - a);
        }
        return DelaunayPredicates::in_circle(p_[t.v[0]], p_[t.v[1]], p_[t.v[2]], q);
    }

    int add(std::array<int, 3> v) {
        Tri t;
        t.v = v;
        if (!free_.empty()) {
            const int idx = free_.back();
            free_.pop_back();
            tris_[idx] = t;
            return idx;
        }
        tris_.push_back(t);
        return static_cast<int>(tris_.size()) - 1;
    }

    static std::int64_t edge_key(int a, int b) {
        return (static_cast<std::int64_t>(a) + 1) * (std::int64_t{1} << 32) + (static_cast<std::int64_t>(b) + 1);
    }

    // Links every directed edge of the given triangles with its reverse twin
    // among the same set.
    void link(const std::vector<int>& ids) {
        std::unordered_map<std::int64_t, std::pair<int, int>> open;
        for (int id : ids) {
            for (int k = 0; k < 3; ++k) {
                const int a = tris_[id].v[(k + 1) % 3];
                const int b = tris_[id].v[(k + 2) % 3];
                auto it = open.find(edge_key(b, a));
                if (it != open.end()) {
                    tris_[id].n[k] = it->second.first;
                    tris_[it->second.first].n[it->second.second] = id;
                    open.erase(it);
                } else {
                    open.emplace(edge_key(a, b), std::make_pair(id, k));
                }
            }
        }
    }

    void seed(int a, int b, int c) {
        if (DelaunayPredicates::orient(p_[a], p_[b], p_[c]) < 0) std::swap(b, c);
        std::vector<int> ids;
        ids.push_back(add({a, b, c}));
        ids.push_back(add(canonical(b, a, kGhost)));
        ids.push_back(add(canonical(c, b, kGhost)));
        ids.push_back(add(canonical(a, c, kGhost)));
        link(ids);
        last_ = ids[0];
    }

    int locate(Vec2 q) const {
        int t = last_;
        if (t < 0 || !tris_[t].alive) {
            t = -1;
            for (std::size_t i = 0; i < tris_.size() && t < 0; ++i)
                if (tris_[i].alive) t = static_cast<int>(i);
        }
        const std::size_t max_steps = 4 * tris_.size() + 16;
        for (std::size_t step = 0; step < max_steps; ++step) {
            const Tri& tri = tris_[t];
            if (is_ghost(tri)) {
                if (in_conflict(tri, q)) return t;
                t = tri.n[2];
                continue;
            }
            int next = -1;
            for (int k = 0; k < 3 && next < 0; ++k) {
                const Vec2 a = p_[tri.v[(k + 1) % 3]];
                const Vec2 b = p_[tri.v[(k + 2) % 3]];
                if (DelaunayPredicates::orient(a, b, q) < 0.0) next = tri.n[k];
            }
            if (next < 0) return t;
            t = next;
        }
        return -1;
    }

    void insert(int i) {
        const Vec2 q = p_[i];
        int start = locate(q);
        if (start >= 0) {
            for (int v : tris_[start].v)
                if (v != kGhost && norm2(p_[v] - q) == 0.0) return;  // duplicate site
        }
        if (start < 0 || !in_conflict(tris_[start], q)) {
            start = -1;
            for (std::size_t k = 0; k < tris_.size() && start < 0; ++k)
                if (tris_[k].alive && in_conflict(tris_[k], q)) start = static_cast<int>(k);
            if (start < 0) return;  // numerically on an existing vertex
        }

        std::vector<int> cavity{start};
        std::vector<char>& mark = mark_;
        mark.resize(tris_.size(), 0);
        mark[start] = 1;
        for (std::size_t head = 0; head < cavity.size(); ++head) {
            for (int nb : tris_[cavity[head]].n) {
                if (nb < 0 || mark[nb]) continue;
                if (in_conflict(tris_[nb], q)) {
                    mark[nb] = 1;
                    cavity.push_back(nb);
                }
            }
        }

        struct Boundary {
            int a, b, outside, outside_slot;
        };
        std::vector<Boundary> boundary;
        for (int c : cavity) {
            for (int k = 0; k < 3; ++k) {
                const int nb = tris_[c].n[k];
                if (nb >= 0 && mark[nb]) continue;
                int slot = -1;
                if (nb >= 0)
                    for (int s = 0; s < 3; ++s)
                        if (tris_[nb].n[s] == c) slot = s;
                boundary.push_back({tris_[c].v[(k + 1) % 3], tris_[c].v[(k + 2) % 3], nb, slot});
            }
        }
        for (int c : cavity) {
            mark[c] = 0;
            tris_[c].alive = false;
            free_.push_back(c);
        }

        std::vector<int> created;
        created.reserve(boundary.size());
        for (const auto& e : boundary) {
            const int id = add(canonical(e.a, e.b, i));
            if (mark.size() < tris_.size()) mark.resize(tris_.size(), 0);
            created.push_back(id);
            // Hook the outer neighbor across the boundary edge.
            for (int k = 0; k < 3; ++k) {
                const int a = tris_[id].v[(k + 1) % 3];
                const int b = tris_[id].v[(k + 2) % 3];
                if (a == e.a && b == e.b) {
                    tris_[id].n[k] = e.outside;
                    if (e.outside >= 0) tris_[e.outside].n[e.outside_slot] = id;
                }
            }
        }
        link(created);
        last_ = created.front();
        for (int id : created)
            if (!is_ghost(tris_[id])) last_ = id;
    }

    std::vector<Vec2> p_;
    std::vector<Tri> tris_;
    std::vector<int> free_;
    std::vector<char> mark_;
    int last_ = -1;
};

}  // namespace detail

inline std::vector<Vec2> normalize_for_predicates(const PointSet& points) {
    double scale = std::hypot(static_cast<double>(points.width), static_cast<double>(points.height));
    if (!(scale > 0.0)) {
        double mx = 0.0;
        for (auto p : points.points) mx = std::max({mx, std::abs(p.x), std::abs(p.y)});
        scale = mx > 0.0 ? mx : 1.0;
    }
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (auto p : points.points) out.push_back({p.x / scale, p.y / scale});
    return out;
}

/// Delaunay triangulation by incremental insertion in index order.
inline Triangulation delaunay(const PointSet& points) {
    Triangulation t;
    t.vertices = points;
    t.triangles = detail::DelaunayBuilder(normalize_for_predicates(points)).run();
    return t;
}

}  // namespace ptex
