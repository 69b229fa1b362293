#pragma once

// Coverage rasters, primitive rasterization, density measurement and mean
// pyramids. Coverage is 1 for ink, 0 for paper.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace ptex {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm2(Vec2 a) { return dot(a, a); }

class Raster {
public:
    Raster() = default;

    Raster(int width, int height, double fill = 0.0) : width_(width), height_(height) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("raster dimensions must be positive, got " +
                                        std::to_string(width) + "x" + std::to_string(height));
        if (!(fill >= 0.0 && fill <= 1.0))
            throw std::invalid_argument("raster fill value outside [0,1]");
        data_.assign(static_cast<std::size_t>(width) * height, fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double at(int x, int y) const { return data_[index(x, y)]; }
    double& at(int x, int y) { return data_[index(x, y)]; }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    bool same_shape(const Raster& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

inline void require_valid(const Raster& r) {
    if (r.width() <= 0 || r.height() <= 0 || r.empty())
        throw std::invalid_argument("raster has zero size");
}

struct Disc {
    Vec2 center;
    double diameter = 8.0;
};

struct Segment {
    Vec2 p0;
    Vec2 p1;
    double stroke_width = 3.0;
};

struct TriangleEdges {
    Vec2 v0;
    Vec2 v1;
    Vec2 v2;
    double stroke_width = 3.0;
};

using Primitive = std::variant<Disc, Segment, TriangleEdges>;

namespace detail {

inline Vec2 pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

// Squared distance from p to the closed segment [a,b].
inline double segment_distance2(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = norm2(ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm2(p - (a + t * ab));
}

// Calls fn(x, y) for every pixel center within radius r of segment [a,b].
// Row spans come from the capsule's bounding interval; the exact distance
// test decides membership so results match a per-pixel scan.
template <typename Fn>
void for_each_capsule_pixel(int width, int height, Vec2 a, Vec2 b, double r, Fn&& fn) {
    const double r2 = r * r;
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r - 0.5)));
    const int y_hi = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r - 0.5)));
    const Vec2 ab = b - a;
    for (int y = y_lo; y <= y_hi; ++y) {
        const double cy = y + 0.5;
        // Horizontal extent of the capsule on this row: union of the two end
        // discs and the swept slab. Convexity makes the union an interval.
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (Vec2 c : {a, b}) {
            const double dy = cy - c.y;
            if (dy * dy <= r2) {
                const double dx = std::sqrt(r2 - dy * dy);
                lo = std::min(lo, c.x - dx);
                hi = std::max(hi, c.x + dx);
            }
        }
        if (std::abs(ab.y) > 1e-12) {
            const double len = std::sqrt(norm2(ab));
            const double half = r * len / std::abs(ab.y);
            const double t = (cy - a.y) / ab.y;
            const double xc = a.x + t * ab.x;
            // Restrict the slab to the parameter range [0,1] projected on the row.
            const double x0 = xc - half;
            const double x1 = xc + half;
            const double xa = std::min(a.x, b.x) - r;
            const double xb = std::max(a.x, b.x) + r;
            lo = std::min(lo, std::max(x0, xa));
            hi = std::max(hi, std::min(x1, xb));
        } else if (std::abs(cy - a.y) <= r) {
            lo = std::min(lo, std::min(a.x, b.x));
            hi = std::max(hi, std::max(a.x, b.x));
        }
        if (!(lo <= hi)) continue;
        const int x_lo = std::max(0, static_cast<int>(std::floor(lo - 0.5)) - 1);
        const int x_hi = std::min(width - 1, static_cast<int>(std::ceil(hi - 0.5)) + 1);
        for (int x = x_lo; x <= x_hi; ++x) {
            if (segment_distance2(pixel_center(x, y), a, b) <= r2) fn(x, y);
        }
    }
}

template <typename Fn>
void for_each_disc_pixel(int width, int height, const Disc& d, Fn&& fn) {
    const double r = 0.5 * d.diameter;
    const double r2 = r * r;
    const int y_lo = std::max(0, static_cast<int>(std::floor(d.center.y - r - 0.5)));
    const int y_hi = std::min(height - 1, static_cast<int>(std::ceil(d.center.y + r - 0.5)));
    const int x_lo = std::max(0, static_cast<int>(std::floor(d.center.x - r - 0.5)));
    const int x_hi = std::min(width - 1, static_cast<int>(std::ceil(d.center.x + r - 0.5)));
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            if (norm2(pixel_center(x, y) - d.center) <= r2) fn(x, y);
        }
    }
}

inline void check_primitive(const Primitive& prim) {
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Disc>) {
                if (!(p.diameter > 0.0)) throw std::invalid_argument("disc diameter must be > 0");
            } else {
                if (!(p.stroke_width > 0.0)) throw std::invalid_argument("stroke width must be > 0");
            }
        },
        prim);
}

}  // namespace detail

/// Visits every pixel whose center lies inside the primitive's inked region
/// (closed disc, or capsule of radius stroke_width/2 around each segment).
/// Pixels shared by several triangle edges are visited once per edge.
template <typename Fn>
void for_each_covered_pixel(int width, int height, const Primitive& prim, Fn&& fn) {
    detail::check_primitive(prim);
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Disc>) {
                detail::for_each_disc_pixel(width, height, p, fn);
            } else if constexpr (std::is_same_v<T, Segment>) {
                detail::for_each_capsule_pixel(width, height, p.p0, p.p1, 0.5 * p.stroke_width, fn);
            } else {
                const double r = 0.5 * p.stroke_width;
                detail::for_each_capsule_pixel(width, height, p.v0, p.v1, r, fn);
                detail::for_each_capsule_pixel(width, height, p.v1, p.v2, r, fn);
                detail::for_each_capsule_pixel(width, height, p.v2, p.v0, r, fn);
            }
        },
        prim);
}

/// OR-composites the primitive into the raster in place.
inline void rasterize_into(Raster& raster, const Primitive& prim) {
    require_valid(raster);
    for_each_covered_pixel(raster.width(), raster.height(), prim,
                           [&](int x, int y) { raster.at(x, y) = 1.0; });
}

inline Raster rasterize(Raster raster, const Primitive& prim) {
    rasterize_into(raster, prim);
    return raster;
}

inline double measure_density(const Raster& raster) {
    require_valid(raster);
    const auto v = raster.values();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Per-pixel maximum of two equally sized rasters.
inline Raster overlay(const Raster& a, const Raster& b) {
    require_valid(a);
    require_valid(b);
    if (!a.same_shape(b))
        throw std::invalid_argument("overlay: dimension mismatch " + std::to_string(a.width()) + "x" +
                                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                                    "x" + std::to_string(b.height()));
    Raster out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::max(o[i], bv[i]);
    return out;
}

struct Pyramid {
    std::vector<Raster> levels;
};

/// Halves one level with mean pooling; edge blocks average their in-bounds pixels.
inline Raster downsample_mean(const Raster& src) {
    const int w = (src.width() + 1) / 2;
    const int h = (src.height() + 1) / 2;
    Raster dst(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            int count = 0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const int sx = 2 * x + dx;
                    const int sy = 2 * y + dy;
                    if (sx < src.width() && sy < src.height()) {
                        sum += src.at(sx, sy);
                        ++count;
                    }
                }
            }
            dst.at(x, y) = sum / count;
        }
    }
    return dst;
}

inline Pyramid build_pyramid(const Raster& raster) {
    require_valid(raster);
    Pyramid p;
    p.levels.push_back(raster);
    while (p.levels.back().width() > 1 || p.levels.back().height() > 1)
        p.levels.push_back(downsample_mean(p.levels.back()));
    return p;
}

/// Weight of a level-0 pixel in every pyramid level's mean density. Lets the
/// hatching goodness sum pyramid-wide density gains without rebuilding the
/// pyramid per candidate.
class PyramidWeights {
public:
    PyramidWeights() = default;

    PyramidWeights(int width, int height) {
        int w = width;
        int h = height;
        dims_.push_back({w, h});
        while (w > 1 || h > 1) {
            w = (w + 1) / 2;
            h = (h + 1) / 2;
            dims_.push_back({w, h});
        }
    }

    std::size_t level_count() const { return dims_.size(); }

    /// Sum over all levels of the mean-density change caused by raising
    /// source pixel (x, y) by one unit of coverage.
    double summed_weight(int x, int y) const {
        double weight = 1.0;  // contribution to the level value containing (x, y)
        double total = 0.0;
        int px = x;
        int py = y;
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            const auto [w, h] = dims_[k];
            total += weight / (static_cast<double>(w) * h);
            if (k + 1 == dims_.size()) break;
            const int bx = px / 2;
            const int by = py / 2;
            const int nx = std::min(2, w - 2 * bx);
            const int ny = std::min(2, h - 2 * by);
            weight /= static_cast<double>(nx * ny);
            px = bx;
            py = by;
        }
        return total;
    }

private:
    struct Dim {
        int w;
        int h;
    };
    std::vector<Dim> dims_;
};

}  // namespace ptex
