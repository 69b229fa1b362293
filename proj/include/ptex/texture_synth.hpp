#pragma once

// Stippled, triangulated, hatched and crosshatched textures generated at a
// target coverage density, plus weighted Linde-Buzo-Gray stippling for
// spatially varying density maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptex/geometry.hpp"
#include "ptex/raster.hpp"

namespace ptex {

enum class TextureType { stipple, triangle, hatch_h, hatch_v, crosshatch };

inline std::string to_string(TextureType t) {
    switch (t) {
        case TextureType::stipple: return "stipple";
        case TextureType::triangle: return "triangle";
        case TextureType::hatch_h: return "hatch_h";
        case TextureType::hatch_v: return "hatch_v";
        case TextureType::crosshatch: return "crosshatch";
    }
    return "unknown";
}

/// Accepts the canonical names plus "hatch" for the crosshatch grid.
inline TextureType parse_texture_type(const std::string& s) {
    if (s == "stipple" || s == "stippling") return TextureType::stipple;
    if (s == "triangle" || s == "triangles") return TextureType::triangle;
    if (s == "hatch_h" || s == "horizontal") return TextureType::hatch_h;
    if (s == "hatch_v" || s == "vertical") return TextureType::hatch_v;
    if (s == "crosshatch" || s == "hatch") return TextureType::crosshatch;
    throw std::invalid_argument("unknown texture type '" + s + "'");
}

enum class HatchOrientation { horizontal, vertical };

struct TextureSpec {
    TextureType texture_type = TextureType::stipple;
    int width = 512;
    int height = 512;
    double stipple_diameter = 8.0;
    double stroke_width = 3.0;
    double hatch_length_min = 0.3;  // fraction of the image width
    double hatch_length_max = 1.0;
    int candidates_per_line = 64;
    std::uint64_t seed = 0;

    // Relaxation applied after every insertion batch.
    int lloyd_iters_per_batch = 8;
    double lloyd_move_tol = 0.25;

    double lbg_split_factor = 1.5;
    double lbg_remove_factor = 0.5;
    int lbg_max_iters = 100;
    // Re-runs of LBG with the mass rescaled per block by target / measured,
    // compensating dot overlap at high densities.
    int lbg_correction_passes = 3;

    int block_size = 32;

    void validate() const {
        if (width <= 0 || height <= 0) throw std::invalid_argument("texture size must be positive");
        if (!(stipple_diameter > 0.0)) throw std::invalid_argument("stipple diameter must be > 0");
        if (!(stroke_width > 0.0)) throw std::invalid_argument("stroke width must be > 0");
        if (!(hatch_length_min > 0.0 && hatch_length_min <= hatch_length_max && hatch_length_max <= 1.0))
            throw std::invalid_argument("hatch length range must satisfy 0 < min <= max <= 1");
        if (candidates_per_line < 1) throw std::invalid_argument("candidates_per_line must be >= 1");
        if (lloyd_iters_per_batch < 1) throw std::invalid_argument("lloyd_iters_per_batch must be >= 1");
        if (!(lbg_remove_factor < lbg_split_factor)) throw std::invalid_argument("LBG remove factor must be below split factor");
        if (block_size < 1) throw std::invalid_argument("block size must be >= 1");
    }

    double stipple_area() const { return std::numbers::pi * 0.25 * stipple_diameter * stipple_diameter; }
};

struct TextureInstance {
    TextureSpec spec;
    std::vector<Primitive> primitives;
    Raster raster;
    double measured_density = 0.0;
    double target_density = 0.0;
    // Component densities of a crosshatch overlay.
    std::optional<double> target_h, target_v, measured_h, measured_v;
    std::vector<std::string> warnings;
};

inline void check_target(double target) {
    if (!(target >= 0.0 && target <= 1.0))
        throw std::invalid_argument("target density must lie in [0,1], got " + std::to_string(target));
}

namespace detail {

inline TextureInstance empty_instance(const TextureSpec& spec, double target) {
    TextureInstance t;
    t.spec = spec;
    t.raster = Raster(spec.width, spec.height);
    t.target_density = target;
    t.measured_density = 0.0;
    return t;
}

inline Raster render(const TextureSpec& spec, const std::vector<Primitive>& prims) {
    Raster r(spec.width, spec.height);
    for (const auto& p : prims) rasterize_into(r, p);
    return r;
}

inline std::vector<Primitive> discs_at(const std::vector<Vec2>& sites, double diameter) {
    std::vector<Primitive> out;
    out.reserve(sites.size());
    for (auto s : sites) out.push_back(Disc{s, diameter});
    return out;
}

// A position drawn uniformly over the domain, redrawn a few times while it
// lands on existing ink.
inline Vec2 random_site(std::mt19937_64& rng, const Raster& ink) {
    std::uniform_real_distribution<double> ux(0.0, ink.width());
    std::uniform_real_distribution<double> uy(0.0, ink.height());
    Vec2 p{};
    for (int attempt = 0; attempt < 8; ++attempt) {
        p = {ux(rng), uy(rng)};
        const int x = std::min(ink.width() - 1, static_cast<int>(p.x));
        const int y = std::min(ink.height() - 1, static_cast<int>(p.y));
        if (ink.at(x, y) < 1.0) break;
    }
    return p;
}

struct GrowState {
    std::vector<Vec2> sites;
    std::vector<Primitive> primitives;
    Raster raster;
    double density = 0.0;
};

// Shared insert-relax-measure loop for point based textures. Sites are added
// in batches sized from the observed marginal density gain so the target is
// approached geometrically and crossed by single insertions. Returns the
// closer of the states just below and just above the target.
template <typename RenderFn>
TextureInstance grow_point_texture(double target, const TextureSpec& spec, std::size_t initial,
                                   double tolerance, RenderFn&& render_sites) {
    std::mt19937_64 rng(spec.seed);
    const std::size_t max_sites = static_cast<std::size_t>(spec.width) * spec.height / 4;

    GrowState cur;
    cur.raster = Raster(spec.width, spec.height);
    auto relax_and_measure = [&](GrowState& s) {
        PointSet ps{s.sites, spec.width, spec.height};
        s.sites = lloyd_relax(std::move(ps), nullptr, spec.lloyd_iters_per_batch, spec.lloyd_move_tol).points.points;
        s.primitives = render_sites(s.sites);
        s.raster = render(spec, s.primitives);
        s.density = measure_density(s.raster);
    };

    for (std::size_t i = 0; i < initial; ++i) cur.sites.push_back(random_site(rng, cur.raster));
    relax_and_measure(cur);

    GrowState prev;
    bool have_prev = false;
    std::size_t batch = 1;
    bool reached = cur.density >= target;
    while (!reached && cur.sites.size() < max_sites) {
        prev = cur;
        have_prev = true;
        for (std::size_t i = 0; i < batch; ++i) cur.sites.push_back(random_site(rng, cur.raster));
        relax_and_measure(cur);
        reached = cur.density >= target;
        const double gain = (cur.density - prev.density) / static_cast<double>(batch);
        if (gain > 0.0) {
            const double needed = (target - cur.density) / gain;
            batch = static_cast<std::size_t>(std::clamp(std::floor(0.5 * needed), 1.0,
                                                        static_cast<double>(std::max<std::size_t>(1, cur.sites.size()))));
        } else {
            // Relaxation can eat the gain near saturation; keep growing.
            batch = std::min(2 * batch, std::max<std::size_t>(1, cur.sites.size()));
        }
    }

    const GrowState& best =
        (have_prev && std::abs(prev.density - target) < std::abs(cur.density - target)) ? prev : cur;
    TextureInstance t;
    t.spec = spec;
    t.primitives = best.primitives;
    t.raster = best.raster;
    t.measured_density = best.density;
    t.target_density = target;
    if (std::abs(best.density - target) > tolerance)
        t.warnings.push_back("target density " + std::to_string(target) + " not reachable; measured " +
                             std::to_string(best.density));
    return t;
}

}  // namespace detail

/// Random stipple dots relaxed with Lloyd's algorithm until the coverage
/// reaches the target.
inline TextureInstance gen_stipple(double target, TextureSpec spec) {
    check_target(target);
    spec.texture_type = TextureType::stipple;
    spec.validate();
    if (target == 0.0) return detail::empty_instance(spec, target);
    return detail::grow_point_texture(target, spec, 1, 0.01, [&](const std::vector<Vec2>& sites) {
        return detail::discs_at(sites, spec.stipple_diameter);
    });
}

namespace detail {

inline std::vector<Primitive> triangle_primitives(const std::vector<Vec2>& sites, const TextureSpec& spec) {
    std::vector<Primitive> out;
    if (sites.size() < 3) return out;
    try {
        const auto tri = delaunay(PointSet{sites, spec.width, spec.height});
        out.reserve(tri.triangles.size());
        for (const auto& t : tri.triangles)
            out.push_back(TriangleEdges{sites[t[0]], sites[t[1]], sites[t[2]], spec.stroke_width});
    } catch (const DegenerateInputError&) {
        // Collinear sites draw nothing until a later insertion breaks the tie.
    }
    return out;
}

}  // namespace detail

/// Triangle outlines of a Delaunay triangulation over relaxed random points.
/// Starts from the minimal three-point triangulation, whose density is the
/// connectivity floor; targets below it get the floor and a warning.
inline TextureInstance gen_triangle_texture(double target, TextureSpec spec) {
    check_target(target);
    spec.texture_type = TextureType::triangle;
    spec.validate();
    if (target == 0.0) return detail::empty_instance(spec, target);
    return detail::grow_point_texture(target, spec, 3, 0.02, [&](const std::vector<Vec2>& sites) {
        return detail::triangle_primitives(sites, spec);
    });
}

/// An axis-aligned hatching stroke as placed by the candidate search.
struct HatchLine {
    HatchOrientation orientation = HatchOrientation::horizontal;
    int line = 0;        // row (horizontal) or column (vertical) index
    double start = 0.0;  // along the stroke, clipped to the image
    double length = 0.0;

    Segment segment(double stroke_width) const {
        const double c = line + 0.5;
        if (orientation == HatchOrientation::horizontal)
            return Segment{{start, c}, {start + length, c}, stroke_width};
        return Segment{{c, start}, {c, start + length}, stroke_width};
    }
};

/// Draws one random candidate: random line index, random length in the
/// configured range, random start, clipped to the image.
inline HatchLine random_hatch_candidate(std::mt19937_64& rng, HatchOrientation o, const TextureSpec& spec) {
    const int across = o == HatchOrientation::horizontal ? spec.height : spec.width;
    const double along = o == HatchOrientation::horizontal ? spec.width : spec.height;
    std::uniform_int_distribution<int> line(0, across - 1);
    std::uniform_real_distribution<double> frac(spec.hatch_length_min, spec.hatch_length_max);
    HatchLine h;
    h.orientation = o;
    h.line = line(rng);
    const double len = frac(rng) * spec.width;
    std::uniform_real_distribution<double> start(-0.5 * len, along - 0.5 * len);
    const double s = start(rng);
    const double a = std::max(0.0, s);
    const double b = std::min(along, s + len);
    h.start = a;
    h.length = b - a;
    return h;
}

/// Goodness of a candidate stroke: density it would add summed over every
/// pyramid level, divided by its length in pixels.
inline double hatch_goodness(const Raster& current, const PyramidWeights& weights, const Segment& seg) {
    double added = 0.0;
    for_each_covered_pixel(current.width(), current.height(), seg, [&](int x, int y) {
        const double v = current.at(x, y);
        if (v < 1.0) added += (1.0 - v) * weights.summed_weight(x, y);
    });
    const double len = std::sqrt(norm2(seg.p1 - seg.p0));
    return len > 0.0 ? added / len : 0.0;
}

struct HatchTrace {
    // Candidates and goodness values of the first committed stroke.
    std::vector<HatchLine> first_candidates;
    std::vector<double> first_goodness;
};

/// Hatching with the pyramid goodness criterion: every iteration draws
/// candidates_per_line random strokes and commits the best (ties go to the
/// first). Stops at the state nearest the target.
inline TextureInstance gen_hatch(double target, HatchOrientation orientation, TextureSpec spec,
                                 HatchTrace* trace = nullptr) {
    check_target(target);
    spec.texture_type = orientation == HatchOrientation::horizontal ? TextureType::hatch_h : TextureType::hatch_v;
    spec.validate();
    TextureInstance t = detail::empty_instance(spec, target);
    if (target == 0.0) return t;

    std::mt19937_64 rng(spec.seed);
    const PyramidWeights weights(spec.width, spec.height);
    const double pixels = static_cast<double>(spec.width) * spec.height;
    double covered = 0.0;
    double prev_density = 0.0;
    constexpr int kMaxIdleIterations = 100;
    int idle = 0;
    bool first = true;

    while (true) {
        HatchLine best;
        double best_goodness = -1.0;
        for (int c = 0; c < spec.candidates_per_line; ++c) {
            const HatchLine cand = random_hatch_candidate(rng, orientation, spec);
            const double g = hatch_goodness(t.raster, weights, cand.segment(spec.stroke_width));
            if (trace && first) {
                trace->first_candidates.push_back(cand);
                trace->first_goodness.push_back(g);
            }
            if (g > best_goodness) {
                best_goodness = g;
                best = cand;
            }
        }
        first = false;
        if (!(best_goodness > 0.0)) {
            if (++idle >= kMaxIdleIterations) break;
            continue;
        }
        idle = 0;

        const Segment seg = best.segment(spec.stroke_width);
        std::vector<std::pair<std::size_t, double>> changed;
        for_each_covered_pixel(spec.width, spec.height, seg, [&](int x, int y) {
            double& v = t.raster.at(x, y);
            if (v < 1.0) {
                changed.emplace_back(t.raster.index(x, y), v);
                covered += 1.0 - v;
                v = 1.0;
            }
        });
        t.primitives.push_back(seg);
        const double density = covered / pixels;
        if (density >= target) {
            if (std::abs(prev_density - target) < std::abs(density - target)) {
                for (const auto& [idx, v] : changed) t.raster.values()[idx] = v;
                t.primitives.pop_back();
            }
            t.measured_density = measure_density(t.raster);
            return t;
        }
        prev_density = density;
    }
    t.measured_density = measure_density(t.raster);
    t.warnings.push_back("hatching stalled at density " + std::to_string(t.measured_density) +
                         " below target " + std::to_string(target));
    return t;
}

/// Seed used for the vertical layer of a crosshatch.
inline std::uint64_t vertical_layer_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

inline TextureInstance combine_crosshatch(const TextureInstance& h, const TextureInstance& v, TextureSpec spec) {
    spec.texture_type = TextureType::crosshatch;
    TextureInstance t;
    t.spec = spec;
    t.raster = overlay(h.raster, v.raster);
    t.primitives = h.primitives;
    t.primitives.insert(t.primitives.end(), v.primitives.begin(), v.primitives.end());
    t.measured_density = measure_density(t.raster);
    t.target_h = h.target_density;
    t.target_v = v.target_density;
    t.measured_h = h.measured_density;
    t.measured_v = v.measured_density;
    // The combined density is measured, not set; keep the component sum as the nominal target.
    t.target_density = std::min(1.0, h.target_density + v.target_density);
    t.warnings = h.warnings;
    t.warnings.insert(t.warnings.end(), v.warnings.begin(), v.warnings.end());
    return t;
}

/// Overlay of an independently generated horizontal layer (density d_h) and
/// vertical layer (density d_v).
inline TextureInstance gen_crosshatch(double d_h, double d_v, TextureSpec spec) {
    check_target(d_h);
    check_target(d_v);
    spec.validate();
    TextureSpec vspec = spec;
    vspec.seed = vertical_layer_seed(spec.seed);
    const auto h = gen_hatch(d_h, HatchOrientation::horizontal, spec);
    const auto v = gen_hatch(d_v, HatchOrientation::vertical, vspec);
    return combine_crosshatch(h, v, spec);
}

/// Density levels 0, step, 2*step, ... with 1 always included as the last level.
inline std::vector<double> density_series(double step) {
    if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("step must lie in (0,1]");
    std::vector<double> levels;
    for (int k = 0;; ++k) {
        const double d = k * step;
        if (d >= 1.0 - 1e-9) break;
        levels.push_back(d);
    }
    levels.push_back(1.0);
    return levels;
}

/// The stimulus set of one study. Point and single-orientation types give one
/// texture per level; crosshatch gives the full (d_h, d_v) grid with the
/// fully covered combinations merged into a single stimulus.
inline std::vector<TextureInstance> gen_stimulus_set(TextureType type, double step, const TextureSpec& spec) {
    const auto levels = density_series(step);
    std::vector<TextureInstance> out;
    switch (type) {
        case TextureType::stipple:
            for (double d : levels) out.push_back(gen_stipple(d, spec));
            break;
        case TextureType::triangle:
            for (double d : levels) out.push_back(gen_triangle_texture(d, spec));
            break;
        case TextureType::hatch_h:
            for (double d : levels) out.push_back(gen_hatch(d, HatchOrientation::horizontal, spec));
            break;
        case TextureType::hatch_v:
            for (double d : levels) out.push_back(gen_hatch(d, HatchOrientation::vertical, spec));
            break;
        case TextureType::crosshatch: {
            TextureSpec vspec = spec;
            vspec.seed = vertical_layer_seed(spec.seed);
            std::vector<TextureInstance> hs, vs;
            for (double d : levels) hs.push_back(gen_hatch(d, HatchOrientation::horizontal, spec));
            for (double d : levels) vs.push_back(gen_hatch(d, HatchOrientation::vertical, vspec));
            bool saturated_done = false;
            for (std::size_t i = 0; i < levels.size(); ++i) {
                for (std::size_t j = 0; j < levels.size(); ++j) {
                    const bool saturated = levels[i] >= 1.0 || levels[j] >= 1.0;
                    if (saturated) {
                        if (saturated_done) continue;
                        saturated_done = true;
                        // Represent the merged class by the (1, 1) combination.
                        out.push_back(combine_crosshatch(hs.back(), vs.back(), spec));
                        continue;
                    }
                    out.push_back(combine_crosshatch(hs[i], vs[j], spec));
                }
            }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Weighted Linde-Buzo-Gray stippling

struct LbgOptions {
    double unit_mass = 1.0;  // integrated mass one site should represent
    double split_factor = 1.5;
    double remove_factor = 0.5;
    int max_iters = 100;
    std::uint64_t seed = 0;
};

struct LbgResult {
    PointSet sites;
    int iterations = 0;
    bool converged = false;
};

/// Voronoi loop with cell splitting and removal driven by the integrated mass
/// of each cell. A cell holding more than split_factor * unit_mass splits
/// along its principal axis, one holding less than remove_factor * unit_mass
/// is dropped, every other site moves to its weighted centroid.
inline LbgResult lbg_sites(const Raster& mass, const LbgOptions& opt) {
    require_valid(mass);
    if (!(opt.unit_mass > 0.0)) throw std::invalid_argument("LBG unit mass must be > 0");
    LbgResult result;
    result.sites = PointSet{{}, mass.width(), mass.height()};
    double total = 0.0;
    double peak = 0.0;
    for (double v : mass.values()) {
        if (v < 0.0) throw std::invalid_argument("LBG mass map must be non-negative");
        total += v;
        peak = std::max(peak, v);
    }
    if (total <= 0.0) {
        result.converged = true;
        return result;
    }

    // Seed a handful of sites by rejection sampling the mass map.
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> ux(0.0, mass.width()), uy(0.0, mass.height()), u01(0.0, 1.0);
    const std::size_t initial = static_cast<std::size_t>(std::clamp(std::round(total / opt.unit_mass / 16.0), 1.0, 64.0));
    auto& sites = result.sites.points;
    while (sites.size() < initial) {
        const Vec2 p{ux(rng), uy(rng)};
        const int x = std::min(mass.width() - 1, static_cast<int>(p.x));
        const int y = std::min(mass.height() - 1, static_cast<int>(p.y));
        if (u01(rng) * peak < mass.at(x, y)) sites.push_back(p);
    }

    for (int it = 0; it < opt.max_iters; ++it) {
        result.iterations = it + 1;
        const auto labels = voronoi_labels(result.sites, &mass);
        std::vector<Vec2> next;
        next.reserve(sites.size() * 2);
        int changes = 0;
        for (std::size_t i = 0; i < sites.size(); ++i) {
            const auto& cell = labels.cells[i];
            if (cell.mass < opt.remove_factor * opt.unit_mass) {
                ++changes;
                continue;
            }
            const Vec2 c = cell.centroid();
            if (cell.mass > opt.split_factor * opt.unit_mass) {
                ++changes;
                const double cxx = cell.sxx / cell.mass - c.x * c.x;
                const double cxy = cell.sxy / cell.mass - c.x * c.y;
                const double cyy = cell.syy / cell.mass - c.y * c.y;
                // Principal axis of the 2x2 covariance.
                const double tr = cxx + cyy;
                const double det = cxx * cyy - cxy * cxy;
                const double lambda = 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
                Vec2 axis = std::abs(cxy) > 1e-12 ? Vec2{lambda - cyy, cxy} : (cxx >= cyy ? Vec2{1, 0} : Vec2{0, 1});
                const double n = std::sqrt(norm2(axis));
                axis = (1.0 / n) * axis;
                const double offset = 0.5 * std::sqrt(std::max(lambda, 1e-6));
                next.push_back(result.sites.clamp(c + offset * axis));
                next.push_back(result.sites.clamp(c - offset * axis));
            } else {
                next.push_back(result.sites.clamp(c));
            }
        }
        sites = std::move(next);
        if (changes == 0) {
            result.converged = true;
            break;
        }
        if (sites.empty()) break;
    }
    return result;
}

struct LbgStipple {
    PointSet sites;
    TextureInstance texture;
    int iterations = 0;
    bool converged = false;
};

/// Mean value of each block_size x block_size block (edge blocks use their
/// in-bounds pixels), row major.
struct BlockGrid {
    int block = 32;
    int nx = 0;
    int ny = 0;
    std::vector<double> values;

    double at(int bx, int by) const { return values[static_cast<std::size_t>(by) * nx + bx]; }

    /// Bilinear interpolation between block centres, clamped at the border.
    double sample(double x, double y) const {
        const double fx = std::clamp(x / block - 0.5, 0.0, static_cast<double>(nx - 1));
        const double fy = std::clamp(y / block - 0.5, 0.0, static_cast<double>(ny - 1));
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        const int x1 = std::min(x0 + 1, nx - 1), y1 = std::min(y0 + 1, ny - 1);
        const double u = fx - x0, v = fy - y0;
        return (1 - v) * ((1 - u) * at(x0, y0) + u * at(x1, y0)) + v * ((1 - u) * at(x0, y1) + u * at(x1, y1));
    }
};

inline BlockGrid block_means(const Raster& r, int block) {
    BlockGrid g;
    g.block = block;
    g.nx = (r.width() + block - 1) / block;
    g.ny = (r.height() + block - 1) / block;
    g.values.assign(static_cast<std::size_t>(g.nx) * g.ny, 0.0);
    std::vector<double> count(g.values.size(), 0.0);
    for (int y = 0; y < r.height(); ++y)
        for (int x = 0; x < r.width(); ++x) {
            const std::size_t b = static_cast<std::size_t>(y / block) * g.nx + x / block;
            g.values[b] += r.at(x, y);
            count[b] += 1.0;
        }
    for (std::size_t b = 0; b < g.values.size(); ++b) g.values[b] /= count[b];
    return g;
}

/// Stipples a density map in [0,1]: each stipple represents one disc area of
/// target ink. Later passes scale the mass of every block by how far the
/// previous result fell short, and the pass with the lowest block error wins.
inline LbgStipple lbg_stipple(const Raster& density_map, TextureSpec spec) {
    require_valid(density_map);
    spec.texture_type = TextureType::stipple;
    spec.width = density_map.width();
    spec.height = density_map.height();
    spec.validate();
    for (double v : density_map.values())
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("density map values must lie in [0,1]");
    LbgOptions opt;
    opt.unit_mass = spec.stipple_area();
    opt.split_factor = spec.lbg_split_factor;
    opt.remove_factor = spec.lbg_remove_factor;
    opt.max_iters = spec.lbg_max_iters;
    opt.seed = spec.seed;

    const BlockGrid goal = block_means(density_map, spec.block_size);
    BlockGrid gain = goal;
    std::fill(gain.values.begin(), gain.values.end(), 1.0);
    Raster mass = density_map;

    LbgStipple best;
    double best_err = std::numeric_limits<double>::infinity();
    for (int pass = 0; pass <= spec.lbg_correction_passes; ++pass) {
        auto lbg = lbg_sites(mass, opt);
        LbgStipple out;
        out.sites = lbg.sites;
        out.iterations = lbg.iterations;
        out.converged = lbg.converged;
        out.texture.spec = spec;
        out.texture.primitives = detail::discs_at(lbg.sites.points, spec.stipple_diameter);
        out.texture.raster = detail::render(spec, out.texture.primitives);
        out.texture.measured_density = measure_density(out.texture.raster);
        out.texture.target_density = measure_density(density_map);

        const BlockGrid got = block_means(out.texture.raster, spec.block_size);
        double err = 0.0;
        for (std::size_t b = 0; b < got.values.size(); ++b) err += std::abs(got.values[b] - goal.values[b]);
        if (err < best_err) {
            best_err = err;
            best = std::move(out);
        }
        if (pass == spec.lbg_correction_passes) break;
        for (std::size_t b = 0; b < gain.values.size(); ++b) {
            if (goal.values[b] <= 0.0) continue;
            const double ratio = goal.values[b] / std::max(got.values[b], 0.25 * goal.values[b]);
            gain.values[b] = std::clamp(gain.values[b] * ratio, 0.25, 8.0);
        }
        for (int y = 0; y < mass.height(); ++y)
            for (int x = 0; x < mass.width(); ++x)
                mass.at(x, y) = density_map.at(x, y) * gain.sample(x + 0.5, y + 0.5);
    }
    return best;
}

}  // namespace ptex
