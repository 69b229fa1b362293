#pragma once

// Continuous texture maps: a scalar field in [0,1] is read as perceived
// position, mapped to a density per pixel and synthesized with a spatially
// varying target.

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptex/geometry.hpp"
#include "ptex/reparam.hpp"
#include "ptex/texture_synth.hpp"

namespace ptex {

struct ContinuousResult {
    TextureInstance texture;
    Raster target;  // per-pixel target density
    BlockGrid target_blocks;
    BlockGrid measured_blocks;
    double block_mae = 0.0;
    std::vector<std::string> warnings;
};

inline Raster target_density_map(const Raster& field, const PerceptualMapping& mapping) {
    require_valid(field);
    Raster out(field.width(), field.height());
    auto f = field.values();
    auto o = out.values();
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!(f[i] >= 0.0 && f[i] <= 1.0)) throw std::invalid_argument("field values must lie in [0,1]");
        o[i] = std::clamp(mapping.density(f[i]), 0.0, 1.0);
    }
    return out;
}

/// Lattice point density (points per pixel) at which a Delaunay mesh of
/// near-equilateral triangles with the given stroke width reaches coverage d.
inline double triangle_point_density(double d, double stroke_width) {
    if (d <= 0.0) return 0.0;
    d = std::min(d, 1.0);
    const double side = std::sqrt(3.0) * stroke_width / (1.0 - std::sqrt(1.0 - d));
    return 1.0 / (0.5 * std::sqrt(3.0) * side * side);
}

namespace detail {

// Horizontal hatching towards a per-block target. Candidates are cut down to
// the longest run of blocks along their row that still lack at least half of
// what one stroke adds, then ranked by the pyramid goodness.
inline TextureInstance hatch_to_map(const Raster& target, const TextureSpec& spec) {
    TextureInstance t = empty_instance(spec, measure_density(target));
    const int w = spec.width;
    const int h = spec.height;
    const int block = spec.block_size;
    const BlockGrid goal = block_means(target, block);
    BlockGrid have = goal;
    std::fill(have.values.begin(), have.values.end(), 0.0);
    std::vector<double> block_pixels(have.values.size(), 0.0);
    for (int by = 0; by < goal.ny; ++by)
        for (int bx = 0; bx < goal.nx; ++bx)
            block_pixels[static_cast<std::size_t>(by) * goal.nx + bx] =
                static_cast<double>(std::min(block, w - bx * block)) * std::min(block, h - by * block);

    std::mt19937_64 rng(spec.seed);
    const PyramidWeights weights(w, h);
    constexpr int kMaxIdleIterations = 100;
    int idle = 0;
    while (idle < kMaxIdleIterations) {
        HatchLine best;
        double best_goodness = 0.0;
        for (int c = 0; c < spec.candidates_per_line; ++c) {
            HatchLine cand = random_hatch_candidate(rng, HatchOrientation::horizontal, spec);
            const int by = std::min(cand.line / block, goal.ny - 1);
            auto hungry = [&](int bx) {
                const std::size_t b = static_cast<std::size_t>(by) * goal.nx + bx;
                const double stroke = spec.stroke_width * std::min(block, w - bx * block) / block_pixels[b];
                return goal.values[b] - have.values[b] >= 0.5 * stroke;
            };
            const int b0 = std::clamp(static_cast<int>(cand.start) / block, 0, goal.nx - 1);
            const int b1 = std::clamp(static_cast<int>(std::ceil(cand.start + cand.length)) / block, 0, goal.nx - 1);
            int run_lo = -1, run_hi = -1, lo = -1;
            for (int bx = b0; bx <= b1 + 1; ++bx) {
                if (bx <= b1 && hungry(bx)) {
                    if (lo < 0) lo = bx;
                    continue;
                }
                if (lo >= 0 && (run_lo < 0 || bx - lo > run_hi - run_lo + 1)) {
                    run_lo = lo;
                    run_hi = bx - 1;
                }
                lo = -1;
            }
            if (run_lo < 0) continue;
            const double a = std::max(cand.start, static_cast<double>(run_lo * block));
            const double e = std::min(cand.start + cand.length, static_cast<double>(std::min(w, (run_hi + 1) * block)));
            if (!(e - a >= 1.0)) continue;
            cand.start = a;
            cand.length = e - a;
            const double g = hatch_goodness(t.raster, weights, cand.segment(spec.stroke_width));
            if (g > best_goodness) {
                best_goodness = g;
                best = cand;
            }
        }
        if (!(best_goodness > 0.0)) {
            ++idle;
            continue;
        }
        idle = 0;
        const Segment seg = best.segment(spec.stroke_width);
        for_each_covered_pixel(w, h, seg, [&](int x, int y) {
            double& v = t.raster.at(x, y);
            if (v < 1.0) {
                const std::size_t b = static_cast<std::size_t>(y / block) * goal.nx + x / block;
                have.values[b] += (1.0 - v) / block_pixels[b];
                v = 1.0;
            }
        });
        t.primitives.push_back(seg);
    }
    t.measured_density = measure_density(t.raster);
    return t;
}

inline TextureInstance triangles_to_map(const Raster& target, const TextureSpec& spec) {
    Raster mass(target.width(), target.height());
    auto tv = target.values();
    auto mv = mass.values();
    for (std::size_t i = 0; i < tv.size(); ++i) mv[i] = triangle_point_density(tv[i], spec.stroke_width);
    LbgOptions opt;
    opt.unit_mass = 1.0;
    opt.split_factor = spec.lbg_split_factor;
    opt.remove_factor = spec.lbg_remove_factor;
    opt.max_iters = spec.lbg_max_iters;
    opt.seed = spec.seed;
    const auto lbg = lbg_sites(mass, opt);
    TextureInstance t = empty_instance(spec, measure_density(target));
    t.primitives = triangle_primitives(lbg.sites.points, spec);
    t.raster = render(spec, t.primitives);
    t.measured_density = measure_density(t.raster);
    return t;
}

}  // namespace detail

/// Synthesizes a texture whose local density follows mapping(field).
/// Hatching uses horizontal strokes. Triangle meshes cannot follow low or
/// sharply varying targets; blocks off by more than 0.05 are reported.
inline ContinuousResult continuous_map(const Raster& field, const PerceptualMapping& mapping, TextureType type,
                                       TextureSpec spec) {
    require_valid(field);
    spec.width = field.width();
    spec.height = field.height();
    spec.validate();
    ContinuousResult out;
    out.target = target_density_map(field, mapping);
    switch (type) {
        case TextureType::stipple: out.texture = lbg_stipple(out.target, spec).texture; break;
        case TextureType::triangle:
            spec.texture_type = TextureType::triangle;
            out.texture = detail::triangles_to_map(out.target, spec);
            break;
        case TextureType::hatch_h:
        case TextureType::hatch_v:
        case TextureType::crosshatch:
            spec.texture_type = TextureType::hatch_h;
            out.texture = detail::hatch_to_map(out.target, spec);
            break;
    }
    out.target_blocks = block_means(out.target, spec.block_size);
    out.measured_blocks = block_means(out.texture.raster, spec.block_size);
    int off = 0;
    for (std::size_t b = 0; b < out.target_blocks.values.size(); ++b) {
        const double err = std::abs(out.measured_blocks.values[b] - out.target_blocks.values[b]);
        out.block_mae += err;
        if (err > 0.05) ++off;
    }
    out.block_mae /= static_cast<double>(out.target_blocks.values.size());
    if (type == TextureType::triangle && off > 0)
        out.warnings.push_back(std::to_string(off) + " of " + std::to_string(out.target_blocks.values.size()) +
                               " blocks deviate from the target density by more than 0.05");
    out.texture.warnings.insert(out.texture.warnings.end(), out.warnings.begin(), out.warnings.end());
    return out;
}

}  // namespace ptex
