#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "ptex/texture_synth.hpp"

using namespace ptex;

namespace {

double pixel_count_density(const Raster& r) {
    double covered = 0;
    for (double v : r.values()) covered += v;
    return covered / (static_cast<double>(r.width()) * r.height());
}

int disc_pixel_area(double diameter) {
    Raster r(64, 64);
    rasterize_into(r, Disc{{32.5, 32.5}, diameter});
    int n = 0;
    for (double v : r.values()) n += v > 0;
    return n;
}

// Goodness recomputed from scratch: draw the stroke alone, build the mean
// pyramid and add up the density of every level.
double rescored_goodness(const TextureSpec& spec, const HatchLine& h) {
    Raster r(spec.width, spec.height);
    const Segment seg = h.segment(spec.stroke_width);
    rasterize_into(r, seg);
    double added = 0;
    for (const auto& level : build_pyramid(r).levels) added += measure_density(level);
    return added / h.length;
}

bool same_pixels(const Raster& a, const Raster& b) {
    return a.width() == b.width() && a.height() == b.height() && std::ranges::equal(a.values(), b.values());
}

double region_density(const Raster& r, int x0, int x1) {
    double s = 0;
    for (int y = 0; y < r.height(); ++y)
        for (int x = x0; x < x1; ++x) s += r.at(x, y);
    return s / (static_cast<double>(x1 - x0) * r.height());
}

}  // namespace

TEST(Synth, DefaultSpec) {
    const TextureSpec s;
    EXPECT_EQ(s.width, 512);
    EXPECT_EQ(s.height, 512);
    EXPECT_EQ(s.stipple_diameter, 8.0);
    EXPECT_EQ(s.stroke_width, 3.0);
    EXPECT_EQ(s.hatch_length_min, 0.3);
    EXPECT_EQ(s.hatch_length_max, 1.0);
    EXPECT_EQ(s.candidates_per_line, 64);
}

TEST(Synth, InvalidInputsThrow) {
    TextureSpec s;
    EXPECT_THROW(gen_stipple(-0.1, s), std::invalid_argument);
    EXPECT_THROW(gen_hatch(1.5, HatchOrientation::vertical, s), std::invalid_argument);
    s.hatch_length_min = 0.8;
    s.hatch_length_max = 0.5;
    EXPECT_THROW(gen_hatch(0.2, HatchOrientation::vertical, s), std::invalid_argument);
    EXPECT_THROW(parse_texture_type("plaid"), std::invalid_argument);
    EXPECT_EQ(parse_texture_type("hatch"), TextureType::crosshatch);
}

TEST(Synth, ZeroTargetGivesEmptyTextures) {
    const TextureSpec s;
    for (const auto& t : {gen_stipple(0, s), gen_triangle_texture(0, s), gen_hatch(0, HatchOrientation::horizontal, s),
                          gen_crosshatch(0, 0, s)}) {
        EXPECT_TRUE(t.primitives.empty());
        EXPECT_EQ(t.measured_density, 0.0);
        EXPECT_EQ(pixel_count_density(t.raster), 0.0);
    }
}

TEST(Synth, StippleHitsTargetWithExpectedDotCount) {
    TextureSpec s;
    s.seed = 7;
    const auto t = gen_stipple(0.30, s);
    const double d = pixel_count_density(t.raster);
    EXPECT_GE(d, 0.29);
    EXPECT_LE(d, 0.31);
    EXPECT_NEAR(t.measured_density, d, 1e-12);
    const double expected = 0.30 * 512 * 512 / disc_pixel_area(8.0);
    EXPECT_NEAR(static_cast<double>(t.primitives.size()), expected, 0.1 * expected);
    for (const auto& p : t.primitives) EXPECT_TRUE(std::holds_alternative<Disc>(p));
    EXPECT_TRUE(t.warnings.empty());
}

TEST(Synth, StippleSaturates) {
    const auto t = gen_stipple(1.0, TextureSpec{});
    EXPECT_EQ(t.measured_density, 1.0);
}

TEST(Synth, TriangleHitsTarget) {
    TextureSpec s;
    s.seed = 3;
    const auto t = gen_triangle_texture(0.5, s);
    const double d = pixel_count_density(t.raster);
    EXPECT_GE(d, 0.48);
    EXPECT_LE(d, 0.52);
    for (const auto& p : t.primitives) EXPECT_TRUE(std::holds_alternative<TriangleEdges>(p));
}

TEST(Synth, TriangleBelowFloorWarns) {
    TextureSpec s;
    s.seed = 3;
    const auto t = gen_triangle_texture(0.02, s);
    if (t.measured_density > 0.04)
        EXPECT_FALSE(t.warnings.empty());
    else
        EXPECT_LE(std::abs(t.measured_density - 0.02), 0.02);
    EXPECT_GE(t.primitives.size(), 1u);
}

TEST(Synth, HatchHitsTargetWithHorizontalStrokes) {
    TextureSpec s;
    s.seed = 11;
    const auto t = gen_hatch(0.2, HatchOrientation::horizontal, s);
    const double d = pixel_count_density(t.raster);
    EXPECT_GE(d, 0.19);
    EXPECT_LE(d, 0.21);
    ASSERT_FALSE(t.primitives.empty());
    for (const auto& p : t.primitives) {
        const auto& seg = std::get<Segment>(p);
        EXPECT_EQ(seg.p0.y, seg.p1.y);
        EXPECT_GE(seg.p0.x, 0.0);
        EXPECT_LE(seg.p1.x, 512.0);
        const double len = seg.p1.x - seg.p0.x;
        EXPECT_GT(len, 0.0);
        EXPECT_LE(len, 512.0);
    }
}

TEST(Synth, VerticalHatchStrokesAreVertical) {
    TextureSpec s;
    s.seed = 5;
    const auto t = gen_hatch(0.3, HatchOrientation::vertical, s);
    EXPECT_NEAR(t.measured_density, 0.3, 0.01);
    for (const auto& p : t.primitives) EXPECT_EQ(std::get<Segment>(p).p0.x, std::get<Segment>(p).p1.x);
}

TEST(Synth, FirstHatchCandidatesMatchRescoring) {
    TextureSpec s;
    s.seed = 11;
    HatchTrace trace;
    const auto t = gen_hatch(0.05, HatchOrientation::horizontal, s, &trace);
    ASSERT_EQ(trace.first_candidates.size(), 64u);
    std::size_t best = 0;
    for (std::size_t i = 0; i < trace.first_candidates.size(); ++i) {
        const double g = rescored_goodness(s, trace.first_candidates[i]);
        EXPECT_NEAR(trace.first_goodness[i], g, 1e-9 * g);
        if (g > rescored_goodness(s, trace.first_candidates[best]) * (1 + 1e-12)) best = i;
    }
    // Committed stroke is the top-ranked candidate.
    const Segment committed = std::get<Segment>(t.primitives.front());
    const Segment expected = trace.first_candidates[best].segment(s.stroke_width);
    EXPECT_EQ(committed.p0.x, expected.p0.x);
    EXPECT_EQ(committed.p0.y, expected.p0.y);
    EXPECT_EQ(committed.p1.x, expected.p1.x);
}

TEST(Synth, HatchGoodnessRankingMatchesOnPartialTexture) {
    // Goodness on a non-empty texture is the pyramid-wide gain of the new pixels only.
    TextureSpec s;
    s.width = 96;
    s.height = 80;
    Raster current(s.width, s.height);
    rasterize_into(current, Segment{{10, 20.5}, {80, 20.5}, 3.0});
    rasterize_into(current, Segment{{40.5, 0}, {40.5, 70}, 3.0});
    const PyramidWeights w(s.width, s.height);
    std::mt19937_64 rng(99);
    const auto base = build_pyramid(current);
    for (int i = 0; i < 50; ++i) {
        const HatchLine h = random_hatch_candidate(rng, i % 2 ? HatchOrientation::vertical : HatchOrientation::horizontal, s);
        const Segment seg = h.segment(s.stroke_width);
        Raster next = current;
        rasterize_into(next, seg);
        const auto after = build_pyramid(next);
        double added = 0;
        for (std::size_t k = 0; k < after.levels.size(); ++k)
            added += measure_density(after.levels[k]) - measure_density(base.levels[k]);
        EXPECT_NEAR(hatch_goodness(current, w, seg), added / h.length, 1e-9);
    }
}

TEST(Synth, HatchCandidatesRespectLengthRangeAndBounds) {
    TextureSpec s;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 2000; ++i) {
        const auto h = random_hatch_candidate(rng, HatchOrientation::horizontal, s);
        EXPECT_GE(h.start, 0.0);
        EXPECT_LE(h.start + h.length, 512.0 + 1e-9);
        EXPECT_LE(h.length, 512.0 + 1e-9);
        EXPECT_GT(h.length, 0.0);
        EXPECT_GE(h.line, 0);
        EXPECT_LT(h.line, 512);
    }
}

TEST(Synth, HatchSegmentsArePairwiseDistinct) {
    TextureSpec s;
    s.seed = 21;
    const auto t = gen_hatch(0.6, HatchOrientation::horizontal, s);
    std::set<std::tuple<double, double, double>> seen;
    for (const auto& p : t.primitives) {
        const auto& seg = std::get<Segment>(p);
        EXPECT_TRUE(seen.insert({seg.p0.y, seg.p0.x, seg.p1.x}).second);
    }
}

TEST(Synth, CommittingPrimitivesNeverLowersDensity) {
    TextureSpec s;
    s.seed = 4;
    const auto t = gen_hatch(0.4, HatchOrientation::vertical, s);
    Raster r(s.width, s.height);
    double prev = 0;
    for (const auto& p : t.primitives) {
        rasterize_into(r, p);
        const double d = measure_density(r);
        ASSERT_GE(d, prev);
        prev = d;
    }
    EXPECT_TRUE(same_pixels(r, t.raster));
}

TEST(Synth, CrosshatchDegeneratesToHatch) {
    TextureSpec s;
    s.seed = 9;
    const auto c = gen_crosshatch(0.2, 0, s);
    const auto h = gen_hatch(0.2, HatchOrientation::horizontal, s);
    EXPECT_TRUE(same_pixels(c.raster, h.raster));
    EXPECT_EQ(c.primitives.size(), h.primitives.size());
    EXPECT_EQ(c.measured_density, h.measured_density);
}

TEST(Synth, CrosshatchBoundsAndSaturation) {
    TextureSpec s;
    s.seed = 9;
    const auto c = gen_crosshatch(0.2, 0.2, s);
    EXPECT_GE(c.measured_density, std::max(*c.measured_h, *c.measured_v));
    EXPECT_LE(c.measured_density, std::min(1.0, *c.measured_h + *c.measured_v) + 1e-12);
    EXPECT_GE(c.measured_density, 0.19);
    EXPECT_LE(c.measured_density, 0.41);
    EXPECT_NEAR(c.measured_density, pixel_count_density(c.raster), 1e-12);
    EXPECT_EQ(gen_crosshatch(1.0, 0.4, s).measured_density, 1.0);
    EXPECT_EQ(gen_crosshatch(0.0, 1.0, s).measured_density, 1.0);
}

TEST(Synth, StimulusSetSizes) {
    EXPECT_EQ(density_series(0.05).size(), 21u);
    EXPECT_EQ(density_series(0.2).size(), 6u);
    EXPECT_EQ(density_series(0.5), (std::vector<double>{0.0, 0.5, 1.0}));
    const auto odd = density_series(0.3);
    const std::vector<double> expected{0.0, 0.3, 0.6, 0.9, 1.0};
    ASSERT_EQ(odd.size(), expected.size());
    for (std::size_t i = 0; i < odd.size(); ++i) EXPECT_NEAR(odd[i], expected[i], 1e-12);
    EXPECT_THROW(density_series(0.0), std::invalid_argument);

    TextureSpec s;
    s.width = s.height = 128;
    const auto set = gen_stimulus_set(TextureType::hatch_h, 0.5, s);
    ASSERT_EQ(set.size(), 3u);
    EXPECT_EQ(set[0].measured_density, 0.0);
    EXPECT_NEAR(set[1].measured_density, 0.5, 0.01);
    EXPECT_EQ(set[2].measured_density, 1.0);
}

TEST(Synth, CrosshatchStimulusGrid) {
    TextureSpec s;
    s.seed = 2;
    const auto set = gen_stimulus_set(TextureType::crosshatch, 0.2, s);
    ASSERT_EQ(set.size(), 26u);
    int saturated = 0;
    std::set<std::pair<double, double>> pairs;
    for (const auto& t : set) {
        ASSERT_TRUE(t.target_h && t.target_v);
        EXPECT_TRUE(pairs.insert({*t.target_h, *t.target_v}).second);
        EXPECT_GE(t.measured_density, std::max(*t.measured_h, *t.measured_v));
        EXPECT_LE(t.measured_density, std::min(1.0, *t.measured_h + *t.measured_v) + 1e-12);
        if (*t.target_h < 1.0 && *t.target_v < 1.0) {
            EXPECT_NEAR(*t.measured_h, *t.target_h, 0.01);
            EXPECT_NEAR(*t.measured_v, *t.target_v, 0.01);
        } else {
            ++saturated;
            EXPECT_EQ(t.measured_density, 1.0);
        }
    }
    EXPECT_EQ(saturated, 1);
}

TEST(Synth, Deterministic) {
    TextureSpec s;
    s.seed = 17;
    const auto a = gen_stipple(0.2, s), b = gen_stipple(0.2, s);
    EXPECT_TRUE(same_pixels(a.raster, b.raster));
    EXPECT_EQ(a.primitives.size(), b.primitives.size());
    const auto h1 = gen_hatch(0.3, HatchOrientation::horizontal, s), h2 = gen_hatch(0.3, HatchOrientation::horizontal, s);
    EXPECT_TRUE(same_pixels(h1.raster, h2.raster));
    s.width = s.height = 160;
    const auto t1 = gen_triangle_texture(0.3, s), t2 = gen_triangle_texture(0.3, s);
    EXPECT_TRUE(same_pixels(t1.raster, t2.raster));
    const auto other = gen_triangle_texture(0.3, TextureSpec{.width = 160, .height = 160, .seed = 18});
    EXPECT_FALSE(same_pixels(t1.raster, other.raster));
}

TEST(Lbg, EmptyMapGivesNoStipples) {
    const auto r = lbg_stipple(Raster(128, 128), TextureSpec{});
    EXPECT_TRUE(r.sites.empty());
    EXPECT_EQ(r.texture.measured_density, 0.0);
}

TEST(Lbg, RejectsOutOfRangeMaps) {
    Raster m(16, 16);
    m.at(3, 3) = 1.5;
    EXPECT_THROW(lbg_stipple(m, TextureSpec{}), std::invalid_argument);
}

TEST(Lbg, ConstantMap) {
    Raster m(512, 512);
    for (double& v : m.values()) v = 0.3;
    TextureSpec s;
    s.seed = 5;
    const auto r = lbg_stipple(m, s);
    const double d = pixel_count_density(r.texture.raster);
    EXPECT_GE(d, 0.27);
    EXPECT_LE(d, 0.33);
    const auto got = block_means(r.texture.raster, 32);
    double mae = 0;
    for (double v : got.values) mae += std::abs(v - 0.3);
    EXPECT_LE(mae / got.values.size(), 0.05);
}

TEST(Lbg, TwoHalves) {
    Raster m(512, 512);
    for (int y = 0; y < 512; ++y)
        for (int x = 0; x < 512; ++x) m.at(x, y) = x < 256 ? 0.6 : 0.1;
    TextureSpec s;
    s.seed = 8;
    const auto r = lbg_stipple(m, s);
    EXPECT_NEAR(region_density(r.texture.raster, 0, 256), 0.6, 0.05);
    EXPECT_NEAR(region_density(r.texture.raster, 256, 512), 0.1, 0.05);
    int left = 0, right = 0;
    for (const auto& p : r.sites.points) (p.x < 256 ? left : right)++;
    ASSERT_GT(right, 0);
    EXPECT_NEAR(static_cast<double>(left) / right, 6.0, 0.25 * 6.0);
}

TEST(Lbg, SitesFollowMass) {
    Raster mass(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 32; ++x) mass.at(x, y) = 1.0;
    LbgOptions opt;
    opt.unit_mass = 64.0;
    const auto r = lbg_sites(mass, opt);
    EXPECT_TRUE(r.converged);
    // 2048 units of mass at 64 per site; splitting and removal keep each cell in [0.5, 1.5] units.
    EXPECT_GE(r.sites.size(), 2048 / 96u);
    EXPECT_LE(r.sites.size(), 2048 / 32u);
    for (const auto& p : r.sites.points) EXPECT_LE(p.x, 32.0);
}

TEST(Lbg, BlockMeansAndSampling) {
    Raster r(70, 40);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 70; ++x) r.at(x, y) = x < 32 ? 1.0 : 0.0;
    const auto g = block_means(r, 32);
    EXPECT_EQ(g.nx, 3);
    EXPECT_EQ(g.ny, 2);
    EXPECT_EQ(g.at(0, 0), 1.0);
    EXPECT_EQ(g.at(1, 1), 0.0);
    EXPECT_EQ(g.sample(16, 16), 1.0);
    EXPECT_DOUBLE_EQ(g.sample(32, 16), 0.5);
    EXPECT_EQ(g.sample(-100, -100), 1.0);
}
