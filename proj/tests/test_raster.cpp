#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ptex/image_io.hpp"
#include "ptex/raster.hpp"

using namespace ptex;

namespace {

// Per-pixel scans written independently of the library's span logic.
int brute_disc_count(int w, int h, double cx, double cy, double diameter) {
    const double r2 = 0.25 * diameter * diameter;
    int n = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy <= r2) ++n;
        }
    return n;
}

double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double l2 = vx * vx + vy * vy;
    double t = l2 == 0 ? 0 : ((px - ax) * vx + (py - ay) * vy) / l2;
    t = t < 0 ? 0 : (t > 1 ? 1 : t);
    const double qx = ax + t * vx - px, qy = ay + t * vy - py;
    return std::sqrt(qx * qx + qy * qy);
}

Raster brute_segment(int w, int h, Vec2 a, Vec2 b, double width) {
    Raster r(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (dist_to_segment(x + 0.5, y + 0.5, a.x, a.y, b.x, b.y) <= 0.5 * width) r.at(x, y) = 1.0;
    return r;
}

Raster random_binary(int w, int h, double p, unsigned seed) {
    std::mt19937 rng(seed);
    std::bernoulli_distribution b(p);
    Raster r(w, h);
    for (auto& v : r.values()) v = b(rng) ? 1.0 : 0.0;
    return r;
}

}  // namespace

TEST(Raster, RejectsZeroSize) {
    EXPECT_THROW(Raster(0, 5), std::invalid_argument);
    EXPECT_THROW(Raster(5, -1), std::invalid_argument);
    Raster empty;
    EXPECT_THROW(rasterize_into(empty, Disc{{1, 1}, 2}), std::invalid_argument);
    EXPECT_THROW(measure_density(empty), std::invalid_argument);
}

TEST(Raster, RejectsBadPrimitives) {
    Raster r(8, 8);
    EXPECT_THROW(rasterize_into(r, Disc{{1, 1}, 0.0}), std::invalid_argument);
    EXPECT_THROW(rasterize_into(r, Segment{{0, 0}, {4, 4}, -1.0}), std::invalid_argument);
}

TEST(Raster, CenteredDiscMatchesPointInDiscScan) {
    Raster r(512, 512);
    rasterize_into(r, Disc{{256, 256}, 8});
    const int oracle = brute_disc_count(512, 512, 256, 256, 8);
    EXPECT_DOUBLE_EQ(measure_density(r) * 512 * 512, oracle);
    EXPECT_NEAR(measure_density(r), std::acos(-1.0) * 16 / 262144.0, 8.0 / 262144.0);
}

TEST(Raster, TinyDiscBetweenCentersCoversNothing) {
    Raster r(16, 16);
    rasterize_into(r, Disc{{4.0, 4.0}, 0.5});
    EXPECT_EQ(measure_density(r), 0.0);
}

TEST(Raster, RandomDiscsMatchScan) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> pos(-10, 74), dia(0.3, 20);
    for (int i = 0; i < 300; ++i) {
        const double cx = pos(rng), cy = pos(rng), d = dia(rng);
        Raster r(64, 48);
        rasterize_into(r, Disc{{cx, cy}, d});
        ASSERT_EQ(measure_density(r) * 64 * 48, brute_disc_count(64, 48, cx, cy, d)) << cx << "," << cy << "," << d;
    }
}

TEST(Raster, HorizontalSegmentOnSmallGrid) {
    Raster r(8, 8);
    rasterize_into(r, Segment{{0, 4}, {8, 4}, 3});
    EXPECT_EQ(r, brute_segment(8, 8, {0, 4}, {8, 4}, 3));
    // Rows with centres 3.5 and 4.5 are within 1.5 of y=4; 2.5 and 5.5 too (distance exactly 1.5).
    for (int x = 0; x < 8; ++x) {
        EXPECT_EQ(r.at(x, 1), 0.0);
        for (int y = 2; y <= 5; ++y) EXPECT_EQ(r.at(x, y), 1.0);
        EXPECT_EQ(r.at(x, 6), 0.0);
    }
}

TEST(Raster, RandomSegmentsMatchDistanceScan) {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> pos(-8, 72), wid(0.5, 9);
    for (int i = 0; i < 300; ++i) {
        const Vec2 a{pos(rng), pos(rng)};
        const Vec2 b = i % 10 == 0 ? a : Vec2{pos(rng), pos(rng)};
        const double w = wid(rng);
        Raster r(64, 64);
        rasterize_into(r, Segment{a, b, w});
        ASSERT_EQ(r, brute_segment(64, 64, a, b, w)) << i;
    }
}

TEST(Raster, TriangleEdgesAreThreeCapsules) {
    const Vec2 v0{5, 5}, v1{50, 12}, v2{20, 58};
    Raster r(64, 64);
    rasterize_into(r, TriangleEdges{v0, v1, v2, 3});
    const Raster oracle = overlay(overlay(brute_segment(64, 64, v0, v1, 3), brute_segment(64, 64, v1, v2, 3)),
                                  brute_segment(64, 64, v2, v0, 3));
    EXPECT_EQ(r, oracle);
}

TEST(Raster, DensityOfConstantRasters) {
    EXPECT_EQ(measure_density(Raster(512, 512, 0.0)), 0.0);
    EXPECT_EQ(measure_density(Raster(512, 512, 1.0)), 1.0);
}

TEST(Raster, RasterizeIsMonotoneAndDeterministic) {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> pos(0, 128);
    Raster r(128, 128), again(128, 128);
    double prev = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Primitive p = i % 3 == 0   ? Primitive(Disc{{pos(rng), pos(rng)}, 8})
                            : i % 3 == 1 ? Primitive(Segment{{pos(rng), pos(rng)}, {pos(rng), pos(rng)}, 3})
                                         : Primitive(TriangleEdges{{pos(rng), pos(rng)}, {pos(rng), pos(rng)}, {pos(rng), pos(rng)}, 3});
        const Raster before = r;
        rasterize_into(r, p);
        rasterize_into(again, p);
        for (std::size_t k = 0; k < r.size(); ++k) ASSERT_GE(r.values()[k], before.values()[k]);
        const double d = measure_density(r);
        ASSERT_GE(d, prev);
        prev = d;
    }
    EXPECT_EQ(r, again);
}

TEST(Raster, PyramidShapesAndBlockMeans) {
    const auto p = build_pyramid(Raster(4, 4, 1.0));
    ASSERT_EQ(p.levels.size(), 3u);
    EXPECT_EQ(p.levels[1].width(), 2);
    EXPECT_EQ(p.levels[2].width(), 1);
    for (const auto& l : p.levels)
        for (double v : l.values()) EXPECT_EQ(v, 1.0);

    Raster two(2, 2);
    two.at(0, 0) = 1.0;
    EXPECT_DOUBLE_EQ(build_pyramid(two).levels.back().at(0, 0), 0.25);
}

TEST(Raster, PyramidOddSizesUseCeilingAndKeepMean) {
    for (auto [w, h] : {std::pair{512, 512}, {37, 11}, {1, 9}, {100, 3}}) {
        const Raster r = random_binary(w, h, 0.37, w * 31 + h);
        const auto p = build_pyramid(r);
        for (std::size_t k = 1; k < p.levels.size(); ++k) {
            EXPECT_EQ(p.levels[k].width(), (p.levels[k - 1].width() + 1) / 2);
            EXPECT_EQ(p.levels[k].height(), (p.levels[k - 1].height() + 1) / 2);
        }
        EXPECT_EQ(p.levels.back().width(), 1);
        EXPECT_EQ(p.levels.back().height(), 1);
        if (w == 512) EXPECT_NEAR(p.levels.back().at(0, 0), measure_density(r), 1e-9);
    }
}

TEST(Raster, EdgeBlocksAverageInBoundsPixels) {
    Raster r(3, 1, 0.0);
    r.at(2, 0) = 1.0;
    const Raster d = downsample_mean(r);
    ASSERT_EQ(d.width(), 2);
    EXPECT_EQ(d.at(0, 0), 0.0);
    EXPECT_EQ(d.at(1, 0), 1.0);  // lone pixel, not diluted by out-of-bounds zeros
}

TEST(Raster, PyramidWeightsMatchLevelMeans) {
    // Summed mean change over all levels when a single pixel is inked.
    for (auto [w, h] : {std::pair{16, 16}, {13, 7}, {5, 1}}) {
        const PyramidWeights pw(w, h);
        EXPECT_EQ(pw.level_count(), build_pyramid(Raster(w, h)).levels.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                Raster r(w, h);
                r.at(x, y) = 1.0;
                double total = 0.0;
                for (const auto& l : build_pyramid(r).levels) total += measure_density(l);
                ASSERT_NEAR(pw.summed_weight(x, y), total, 1e-12) << w << "x" << h << " @" << x << "," << y;
            }
    }
}

TEST(Raster, OverlayAlgebra) {
    const Raster a = random_binary(40, 30, 0.2, 1), b = random_binary(40, 30, 0.3, 2), c = random_binary(40, 30, 0.5, 3);
    EXPECT_EQ(overlay(a, Raster(40, 30)), a);
    EXPECT_EQ(overlay(a, a), a);
    EXPECT_EQ(overlay(a, b), overlay(b, a));
    EXPECT_EQ(overlay(overlay(a, b), c), overlay(a, overlay(b, c)));
    const double d = measure_density(overlay(a, b));
    EXPECT_GE(d, std::max(measure_density(a), measure_density(b)));
    EXPECT_LE(d, std::min(1.0, measure_density(a) + measure_density(b)));
    EXPECT_THROW(overlay(a, Raster(30, 40)), std::invalid_argument);
}

class ImageIo : public ::testing::TestWithParam<std::string> {};

TEST_P(ImageIo, BinaryRoundTripIsLossless) {
    const auto path = std::filesystem::temp_directory_path() / ("ptex_rt" + GetParam());
    const Raster r = random_binary(33, 17, 0.4, 11);
    write_image(path, r);
    EXPECT_EQ(read_image(path), r);
    std::filesystem::remove(path);
}

TEST_P(ImageIo, GrayLevelsStayWithinQuantization) {
    const auto path = std::filesystem::temp_directory_path() / ("ptex_gray" + GetParam());
    Raster r(20, 20);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : r.values()) v = u(rng);
    write_image(path, r);
    const Raster back = read_image(path);
    EXPECT_NEAR(measure_density(back), measure_density(r), 1.0 / (2 * 255));
    std::filesystem::remove(path);
}

INSTANTIATE_TEST_SUITE_P(Formats, ImageIo, ::testing::Values(std::string(".png"), std::string(".pgm")));

TEST(ImageIoConventions, EmptyRasterIsWhite) {
    for (auto g : to_gray(Raster(4, 4))) EXPECT_EQ(g, 255);
    for (auto g : to_gray(Raster(4, 4, 1.0))) EXPECT_EQ(g, 0);
}

TEST(ImageIoConventions, ErrorsNameThePath) {
    const auto missing = std::filesystem::temp_directory_path() / "ptex_does_not_exist.png";
    try {
        read_image(missing);
        FAIL();
    } catch (const ImageIoError& e) {
        EXPECT_NE(std::string(e.what()).find("ptex_does_not_exist.png"), std::string::npos);
    }
    const auto corrupt = std::filesystem::temp_directory_path() / "ptex_corrupt.png";
    {
        std::ofstream(corrupt) << "not a png";
    }
    EXPECT_THROW(read_image(corrupt), ImageIoError);
    std::filesystem::remove(corrupt);
    EXPECT_THROW(write_image(std::filesystem::temp_directory_path() / "x.bmp", Raster(2, 2)), ImageIoError);
}
