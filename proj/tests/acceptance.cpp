// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ptex/geometry.hpp"
#include "ptex/json_io.hpp"
#include "ptex/perception.hpp"
#include "ptex/reparam.hpp"
#include "ptex/texture_synth.hpp"

using namespace ptex;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[" << what << "] ";
        }
    }
};

const std::array<TextureType, 3> kStudies{TextureType::stipple, TextureType::crosshatch, TextureType::triangle};

std::string fmt(double v, const char* f = "%.3g") {
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

bool non_increasing(const std::vector<double>& h) {
    for (std::size_t i = 1; i < h.size(); ++i)
        if (h[i] > h[i - 1]) return false;
    return true;
}

// ---------------------------------------------------------------------------

void criterion1(Outcome& o) {
    double worst = 0;
    for (auto t : kStudies) {
        const auto p = reference_sigmoid(t);
        const auto levels = reference_levels(t);
        for (int k = 1; k <= 5; ++k) worst = std::max(worst, std::abs(sigmoid_eval(p, k / 6.0) - levels[k - 1]));
    }
    o.require(worst <= 0.05, "deviation above 0.05");
    o.detail << "max |f(k/6) - level| = " << fmt(worst);
}

void criterion2(Outcome& o) {
    double at_half = 0, round_trip = 0;
    for (auto t : kStudies) {
        const auto p = reference_sigmoid(t);
        at_half = std::max(at_half, std::abs(sigmoid_eval(p, 0.5) - p.a));
        for (int i = 1; i <= 999; ++i) {
            const double y = i / 1000.0;
            round_trip = std::max(round_trip, std::abs(sigmoid_eval(p, sigmoid_inverse(p, y)) - y));
        }
    }
    o.require(at_half <= 1e-12, "f(0.5) != a");
    o.require(round_trip <= 1e-9, "f(f^-1(y)) != y");
    o.detail << "max |f(0.5) - a| = " << fmt(at_half) << ", max |f(f^-1(y)) - y| = " << fmt(round_trip);
}

void criterion3(Outcome& o) {
    double noiseless = 0, noisy = 0;
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> noise(0, 0.02);
    for (auto t : kStudies) {
        const auto planted = reference_sigmoid(t);
        std::vector<std::pair<double, double>> clean;
        for (int i = 1; i < 100; ++i) clean.emplace_back(i / 100.0, sigmoid_eval(planted, i / 100.0));
        const auto f = fit_sigmoid(clean);
        noiseless = std::max({noiseless, std::abs(f.a - planted.a), std::abs(f.b - planted.b)});
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<std::pair<double, double>> s;
            // The abscissae fit_sigmoid_to_curve uses.
            for (int i = 0; i < 1000; ++i) {
                const double x = (i + 0.5) / 1000;
                s.emplace_back(x, std::clamp(sigmoid_eval(planted, x) + noise(rng), 1e-4, 1 - 1e-4));
            }
            const auto g = fit_sigmoid(s);
            noisy = std::max({noisy, std::abs(g.a - planted.a), std::abs(g.b - planted.b)});
        }
    }
    o.require(noiseless <= 1e-6, "noiseless recovery");
    o.require(noisy <= 0.05, "noisy recovery");
    o.detail << "noiseless max error " << fmt(noiseless) << ", noisy (3 x 20 repeats) max error " << fmt(noisy);
}

void criterion4(Outcome& o) {
    TextureSpec spec;
    spec.seed = 1;
    double stipple = 0, hatch = 0, triangle = 0;
    // Connectivity floor: the density of the minimal triangulation for this seed.
    const double floor = gen_triangle_texture(1e-9, spec).measured_density;
    int triangle_checked = 0;
    for (int k = 1; k <= 19; ++k) {
        const double d = 0.05 * k;
        stipple = std::max(stipple, std::abs(gen_stipple(d, spec).measured_density - d));
        hatch = std::max(hatch, std::abs(gen_hatch(d, HatchOrientation::horizontal, spec).measured_density - d));
        hatch = std::max(hatch, std::abs(gen_hatch(d, HatchOrientation::vertical, spec).measured_density - d));
        if (d > floor) {
            triangle = std::max(triangle, std::abs(gen_triangle_texture(d, spec).measured_density - d));
            ++triangle_checked;
        }
    }
    int bound_violations = 0;
    const auto grid = gen_stimulus_set(TextureType::crosshatch, 0.2, spec);
    for (const auto& t : grid) {
        const double h = *t.measured_h, v = *t.measured_v;
        if (t.measured_density < std::max(h, v) - 1e-12 || t.measured_density > std::min(1.0, h + v) + 1e-12)
            ++bound_violations;
    }
    o.require(stipple <= 0.01, "stipple");
    o.require(hatch <= 0.01, "hatch");
    o.require(triangle <= 0.02, "triangle");
    o.require(bound_violations == 0, "crosshatch bounds");
    o.require(grid.size() == 26, "crosshatch grid size");
    o.detail << "max error stipple " << fmt(stipple) << ", hatch " << fmt(hatch) << ", triangle " << fmt(triangle)
             << " (floor " << fmt(floor) << ", " << triangle_checked << " targets); crosshatch " << grid.size()
             << " stimuli, " << bound_violations << " bound violations";
}

void criterion5(Outcome& o) {
    const auto a = enumerate_pairs(21, 1).size();
    const auto b = enumerate_pairs(26, 1).size();
    const auto total = 20 * (2 * a + b);
    o.require(a == 231 && b == 351, "pair counts");
    o.require(total == 16260, "plan total");
    o.detail << "n=21: " << a << ", n=26: " << b << ", plan total " << total;
}

// A 1D curve bent in 2D.
Eigen::MatrixXd planted_curve(int n) {
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) / (n - 1);
        x(i, 0) = 3.0 * s;
        x(i, 1) = 0.8 * std::sin(std::numbers::pi * s);
    }
    return x;
}

void criterion6(Outcome& o) {
    const Eigen::MatrixXd truth = planted_curve(21);
    DissimilarityMatrix m{pairwise_distances(truth), "planted"};
    const auto e = mds(m, 2);
    const auto k = kabsch_align(e.points, truth, true);
    o.require(e.stress1 < 1e-3, "stress1");
    o.require(k.rmsd < 1e-2, "rmsd");

    // Monotone raw stress on every input: exact, random starts, noisy groups.
    bool monotone = non_increasing(e.stress_history);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0, 0.1);
    std::vector<DissimilarityMatrix> group;
    for (int p = 0; p < 6; ++p) {
        Eigen::MatrixXd d = m.delta;
        for (int i = 0; i < 21; ++i)
            for (int j = i + 1; j < 21; ++j) d(i, j) = d(j, i) = std::max(0.0, d(i, j) + noise(rng));
        group.push_back({d, "p" + std::to_string(p)});
        MdsOptions opt;
        opt.random_init_seed = p;
        monotone = monotone && non_increasing(mds(group.back(), 2, opt).stress_history);
        monotone = monotone && non_increasing(mds(group.back(), 1).stress_history);
    }
    monotone = monotone && non_increasing(indscal(group, 2).stress_history);
    monotone = monotone && non_increasing(indscal({m, m}, 2).stress_history);
    o.require(monotone, "stress increased");
    o.detail << "stress1 " << fmt(e.stress1) << ", aligned RMSD " << fmt(k.rmsd) << ", stress monotone "
             << (monotone ? "yes" : "no");
}

// Perceived position of a stimulus of density d: the stored stipple sigmoid
// inverted, placed on a bent curve.
Point2 perceived(double d) {
    const double x = sigmoid_inverse(reference_sigmoid(TextureType::stipple), d);
    return {x, 0.25 * std::sin(std::numbers::pi * x)};
}

// Densities at equal arc-length fractions k/(n+1) of the planted curve.
std::vector<double> brute_force_levels(int n) {
    const int steps = 200000;
    std::vector<double> arc(steps + 1, 0.0);
    for (int i = 1; i <= steps; ++i)
        arc[i] = arc[i - 1] + (perceived(static_cast<double>(i) / steps) - perceived(static_cast<double>(i - 1) / steps)).norm();
    std::vector<double> out;
    for (int k = 1; k <= n; ++k) {
        const double goal = arc.back() * k / (n + 1);
        const auto it = std::lower_bound(arc.begin(), arc.end(), goal);
        const int i = static_cast<int>(it - arc.begin());
        const double frac = (goal - arc[i - 1]) / (arc[i] - arc[i - 1]);
        out.push_back((i - 1 + frac) / steps);
    }
    return out;
}

void criterion7(Outcome& o) {
    std::vector<std::string> keys;
    std::vector<Point2> pos;
    for (int k = 0; k <= 20; ++k) {
        keys.push_back("stipple:" + format_density(0.05 * k));
        pos.push_back(perceived(0.05 * k));
    }
    double maxd = 0;
    for (const auto& a : pos)
        for (const auto& b : pos) maxd = std::max(maxd, (a - b).norm());

    std::mt19937_64 rng(2025);
    std::normal_distribution<double> noise(0, 0.5);
    std::vector<RatingRecord> records;
    for (int p = 0; p < 20; ++p) {
        const std::string id = "sim" + std::to_string(p);
        for (const auto& pair : enumerate_pairs(21, 100 + p)) {
            const double d = (pos[pair.left] - pos[pair.right]).norm() / maxd;
            const int r = std::clamp(static_cast<int>(std::lround(1 + 8 * d + noise(rng))), kMinRating, kMaxRating);
            records.push_back({id, keys[pair.left], keys[pair.right], r, std::nullopt});
        }
    }
    const auto data = ingest_ratings(records);
    const auto emb = indscal(data.matrices(), 2);

    PipelineConfig cfg;
    LabeledEmbedding le;
    for (int i = 0; i < emb.points.rows(); ++i) {
        le.points.emplace_back(emb.points(i, 0), emb.points(i, 1));
        le.densities.push_back(StimulusKey::parse(data.stimuli[i]).density(cfg.effective_step()));
    }
    const auto fit = fit_curve(le, cfg.effective_degree(), cfg.effective_window());
    const auto levels = uniform_levels(fit.curve, 5);
    const auto truth = brute_force_levels(5);

    bool monotone = true;
    double worst = 0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i > 0 && !(levels[i] > levels[i - 1])) monotone = false;
        worst = std::max(worst, std::abs(levels[i] - truth[i]));
    }
    o.require(data.accepted_records == 20 * 231, "ingest");
    o.require(levels.size() == 5, "level count");
    o.require(monotone, "monotone");
    o.require(worst <= 0.05, "level error");
    o.detail << "levels";
    for (double l : levels) o.detail << " " << fmt(l, "%.3f");
    o.detail << " vs planted";
    for (double l : truth) o.detail << " " << fmt(l, "%.3f");
    o.detail << ", max error " << fmt(worst);
}

// Savitzky-Golay weight of sample k via explicit normal equations.
double normal_equation_weight(int window, int degree, int k) {
    const int half = window / 2;
    Eigen::MatrixXd a(window, degree + 1);
    for (int i = 0; i < window; ++i)
        for (int j = 0; j <= degree; ++j) a(i, j) = std::pow(i - half, j);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(window);
    y(k) = 1.0;
    const Eigen::VectorXd beta = (a.transpose() * a).fullPivLu().solve(a.transpose() * y);
    return beta(0);
}

void criterion8(Outcome& o) {
    // Savitzky-Golay.
    double coef = 0;
    const auto c = savgol_coefficients(5, 2);
    for (int k = 0; k < 5; ++k) coef = std::max(coef, std::abs(c[k] - normal_equation_weight(5, 2, k)));
    double poly = 0;
    for (int window : {5, 7, 9, 11})
        for (int degree = 0; degree < window && degree <= 4; ++degree)
            for (int pd = 0; pd <= degree; ++pd) {
                std::vector<Point2> pts;
                for (int i = 0; i < 17; ++i) {
                    const double x = 0.25 * i - 2.0;
                    pts.emplace_back(std::pow(x, pd), 1.0 - 0.5 * (pd > 0 ? std::pow(x, pd - 1) : 0.0));
                }
                const auto s = savgol_smooth(pts, window, degree);
                for (std::size_t i = 0; i < pts.size(); ++i) poly = std::max(poly, (s[i] - pts[i]).norm());
            }
    o.require(coef <= 1e-12, "SG coefficients");
    o.require(poly <= 1e-10, "SG polynomial reproduction");

    // Kabsch against a brute-force rotation grid.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::MatrixXd a(30, 2), b(30, 2);
    for (int i = 0; i < 30; ++i) {
        a(i, 0) = u(rng);
        a(i, 1) = u(rng);
    }
    const double th = 1.234;
    for (int i = 0; i < 30; ++i) {
        b(i, 0) = std::cos(th) * a(i, 0) - std::sin(th) * a(i, 1) + 0.3 + 0.05 * u(rng);
        b(i, 1) = std::sin(th) * a(i, 0) + std::cos(th) * a(i, 1) - 0.7 + 0.05 * u(rng);
    }
    const auto kab = kabsch_align(a, b);
    const Eigen::RowVector2d ca = a.colwise().mean(), cb = b.colwise().mean();
    double grid_best = INFINITY;
    for (int s = 0; s < 3600; ++s) {
        const double t = 2 * std::numbers::pi * s / 3600;
        double sum = 0;
        for (int i = 0; i < 30; ++i) {
            const double x = a(i, 0) - ca(0), y = a(i, 1) - ca(1);
            const double dx = std::cos(t) * x - std::sin(t) * y - (b(i, 0) - cb(0));
            const double dy = std::sin(t) * x + std::cos(t) * y - (b(i, 1) - cb(1));
            sum += dx * dx + dy * dy;
        }
        grid_best = std::min(grid_best, std::sqrt(sum / 30));
    }
    o.require(kab.rmsd <= grid_best + 1e-12, "Kabsch");

    // Delaunay empty-circumcircle property, every triangle against every point.
    int delaunay_bad = 0, sets = 0;
    for (int n : {3, 4, 5, 10, 25, 50, 100, 150, 200})
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            std::mt19937_64 r(seed * 1000 + n);
            std::uniform_real_distribution<double> ux(0, 512);
            PointSet ps;
            ps.width = ps.height = 512;
            for (int i = 0; i < n; ++i) ps.points.push_back({ux(r), ux(r)});
            const auto tri = delaunay(ps);
            ++sets;
            if (tri.triangles.empty() || tri.triangles.size() > static_cast<std::size_t>(2 * n - 5 + (n == 3 ? 2 : 0)))
                ++delaunay_bad;
            for (const auto& t : tri.triangles) {
                const Vec2 p = ps.points[t[0]], q = ps.points[t[1]], s = ps.points[t[2]];
                const double d = 2 * (p.x * (q.y - s.y) + q.x * (s.y - p.y) + s.x * (p.y - q.y));
                const double cx = (norm2(p) * (q.y - s.y) + norm2(q) * (s.y - p.y) + norm2(s) * (p.y - q.y)) / d;
                const double cy = (norm2(p) * (s.x - q.x) + norm2(q) * (p.x - s.x) + norm2(s) * (q.x - p.x)) / d;
                const double r2 = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
                for (int i = 0; i < n; ++i) {
                    if (i == t[0] || i == t[1] || i == t[2]) continue;
                    const Vec2 v = ps.points[i];
                    if ((v.x - cx) * (v.x - cx) + (v.y - cy) * (v.y - cy) < r2 * (1 - 1e-9)) ++delaunay_bad;
                }
            }
        }
    o.require(delaunay_bad == 0, "Delaunay");

    // Lloyd energy over 50 iterations.
    std::mt19937_64 r(12);
    std::uniform_real_distribution<double> ux(0, 128);
    PointSet ps;
    ps.width = ps.height = 128;
    for (int i = 0; i < 60; ++i) ps.points.push_back({ux(r), ux(r)});
    std::vector<double> energy{quantization_energy(ps)};
    for (int it = 0; it < 50; ++it) {
        ps = lloyd_step(ps);
        energy.push_back(quantization_energy(ps));
    }
    o.require(non_increasing(energy), "Lloyd energy");

    o.detail << "SG coef error " << fmt(coef) << ", polynomial error " << fmt(poly) << "; Kabsch " << fmt(kab.rmsd, "%.6f")
             << " vs grid " << fmt(grid_best, "%.6f") << "; Delaunay " << sets << " sets, " << delaunay_bad
             << " violations; Lloyd energy " << fmt(energy.front()) << " -> " << fmt(energy.back());
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double seconds;
        std::function<void(Outcome&)> run;
    };
    const std::vector<Criterion> all{
        {1, "stored sigmoid reproduces stored levels", 1, criterion1},
        {2, "sigmoid identities", 1, criterion2},
        {3, "sigmoid fit recovery", 5, criterion3},
        {4, "density accuracy", 300, criterion4},
        {5, "study plan counts", 1, criterion5},
        {6, "MDS recovery", 10, criterion6},
        {7, "planted end-to-end pipeline", 60, criterion7},
        {8, "numerical kernels", 30, criterion8},
    };
    int failures = 0;
    for (const auto& c : all) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= c.seconds) {
            o.pass = false;
            o.detail << " [runtime over " << c.seconds << " s]";
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s criterion %d (%s): %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(),
                    secs);
        std::fflush(stdout);
    }
    return failures;
}
