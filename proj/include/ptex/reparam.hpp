#pragma once

// Perceptually uniform reparameterization of an ordered embedding of density
// levels: Savitzky-Golay smoothing, curve densification and projection,
// arc-length sampling, density lookup along the curve, and the sigmoid
// family mapping perceived position to density.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ptex/texture_synth.hpp"

namespace ptex {

using Point2 = Eigen::Vector2d;

class FitFailure : public std::runtime_error {
public:
    FitFailure(const std::string& what, std::vector<int> indices = {})
        : std::runtime_error(what), indices_(std::move(indices)) {}

    const std::vector<int>& indices() const { return indices_; }

private:
    std::vector<int> indices_;
};

/// Points of an embedding in increasing density order with their labels.
struct LabeledEmbedding {
    std::vector<Point2> points;
    std::vector<double> densities;

    void validate() const {
        if (points.size() != densities.size())
            throw std::invalid_argument("embedding has " + std::to_string(points.size()) + " points but " +
                                        std::to_string(densities.size()) + " densities");
        if (points.size() < 3) throw std::invalid_argument("embedding needs at least 3 points");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!points[i].allFinite()) throw std::invalid_argument("embedding point is not finite");
            if (!(densities[i] >= 0.0 && densities[i] <= 1.0))
                throw std::invalid_argument("density labels must lie in [0,1]");
            if (i > 0 && !(densities[i] > densities[i - 1]))
                throw std::invalid_argument("density labels must be strictly increasing");
        }
    }
};

// ---------------------------------------------------------------------------
// Savitzky-Golay

enum class EdgeMode {
    interp,  // edge samples evaluate the polynomial fitted to the first/last window
    mirror,  // reflect about the end samples
};

/// Weights that evaluate the least-squares polynomial of the given degree,
/// fitted to `window` equally spaced samples, at sample `position`
/// (0-based within the window; the centre by default).
inline std::vector<double> savgol_coefficients(int window, int degree, std::optional<int> position = std::nullopt) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("window must be a positive odd number");
    if (degree < 0 || degree >= window) throw std::invalid_argument("degree must satisfy 0 <= degree < window");
    const int half = window / 2;
    const int pos = position.value_or(half);
    if (pos < 0 || pos >= window) throw std::invalid_argument("evaluation position outside the window");
    Eigen::MatrixXd a(window, degree + 1);
    for (int i = 0; i < window; ++i)
        for (int j = 0; j <= degree; ++j) a(i, j) = std::pow(static_cast<double>(i - half), j);
    Eigen::VectorXd e(degree + 1);
    for (int j = 0; j <= degree; ++j) e(j) = std::pow(static_cast<double>(pos - half), j);
    // c = A (A^T A)^-1 e, so that c . y = e . beta with beta the LS fit.
    const Eigen::VectorXd z = (a.transpose() * a).ldlt().solve(e);
    const Eigen::VectorXd c = a * z;
    return {c.data(), c.data() + c.size()};
}

/// Smooths each coordinate channel with a Savitzky-Golay filter.
inline std::vector<Point2> savgol_smooth(const std::vector<Point2>& pts, int window, int degree,
                                         EdgeMode mode = EdgeMode::interp) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("window must be a positive odd number");
    if (degree < 0 || degree >= window) throw std::invalid_argument("degree must satisfy 0 <= degree < window");
    const int n = static_cast<int>(pts.size());
    if (window > n) throw std::invalid_argument("window larger than the number of points");
    const int half = window / 2;
    const auto centre = savgol_coefficients(window, degree);
    std::vector<Point2> out(pts.size());

    auto apply = [&](const std::vector<double>& c, int first) {
        Point2 acc = Point2::Zero();
        for (int k = 0; k < window; ++k) acc += c[k] * pts[first + k];
        return acc;
    };
    auto mirrored = [&](int i) {
        if (n == 1) return 0;
        const int period = 2 * (n - 1);
        i %= period;
        if (i < 0) i += period;
        return i < n ? i : period - i;
    };

    for (int i = 0; i < n; ++i) {
        if (i >= half && i < n - half) {
            out[i] = apply(centre, i - half);
        } else if (mode == EdgeMode::interp) {
            const int first = i < half ? 0 : n - window;
            out[i] = apply(savgol_coefficients(window, degree, i - first), first);
        } else {
            Point2 acc = Point2::Zero();
            for (int k = 0; k < window; ++k) acc += centre[k] * pts[mirrored(i - half + k)];
            out[i] = acc;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Curves

constexpr int kCurveSegments = 4096;

struct PerceptualCurve {
    std::vector<Point2> polyline;
    std::vector<double> arclen;  // cumulative length at each polyline vertex
    std::vector<double> t;       // arc parameter of each input point's projection
    std::vector<double> densities;
    int window = 0;
    int degree = 0;

    double length() const { return arclen.empty() ? 0.0 : arclen.back(); }

    /// Point at arc parameter s, clamped to [0, length].
    Point2 point_at(double s) const {
        s = std::clamp(s, 0.0, length());
        const auto it = std::upper_bound(arclen.begin(), arclen.end(), s);
        if (it == arclen.end()) return polyline.back();
        const std::size_t i = static_cast<std::size_t>(it - arclen.begin());
        if (i == 0) return polyline.front();
        const double seg = arclen[i] - arclen[i - 1];
        const double u = seg > 0.0 ? (s - arclen[i - 1]) / seg : 0.0;
        return polyline[i - 1] + u * (polyline[i] - polyline[i - 1]);
    }
};

struct CurveFit {
    PerceptualCurve curve;
    double sse = 0.0;
    // Window search only: SSE per tried window (failed fits are absent) and
    // the windows tying with the chosen one.
    std::vector<std::pair<int, double>> sse_by_window;
    std::vector<int> tied_windows;
};

namespace detail {

// Natural cubic spline through `knots` parameterized by cumulative chord
// length, sampled into exactly `segments` segments.
inline std::vector<Point2> densify(const std::vector<Point2>& knots, int segments) {
    const int n = static_cast<int>(knots.size());
    std::vector<double> h(n - 1);
    double total = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        h[i] = (knots[i + 1] - knots[i]).norm();
        total += h[i];
    }
    if (!(total > 0.0)) throw FitFailure("smoothed curve collapsed to a point");
    const double floor_len = total * 1e-9;
    for (auto& v : h) v = std::max(v, floor_len);
    total = 0.0;
    for (double v : h) total += v;

    // Second derivatives of the natural spline, one tridiagonal solve per channel.
    std::vector<Point2> m(n, Point2::Zero());
    if (n > 2) {
        const int k = n - 2;
        std::vector<double> diag(k), upper(k);
        std::vector<Point2> rhs(k);
        for (int i = 1; i <= k; ++i) {
            diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
            upper[i - 1] = h[i];
            rhs[i - 1] = 6.0 * ((knots[i + 1] - knots[i]) / h[i] - (knots[i] - knots[i - 1]) / h[i - 1]);
        }
        for (int i = 1; i < k; ++i) {
            const double w = h[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for (int i = k - 1; i >= 1; --i) m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
    }

    // Segments per interval proportional to chord length, largest remainder.
    std::vector<int> per(n - 1, 1);
    int assigned = n - 1;
    std::vector<std::pair<double, int>> rema;
    const int spare = std::max(0, segments - (n - 1));
    for (int i = 0; i + 1 < n; ++i) {
        const double share = spare * h[i] / total;
        const int whole = static_cast<int>(std::floor(share));
        per[i] += whole;
        assigned += whole;
        rema.push_back({share - whole, i});
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < segments && r < rema.size(); ++r, ++assigned) ++per[rema[r].second];

    std::vector<Point2> out;
    out.reserve(segments + 1);
    out.push_back(knots[0]);
    for (int i = 0; i + 1 < n; ++i) {
        for (int s = 1; s <= per[i]; ++s) {
            const double u = static_cast<double>(s) / per[i];
            const double a = 1.0 - u;
            const double hh = h[i] * h[i] / 6.0;
            out.push_back(a * knots[i] + u * knots[i + 1] + hh * ((a * a * a - a) * m[i] + (u * u * u - u) * m[i + 1]));
        }
    }
    return out;
}

struct Projection {
    double t = 0.0;
    double dist2 = 0.0;
};

inline Projection project(const std::vector<Point2>& poly, const std::vector<double>& arclen, const Point2& p) {
    Projection best{0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
        const Point2 ab = poly[i + 1] - poly[i];
        const double len2 = ab.squaredNorm();
        const double u = len2 > 0.0 ? std::clamp((p - poly[i]).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const double d2 = (poly[i] + u * ab - p).squaredNorm();
        if (d2 < best.dist2) best = {arclen[i] + u * (arclen[i + 1] - arclen[i]), d2};
    }
    return best;
}

inline CurveFit fit_with_window(const LabeledEmbedding& emb, int degree, int window) {
    const auto smooth = savgol_smooth(emb.points, window, degree);
    CurveFit fit;
    auto& c = fit.curve;
    c.window = window;
    c.degree = degree;
    c.densities = emb.densities;
    c.polyline = densify(smooth, kCurveSegments);
    c.arclen.assign(c.polyline.size(), 0.0);
    for (std::size_t i = 1; i < c.polyline.size(); ++i)
        c.arclen[i] = c.arclen[i - 1] + (c.polyline[i] - c.polyline[i - 1]).norm();
    for (const auto& p : emb.points) {
        const auto pr = project(c.polyline, c.arclen, p);
        c.t.push_back(pr.t);
        fit.sse += pr.dist2;
    }
    std::vector<int> bad;
    for (std::size_t i = 1; i < c.t.size(); ++i)
        if (c.t[i] < c.t[i - 1]) {
            bad.push_back(static_cast<int>(i - 1));
            bad.push_back(static_cast<int>(i));
        }
    if (!bad.empty()) {
        bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
        std::string msg = "projections out of order at points";
        for (int b : bad) msg += " " + std::to_string(b);
        msg += " (window " + std::to_string(window) + ", degree " + std::to_string(degree) + ")";
        throw FitFailure(msg, bad);
    }
    return fit;
}

}  // namespace detail

/// Smooths the embedding, densifies it into a polyline and projects every
/// input point onto it. Without a window, every odd window in
/// (degree, n] is tried and the smallest sum of squared projection distances
/// wins (ties go to the smaller window and are reported).
inline CurveFit fit_curve(const LabeledEmbedding& emb, int degree, std::optional<int> window = std::nullopt) {
    emb.validate();
    if (degree < 0) throw std::invalid_argument("degree must be >= 0");
    if (window) return detail::fit_with_window(emb, degree, *window);

    const int n = static_cast<int>(emb.points.size());
    std::optional<CurveFit> best;
    std::vector<std::pair<int, double>> table;
    std::string last_failure;
    for (int w = degree + 1; w <= n; ++w) {
        if (w % 2 == 0) continue;
        try {
            CurveFit f = detail::fit_with_window(emb, degree, w);
            table.emplace_back(w, f.sse);
            if (!best || f.sse < best->sse) best = std::move(f);
        } catch (const FitFailure& e) {
            last_failure = e.what();
        }
    }
    if (!best) throw FitFailure("no window produced a monotone fit" + (last_failure.empty() ? "" : ": " + last_failure));
    best->sse_by_window = table;
    const double tie_tol = 1e-12 * std::max(1.0, best->sse);
    for (const auto& [w, s] : table)
        if (w != best->curve.window && std::abs(s - best->sse) <= tie_tol) best->tied_windows.push_back(w);
    return std::move(*best);
}

struct ArcSample {
    double t = 0.0;
    Point2 point;
};

/// n+1 points at equal arc spacing L/n from start to end.
inline std::vector<ArcSample> uniform_sample(const PerceptualCurve& curve, int n) {
    if (n < 1) throw std::invalid_argument("uniform_sample: n must be >= 1");
    std::vector<ArcSample> out;
    const double len = curve.length();
    for (int i = 0; i <= n; ++i) {
        const double t = i == n ? len : len * i / n;
        out.push_back({t, curve.point_at(t)});
    }
    return out;
}

/// Density at arc parameter t by linear interpolation between the labels of
/// the neighbouring projected points; clamps outside the projected range.
inline double density_at(const PerceptualCurve& curve, double t) {
    const auto& ts = curve.t;
    const auto& ds = curve.densities;
    if (ts.empty()) throw std::invalid_argument("curve has no projected points");
    if (t <= ts.front()) return ds.front();
    if (t >= ts.back()) return ds.back();
    // Last projected point at or before t.
    const std::size_t r = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
    const std::size_t l = r - 1;
    if (ts[l] == t) return ds[l];
    const double lambda = (ts[r] - t) / (ts[r] - ts[l]);
    return lambda * ds[l] + (1.0 - lambda) * ds[r];
}

/// n_interior densities at equal perceptual spacing: n_interior+2 equidistant
/// arc points with the two end levels dropped.
inline std::vector<double> uniform_levels(const PerceptualCurve& curve, int n_interior) {
    if (n_interior < 1) throw std::invalid_argument("uniform_levels: need at least one level");
    const auto samples = uniform_sample(curve, n_interior + 1);
    std::vector<double> levels;
    for (int i = 1; i <= n_interior; ++i) levels.push_back(density_at(curve, samples[i].t));
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i] > levels[i - 1]))
            throw FitFailure("curve fit failure: levels not strictly increasing at " + std::to_string(i - 1) + "," +
                                 std::to_string(i),
                             {static_cast<int>(i - 1), static_cast<int>(i)});
    return levels;
}

// ---------------------------------------------------------------------------
// Sigmoid mapping perceived position x in [0,1] to density

struct SigmoidParams {
    double a = 0.5;
    double b = 1.0;
    double rmse = 0.0;
};

constexpr double kSigmoidEps = 1e-6;

inline void check_sigmoid(const SigmoidParams& p) {
    if (!(p.a > 0.0 && p.a < 1.0)) throw std::invalid_argument("sigmoid parameter a must lie in (0,1)");
    if (!(p.b > 0.0) || !std::isfinite(p.b)) throw std::invalid_argument("sigmoid parameter b must be > 0");
}

/// f(x) = 1 / (1 + (1/a - 1) (1/x - 1)^b); f(0.5) = a.
inline double sigmoid_eval(const SigmoidParams& p, double x) {
    check_sigmoid(p);
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    x = std::clamp(x, kSigmoidEps, 1.0 - kSigmoidEps);
    return 1.0 / (1.0 + (1.0 / p.a - 1.0) * std::pow(1.0 / x - 1.0, p.b));
}

/// f^-1(y) = 1 / (1 + (a (y - 1) / (y (a - 1)))^(1/b)).
inline double sigmoid_inverse(const SigmoidParams& p, double y) {
    check_sigmoid(p);
    if (y <= 0.0) return 0.0;
    if (y >= 1.0) return 1.0;
    y = std::clamp(y, kSigmoidEps, 1.0 - kSigmoidEps);
    return 1.0 / (1.0 + std::pow(p.a * (y - 1.0) / (y * (p.a - 1.0)), 1.0 / p.b));
}

/// Least-squares sigmoid fit: a linear fit of ln(1/y - 1) against
/// ln(1/x - 1) for the start, then Levenberg-Marquardt on the raw residuals.
inline SigmoidParams fit_sigmoid(const std::vector<std::pair<double, double>>& samples) {
    std::vector<double> w, y;
    for (const auto& [sx, sy] : samples) {
        if (!(sx > 0.0 && sx < 1.0 && sy > 0.0 && sy < 1.0)) continue;
        const double cx = std::clamp(sx, kSigmoidEps, 1.0 - kSigmoidEps);
        const double cy = std::clamp(sy, kSigmoidEps, 1.0 - kSigmoidEps);
        w.push_back(std::log(1.0 / cx - 1.0));
        y.push_back(cy);
    }
    const std::size_t n = w.size();
    if (n < 3) throw std::invalid_argument("fit_sigmoid: need at least 3 samples inside (0,1)");

    // f = 1 / (1 + exp(c + b w)) with c = ln(1/a - 1).
    double sw = 0, sz = 0, sww = 0, swz = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = std::log(1.0 / y[i] - 1.0);
        sw += w[i];
        sz += z;
        sww += w[i] * w[i];
        swz += w[i] * z;
    }
    const double var = sww - sw * sw / n;
    double b = var > 0.0 ? (swz - sw * sz / n) / var : 1.0;
    if (!(b > 1e-3)) b = 1e-3;
    double c = (sz - b * sw) / n;
    double beta = std::log(b);

    auto sse_at = [&](double cc, double bb) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = 1.0 / (1.0 + std::exp(cc + std::exp(bb) * w[i]));
            s += (f - y[i]) * (f - y[i]);
        }
        return s;
    };

    double sse = sse_at(c, beta);
    double mu = 1e-3;
    for (int it = 0; it < 200; ++it) {
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        const double bb = std::exp(beta);
        for (std::size_t i = 0; i < n; ++i) {
            const double f = 1.0 / (1.0 + std::exp(c + bb * w[i]));
            const double g = -f * (1.0 - f);
            const Eigen::Vector2d j(g, g * w[i] * bb);
            jtj += j * j.transpose();
            jtr += j * (f - y[i]);
        }
        bool improved = false;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::Matrix2d damped = jtj;
            damped.diagonal() *= 1.0 + mu;
            const Eigen::Vector2d step = damped.ldlt().solve(-jtr);
            const double nc = c + step(0);
            const double nb = beta + step(1);
            const double ns = sse_at(nc, nb);
            if (std::isfinite(ns) && ns <= sse) {
                const double gain = sse - ns;
                c = nc;
                beta = nb;
                sse = ns;
                mu = std::max(mu / 10.0, 1e-12);
                improved = true;
                if (gain <= 1e-16 * std::max(1.0, sse) || step.norm() < 1e-14) it = 1000;
                break;
            }
            mu *= 10.0;
        }
        if (!improved) break;
    }

    SigmoidParams p;
    p.a = 1.0 / (1.0 + std::exp(c));
    p.b = std::exp(beta);
    p.rmse = std::sqrt(sse / n);
    return p;
}

// ---------------------------------------------------------------------------
// Published constants

enum class StudyKind { stipple, hatch, triangle };

inline StudyKind study_kind(TextureType t) {
    switch (t) {
        case TextureType::stipple: return StudyKind::stipple;
        case TextureType::triangle: return StudyKind::triangle;
        default: return StudyKind::hatch;
    }
}

/// Best-fit sigmoid from the published rating studies.
inline SigmoidParams reference_sigmoid(TextureType t) {
    switch (study_kind(t)) {
        case StudyKind::stipple: return {0.5644, 1.7361, 0.0233};
        case StudyKind::hatch: return {0.4753, 1.5918, 0.0225};
        case StudyKind::triangle: return {0.5859, 1.8120, 0.0089};
    }
    throw std::invalid_argument("unknown texture type");
}

/// Five published perceptually uniform density levels.
inline std::array<double, 5> reference_levels(TextureType t) {
    switch (study_kind(t)) {
        case StudyKind::stipple: return {0.083, 0.298, 0.523, 0.852, 0.966};
        case StudyKind::hatch: return {0.096, 0.191, 0.477, 0.768, 0.894};
        case StudyKind::triangle: return {0.061, 0.290, 0.576, 0.836, 0.950};
    }
    throw std::invalid_argument("unknown texture type");
}

/// Sigmoid fitted to `samples` points spread evenly along the curve, with
/// the arc fraction as perceived position.
inline SigmoidParams fit_sigmoid_to_curve(const PerceptualCurve& curve, int samples = 1000) {
    std::vector<std::pair<double, double>> pts;
    const double len = curve.length();
    for (int i = 0; i < samples; ++i) {
        const double x = (i + 0.5) / samples;
        pts.emplace_back(x, density_at(curve, x * len));
    }
    return fit_sigmoid(pts);
}

// ---------------------------------------------------------------------------
// Perceived position -> density

class PerceptualMapping {
public:
    enum class Kind { identity, sigmoid, table };

    static PerceptualMapping identity() { return PerceptualMapping(); }

    static PerceptualMapping sigmoid(SigmoidParams p) {
        check_sigmoid(p);
        PerceptualMapping m;
        m.kind_ = Kind::sigmoid;
        m.sigmoid_ = p;
        return m;
    }

    /// Piecewise linear through (0,0), (k/(n+1), level_k), (1,1).
    static PerceptualMapping from_levels(const std::vector<double>& interior) {
        if (interior.empty()) throw std::invalid_argument("no levels given");
        PerceptualMapping m;
        m.kind_ = Kind::table;
        const std::size_t n = interior.size();
        m.xs_.push_back(0.0);
        m.ys_.push_back(0.0);
        for (std::size_t k = 0; k < n; ++k) {
            if (!(interior[k] > m.ys_.back() && interior[k] < 1.0))
                throw std::invalid_argument("levels must be strictly increasing inside (0,1)");
            m.xs_.push_back(static_cast<double>(k + 1) / (n + 1));
            m.ys_.push_back(interior[k]);
        }
        m.xs_.push_back(1.0);
        m.ys_.push_back(1.0);
        return m;
    }

    Kind kind() const { return kind_; }
    const SigmoidParams& params() const { return sigmoid_; }

    double density(double x) const {
        x = std::clamp(x, 0.0, 1.0);
        switch (kind_) {
            case Kind::identity: return x;
            case Kind::sigmoid: return sigmoid_eval(sigmoid_, x);
            case Kind::table: {
                const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
                if (it == xs_.end()) return ys_.back();
                const std::size_t r = static_cast<std::size_t>(it - xs_.begin());
                const std::size_t l = r - 1;
                const double u = (x - xs_[l]) / (xs_[r] - xs_[l]);
                return ys_[l] + u * (ys_[r] - ys_[l]);
            }
        }
        return x;
    }

private:
    Kind kind_ = Kind::identity;
    SigmoidParams sigmoid_;
    std::vector<double> xs_, ys_;
};

}  // namespace ptex
