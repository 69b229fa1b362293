#pragma once

// Pairwise similarity ratings to perceptual spaces: study pair plans, rating
// ingestion and participant screening, metric MDS by stress majorization,
// scree curves, INDSCAL and Kabsch alignment.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ptex {

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string s;
        for (const auto& i : issues) {
            if (!s.empty()) s += "; ";
            s += i;
        }
        return s;
    }

    std::vector<std::string> issues_;
};

class RatingRangeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// ---------------------------------------------------------------------------
// Study plan

struct StimulusPair {
    int left = 0;
    int right = 0;

    friend bool operator==(StimulusPair, StimulusPair) = default;
};

/// Number of comparisons per participant: all unordered pairs plus self pairs.
constexpr std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2 + n; }

/// Every unordered pair (including self pairs) in a seeded random
/// presentation order with random left/right placement.
inline std::vector<StimulusPair> enumerate_pairs(int n, std::uint64_t seed = 0) {
    if (n <= 0) throw std::invalid_argument("enumerate_pairs: n must be >= 1");
    std::vector<StimulusPair> pairs;
    pairs.reserve(pair_count(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) pairs.push_back({i, j});
    std::mt19937_64 rng(seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    std::bernoulli_distribution flip(0.5);
    for (auto& p : pairs)
        if (flip(rng)) std::swap(p.left, p.right);
    return pairs;
}

// ---------------------------------------------------------------------------
// Ratings

struct RatingRecord {
    std::string participant;
    std::string stimulus_a;
    std::string stimulus_b;
    int rating = 0;
    std::optional<std::string> timestamp;
};

constexpr int kMinRating = 1;
constexpr int kMaxRating = 9;

/// Stimulus keys look like "stipple:07" or "hatch:0.2x0.4".
struct StimulusKey {
    std::string type;
    std::string label;
    std::vector<double> values;  // numeric components of the label

    static StimulusKey parse(const std::string& key) {
        const auto colon = key.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == key.size())
            throw std::invalid_argument("malformed stimulus key '" + key + "'");
        StimulusKey k;
        k.type = key.substr(0, colon);
        k.label = key.substr(colon + 1);
        std::stringstream ss(k.label);
        std::string part;
        while (std::getline(ss, part, 'x')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(part, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != part.size() || part.empty())
                throw std::invalid_argument("malformed stimulus key '" + key + "'");
            k.values.push_back(v);
        }
        return k;
    }

    /// Index labels ("07") scale by step; decimal labels ("0.35") are densities.
    double density(double step) const {
        if (values.size() != 1) throw std::invalid_argument("stimulus '" + type + ":" + label + "' has no scalar density");
        return label.find('.') == std::string::npos ? values[0] * step : values[0];
    }
};

/// Orders stimulus keys by type, then numerically by label components.
inline std::vector<std::string> order_stimuli(std::vector<std::string> keys) {
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::stable_sort(keys.begin(), keys.end(), [](const std::string& a, const std::string& b) {
        const auto ka = StimulusKey::parse(a);
        const auto kb = StimulusKey::parse(b);
        if (ka.type != kb.type) return ka.type < kb.type;
        return ka.values < kb.values;
    });
    return keys;
}

/// Reads `participant,stim_a,stim_b,rating[,timestamp]` with a header row.
/// Schema problems are collected with their 1-based line numbers.
inline std::vector<RatingRecord> parse_ratings_csv(std::istream& in) {
    std::vector<RatingRecord> out;
    std::vector<std::string> issues;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        if (!line.empty() && line.back() == ',') cols.emplace_back();
        if (!header_seen) {
            header_seen = true;
            if (cols.size() < 4 || cols[0] != "participant" || cols[1] != "stim_a" || cols[2] != "stim_b" ||
                cols[3] != "rating") {
                issues.push_back("line " + std::to_string(line_no) +
                                 ": expected header participant,stim_a,stim_b,rating");
                break;
            }
            continue;
        }
        if (cols.size() < 4 || cols.size() > 5) {
            issues.push_back("line " + std::to_string(line_no) + ": expected 4 or 5 columns");
            continue;
        }
        RatingRecord r;
        r.participant = cols[0];
        r.stimulus_a = cols[1];
        r.stimulus_b = cols[2];
        try {
            StimulusKey::parse(r.stimulus_a);
            StimulusKey::parse(r.stimulus_b);
        } catch (const std::invalid_argument& e) {
            issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
            continue;
        }
        std::size_t used = 0;
        try {
            r.rating = std::stoi(cols[3], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != cols[3].size()) {
            issues.push_back("line " + std::to_string(line_no) + ": rating '" + cols[3] + "' is not an integer");
            continue;
        }
        if (r.rating < kMinRating || r.rating > kMaxRating) {
            issues.push_back("line " + std::to_string(line_no) + ": rating " + cols[3] + " outside 1..9");
            continue;
        }
        if (r.participant.empty()) {
            issues.push_back("line " + std::to_string(line_no) + ": empty participant id");
            continue;
        }
        if (cols.size() == 5 && !cols[4].empty()) r.timestamp = cols[4];
        out.push_back(std::move(r));
    }
    if (!header_seen) issues.push_back("line 1: missing header");
    if (issues.empty() && out.empty()) issues.push_back("no rating rows");
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return out;
}

inline std::string ratings_csv_header() { return "participant,stim_a,stim_b,rating\n"; }

// ---------------------------------------------------------------------------
// Dissimilarities

struct DissimilarityMatrix {
    Eigen::MatrixXd delta;
    std::string source = "aggregate";

    int n() const { return static_cast<int>(delta.rows()); }
};

inline void check_dissimilarities(const DissimilarityMatrix& m) {
    if (m.delta.rows() != m.delta.cols() || m.delta.rows() < 1)
        throw std::invalid_argument("dissimilarity matrix must be square and non-empty");
    for (int i = 0; i < m.n(); ++i)
        for (int j = 0; j < m.n(); ++j) {
            const double v = m.delta(i, j);
            if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("dissimilarities must be finite and >= 0");
            if (std::abs(v - m.delta(j, i)) > 1e-12 * (1.0 + std::abs(v)))
                throw std::invalid_argument("dissimilarity matrix is not symmetric");
        }
}

struct ParticipantData {
    std::string participant;
    DissimilarityMatrix matrix;       // rating - 1, diagonal zeroed
    std::vector<double> self_ratings;  // raw ratings given to self pairs
    std::vector<std::string> duplicates;
};

struct IngestResult {
    std::vector<std::string> stimuli;
    std::vector<ParticipantData> participants;
    std::size_t accepted_records = 0;

    std::vector<DissimilarityMatrix> matrices() const {
        std::vector<DissimilarityMatrix> m;
        for (const auto& p : participants) m.push_back(p.matrix);
        return m;
    }
};

/// Groups ratings by participant into dissimilarity matrices (rating - 1).
/// Repeated pairs are averaged and reported; missing pairs are an error.
/// When `stimuli` is empty the set is taken from the records.
inline IngestResult ingest_ratings(const std::vector<RatingRecord>& records, std::vector<std::string> stimuli = {}) {
    std::vector<std::string> issues;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const int v = records[r].rating;
        if (v < kMinRating || v > kMaxRating)
            issues.push_back("record " + std::to_string(r + 1) + " (" + records[r].participant + "): rating " +
                             std::to_string(v) + " outside 1..9");
    }
    if (!issues.empty()) throw RatingRangeError(std::move(issues));

    if (stimuli.empty()) {
        for (const auto& r : records) {
            stimuli.push_back(r.stimulus_a);
            stimuli.push_back(r.stimulus_b);
        }
        stimuli = order_stimuli(std::move(stimuli));
    }
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < stimuli.size(); ++i) index[stimuli[i]] = static_cast<int>(i);
    const int n = static_cast<int>(stimuli.size());

    std::vector<std::string> order;
    std::map<std::string, std::vector<const RatingRecord*>> by_participant;
    for (const auto& r : records) {
        if (!by_participant.count(r.participant)) order.push_back(r.participant);
        by_participant[r.participant].push_back(&r);
    }

    IngestResult out;
    out.stimuli = stimuli;
    for (const auto& pid : order) {
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
        Eigen::MatrixXi count = Eigen::MatrixXi::Zero(n, n);
        ParticipantData pd;
        pd.participant = pid;
        for (const RatingRecord* r : by_participant[pid]) {
            const auto ia = index.find(r->stimulus_a);
            const auto ib = index.find(r->stimulus_b);
            if (ia == index.end() || ib == index.end()) {
                issues.push_back("participant " + pid + ": unknown stimulus in pair " + r->stimulus_a + "," + r->stimulus_b);
                continue;
            }
            const int i = std::min(ia->second, ib->second);
            const int j = std::max(ia->second, ib->second);
            if (count(i, j) == 1) pd.duplicates.push_back(stimuli[i] + "," + stimuli[j]);
            sum(i, j) += r->rating;
            ++count(i, j);
            if (i == j) pd.self_ratings.push_back(r->rating);
        }
        std::vector<std::string> missing;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                if (count(i, j) == 0) missing.push_back("(" + stimuli[i] + "," + stimuli[j] + ")");
        if (!missing.empty()) {
            std::string m = "participant " + pid + ": " + std::to_string(missing.size()) + " missing pairs:";
            for (std::size_t k = 0; k < missing.size() && k < 20; ++k) m += " " + missing[k];
            if (missing.size() > 20) m += " ...";
            issues.push_back(m);
            continue;
        }
        pd.matrix.source = pid;
        pd.matrix.delta = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double d = sum(i, j) / count(i, j) - 1.0;
                pd.matrix.delta(i, j) = pd.matrix.delta(j, i) = d;
            }
        out.participants.push_back(std::move(pd));
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    out.accepted_records = records.size();
    return out;
}

/// Element-wise mean of equally sized matrices.
inline DissimilarityMatrix mean_dissimilarity(const std::vector<DissimilarityMatrix>& ms) {
    if (ms.empty()) throw std::invalid_argument("mean of zero matrices");
    DissimilarityMatrix out;
    out.delta = Eigen::MatrixXd::Zero(ms[0].n(), ms[0].n());
    for (const auto& m : ms) {
        if (m.n() != ms[0].n()) throw std::invalid_argument("matrices differ in size");
        out.delta += m.delta;
    }
    out.delta /= static_cast<double>(ms.size());
    return out;
}

// ---------------------------------------------------------------------------
// Participant screening

struct ScreeningOptions {
    double self_threshold = 2.0;         // mean self-pair rating minus one
    double correlation_threshold = 0.2;  // Pearson r against the rest of the group
};

struct ScreeningEntry {
    std::string participant;
    double self_statistic = 0.0;
    std::optional<double> correlation;
    bool flagged = false;
    std::vector<std::string> reasons;
};

struct ScreeningReport {
    std::vector<ScreeningEntry> entries;
    std::vector<std::string> notes;

    std::vector<std::string> flagged() const {
        std::vector<std::string> f;
        for (const auto& e : entries)
            if (e.flagged) f.push_back(e.participant);
        return f;
    }
};

inline std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    if (n < 2 || b.size() != n) return std::nullopt;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

inline std::vector<double> upper_triangle(const Eigen::MatrixXd& m) {
    std::vector<double> v;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) v.push_back(m(i, j));
    return v;
}

/// Flags participants with a high self-pair dissimilarity or a low
/// correlation with the mean of the remaining participants. Flagging is
/// advisory; nothing is excluded here.
inline ScreeningReport screen_participants(const std::vector<ParticipantData>& participants,
                                           const ScreeningOptions& opt = {}) {
    if (participants.empty()) throw std::invalid_argument("screen_participants: no participants");
    ScreeningReport report;
    const std::size_t k = participants.size();
    if (k < 2) report.notes.push_back("single participant: correlation criterion not applicable");
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(participants[0].matrix.n(), participants[0].matrix.n());
    for (const auto& p : participants) total += p.matrix.delta;

    for (const auto& p : participants) {
        ScreeningEntry e;
        e.participant = p.participant;
        if (!p.self_ratings.empty()) {
            double s = 0.0;
            for (double r : p.self_ratings) s += r;
            e.self_statistic = s / p.self_ratings.size() - 1.0;
        }
        if (e.self_statistic > opt.self_threshold) {
            e.flagged = true;
            e.reasons.push_back("self-pair dissimilarity " + std::to_string(e.self_statistic) + " > " +
                                std::to_string(opt.self_threshold));
        }
        if (k >= 2) {
            const Eigen::MatrixXd rest = (total - p.matrix.delta) / static_cast<double>(k - 1);
            e.correlation = pearson(upper_triangle(p.matrix.delta), upper_triangle(rest));
            if (!e.correlation) {
                report.notes.push_back("participant " + p.participant + ": correlation undefined (constant ratings)");
            } else if (*e.correlation < opt.correlation_threshold) {
                e.flagged = true;
                e.reasons.push_back("correlation with group " + std::to_string(*e.correlation) + " < " +
                                    std::to_string(opt.correlation_threshold));
            }
        }
        report.entries.push_back(std::move(e));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Metric MDS

struct Embedding {
    int dim = 0;
    Eigen::MatrixXd points;             // n x dim
    double stress1 = 0.0;
    std::vector<Eigen::VectorXd> weights;  // INDSCAL dimension weights per participant
    int iterations = 0;
    std::vector<double> stress_history;  // raw stress after init and every iteration
    std::vector<std::string> warnings;
};

struct MdsOptions {
    int max_iters = 1000;
    double tolerance = 1e-9;  // stop once one iteration lowers raw stress by less than this
    std::optional<std::uint64_t> random_init_seed;
};

inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x) {
    const int n = static_cast<int>(x.rows());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
    return d;
}

/// Raw stress: sum over i<j of (delta_ij - d_ij)^2.
inline double raw_stress(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& x) {
    const auto d = pairwise_distances(x);
    double s = 0.0;
    for (int i = 0; i < delta.rows(); ++i)
        for (int j = i + 1; j < delta.cols(); ++j) s += (delta(i, j) - d(i, j)) * (delta(i, j) - d(i, j));
    return s;
}

/// Kruskal stress-1 against optimally ratio-scaled dissimilarities.
inline double kruskal_stress1(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& x) {
    const auto d = pairwise_distances(x);
    double dd = 0.0, dl = 0.0, ll = 0.0;
    for (int i = 0; i < delta.rows(); ++i)
        for (int j = i + 1; j < delta.cols(); ++j) {
            dd += d(i, j) * d(i, j);
            dl += d(i, j) * delta(i, j);
            ll += delta(i, j) * delta(i, j);
        }
    if (dd <= 0.0 || ll <= 0.0) return 0.0;
    const double s = dl / ll;
    double num = 0.0;
    for (int i = 0; i < delta.rows(); ++i)
        for (int j = i + 1; j < delta.cols(); ++j) {
            const double r = d(i, j) - s * delta(i, j);
            num += r * r;
        }
    return std::sqrt(std::max(0.0, num / dd));
}

/// Torgerson scaling: top eigenvectors of the double-centered squared
/// dissimilarities. Non-positive eigenvalues give zero columns.
inline Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& delta, int dim) {
    const int n = static_cast<int>(delta.rows());
    const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    const Eigen::MatrixXd b = -0.5 * j * delta.array().square().matrix() * j;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, dim);
    for (int a = 0; a < dim && a < n; ++a) {
        const int col = n - 1 - a;
        const double lambda = es.eigenvalues()(col);
        if (lambda > 0.0) x.col(a) = es.eigenvectors().col(col) * std::sqrt(lambda);
    }
    return x;
}

namespace detail {

// Guttman transform with unit weights: (1/n) B(X) X. Row i is summed as
// sum_j delta_ij / d_ij (x_i - x_j), which stays accurate when two points
// nearly coincide; the expanded matrix product does not.
inline Eigen::MatrixXd guttman(const Eigen::MatrixXd& delta, const Eigen::MatrixXd& x) {
    const int n = static_cast<int>(x.rows());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, x.cols());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const Eigen::RowVectorXd diff = x.row(i) - x.row(j);
            const double d = diff.norm();
            if (d <= 1e-300) continue;
            const Eigen::RowVectorXd pull = (delta(i, j) / d) * diff;
            out.row(i) += pull;
            out.row(j) -= pull;
        }
    return out / static_cast<double>(n);
}

inline double squared_sum_upper(const Eigen::MatrixXd& m) {
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) s += m(i, j) * m(i, j);
    return s;
}

inline Eigen::MatrixXd centered(Eigen::MatrixXd x) {
    x.rowwise() -= x.colwise().mean();
    return x;
}

}  // namespace detail

/// SMACOF iterations from a given start configuration.
inline Embedding smacof(const Eigen::MatrixXd& delta, Eigen::MatrixXd x, const MdsOptions& opt = {}) {
    Embedding e;
    e.dim = static_cast<int>(x.cols());
    x = detail::centered(std::move(x));
    double stress = raw_stress(delta, x);
    e.stress_history.push_back(stress);
    for (int it = 0; it < opt.max_iters; ++it) {
        Eigen::MatrixXd next = detail::guttman(delta, x);
        const double s = raw_stress(delta, next);
        // At the fixed point rounding can lift the stress by an ulp; keep the old state.
        if (s > stress) break;
        e.iterations = it + 1;
        e.stress_history.push_back(s);
        x = std::move(next);
        const double change = stress - s;
        stress = s;
        if (change < opt.tolerance) break;
    }
    e.points = std::move(x);
    e.stress1 = kruskal_stress1(delta, e.points);
    return e;
}

/// Metric MDS: classical start (or a seeded random start) refined by stress
/// majorization.
inline Embedding mds(const DissimilarityMatrix& m, int dim, const MdsOptions& opt = {}) {
    check_dissimilarities(m);
    if (dim < 1) throw std::invalid_argument("mds: dim must be >= 1");
    const int n = m.n();
    if (detail::squared_sum_upper(m.delta) == 0.0) {
        Embedding e;
        e.dim = dim;
        e.points = Eigen::MatrixXd::Zero(n, dim);
        e.stress1 = 0.0;
        e.stress_history.push_back(0.0);
        e.warnings.push_back("all dissimilarities are zero; points coincide");
        return e;
    }
    Eigen::MatrixXd start;
    if (opt.random_init_seed) {
        std::mt19937_64 rng(*opt.random_init_seed);
        std::normal_distribution<double> g(0.0, 1.0);
        start.resize(n, dim);
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < dim; ++a) start(i, a) = g(rng);
        const double scale = std::sqrt(detail::squared_sum_upper(m.delta) /
                                       std::max(1e-300, detail::squared_sum_upper(pairwise_distances(start))));
        start *= scale;
    } else {
        start = classical_mds(m.delta, dim);
    }
    return smacof(m.delta, std::move(start), opt);
}

/// Stress-1 for every dimension 1..max_dim. Each dimension also restarts from
/// the previous solution padded with a zero column, so the curve cannot rise.
inline std::vector<double> scree(const DissimilarityMatrix& m, int max_dim, const MdsOptions& opt = {}) {
    if (max_dim < 1) throw std::invalid_argument("scree: max_dim must be >= 1");
    std::vector<double> out;
    Eigen::MatrixXd prev;
    for (int k = 1; k <= max_dim; ++k) {
        Embedding best = mds(m, k, opt);
        if (k > 1) {
            Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(m.n(), k);
            padded.leftCols(k - 1) = prev;
            Embedding alt = smacof(m.delta, padded, opt);
            if (alt.stress1 < best.stress1) best = std::move(alt);
        }
        prev = best.points;
        out.push_back(best.stress1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// INDSCAL

/// Weighted Euclidean model d_ij^(k) = sqrt(sum_a w_a^(k) (x_ia - x_ja)^2)
/// fitted by alternating majorization: every sweep computes each
/// participant's Guttman transform, then updates the group space and the
/// non-negative dimension scales in closed form.
inline Embedding indscal(const std::vector<DissimilarityMatrix>& ms, int dim, const MdsOptions& opt = {}) {
    if (ms.empty()) throw std::invalid_argument("indscal: no participants");
    for (const auto& m : ms) {
        check_dissimilarities(m);
        if (m.n() != ms[0].n()) throw std::invalid_argument("indscal: participants differ in stimulus count");
    }
    if (dim < 1) throw std::invalid_argument("indscal: dim must be >= 1");
    if (ms.size() == 1) {
        Embedding e = mds(ms[0], dim, opt);
        e.weights.assign(1, Eigen::VectorXd::Ones(dim));
        e.warnings.push_back("single participant: fell back to plain MDS");
        return e;
    }
    const int n = ms[0].n();
    const std::size_t k_count = ms.size();
    double eta = 0.0;
    for (const auto& m : ms) eta += detail::squared_sum_upper(m.delta);

    Embedding e;
    e.dim = dim;
    if (eta == 0.0) {
        e.points = Eigen::MatrixXd::Zero(n, dim);
        e.weights.assign(k_count, Eigen::VectorXd::Ones(dim));
        e.stress_history.push_back(0.0);
        e.warnings.push_back("all dissimilarities are zero; points coincide");
        return e;
    }

    Eigen::MatrixXd x = detail::centered(classical_mds(mean_dissimilarity(ms).delta, dim));
    std::vector<Eigen::VectorXd> c(k_count, Eigen::VectorXd::Ones(dim));  // w = c^2

    auto config = [&](std::size_t k) { return Eigen::MatrixXd(x * c[k].asDiagonal()); };
    auto total_stress = [&] {
        double s = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) s += raw_stress(ms[k].delta, config(k));
        return s;
    };

    double stress = total_stress();
    e.stress_history.push_back(stress);
    for (int it = 0; it < opt.max_iters; ++it) {
        const Eigen::MatrixXd x_prev = x;
        const std::vector<Eigen::VectorXd> c_prev = c;
        std::vector<Eigen::MatrixXd> target(k_count);
        for (std::size_t k = 0; k < k_count; ++k) target[k] = detail::guttman(ms[k].delta, config(k));

        for (int a = 0; a < dim; ++a) {
            Eigen::VectorXd num = Eigen::VectorXd::Zero(n);
            double den = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) {
                num += c[k](a) * target[k].col(a);
                den += c[k](a) * c[k](a);
            }
            if (den > 0.0) x.col(a) = num / den;
        }
        for (int a = 0; a < dim; ++a) {
            const double xx = x.col(a).squaredNorm();
            for (std::size_t k = 0; k < k_count; ++k)
                c[k](a) = xx > 0.0 ? std::max(0.0, x.col(a).dot(target[k].col(a)) / xx) : 0.0;
        }
        // Identification: mean squared scale of every dimension is one.
        for (int a = 0; a < dim; ++a) {
            double ms2 = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) ms2 += c[k](a) * c[k](a);
            ms2 /= static_cast<double>(k_count);
            if (ms2 > 0.0) {
                const double s = std::sqrt(ms2);
                x.col(a) *= s;
                for (auto& ck : c) ck(a) /= s;
            }
        }

        const double s = total_stress();
        if (s > stress) {
            x = x_prev;
            c = c_prev;
            break;
        }
        e.iterations = it + 1;
        e.stress_history.push_back(s);
        const double change = stress - s;
        stress = s;
        if (change < opt.tolerance) break;
    }

    e.points = x;
    e.weights.resize(k_count);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
        e.weights[k] = c[k].array().square().matrix();
        const auto d = pairwise_distances(config(k));
        const auto& delta = ms[k].delta;
        double dd = 0.0, dl = 0.0, ll = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                dd += d(i, j) * d(i, j);
                dl += d(i, j) * delta(i, j);
                ll += delta(i, j) * delta(i, j);
            }
        const double scale = ll > 0.0 ? dl / ll : 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) num += (d(i, j) - scale * delta(i, j)) * (d(i, j) - scale * delta(i, j));
        den += dd;
    }
    e.stress1 = den > 0.0 ? std::sqrt(num / den) : 0.0;
    return e;
}

// ---------------------------------------------------------------------------
// Kabsch

struct KabschResult {
    Eigen::MatrixXd rotation;     // d x d orthogonal
    Eigen::VectorXd translation;  // maps a row of A onto B: b ~ R a + t
    double rmsd = 0.0;
};

/// Least-squares rigid alignment of A onto B (rows are corresponding points).
/// Without reflections the result is a proper rotation.
inline KabschResult kabsch_align(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool allow_reflection = false) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("kabsch_align: point sets differ in size");
    if (a.rows() < 2) throw std::invalid_argument("kabsch_align: need at least 2 points");
    const Eigen::VectorXd ca = a.colwise().mean().transpose();
    const Eigen::VectorXd cb = b.colwise().mean().transpose();
    const Eigen::MatrixXd a0 = a.rowwise() - ca.transpose();
    const Eigen::MatrixXd b0 = b.rowwise() - cb.transpose();
    const Eigen::MatrixXd h = a0.transpose() * b0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd v = svd.matrixV();
    const Eigen::MatrixXd u = svd.matrixU();
    if (!allow_reflection && (v * u.transpose()).determinant() < 0.0) v.col(v.cols() - 1) *= -1.0;

    KabschResult r;
    r.rotation = v * u.transpose();
    r.translation = cb - r.rotation * ca;
    const Eigen::MatrixXd moved = (a * r.rotation.transpose()).rowwise() + r.translation.transpose();
    r.rmsd = std::sqrt((moved - b).squaredNorm() / static_cast<double>(a.rows()));
    return r;
}

/// Applies a Kabsch result to every row of A.
inline Eigen::MatrixXd apply_alignment(const KabschResult& k, const Eigen::MatrixXd& a) {
    return (a * k.rotation.transpose()).rowwise() + k.translation.transpose();
}

}  // namespace ptex
