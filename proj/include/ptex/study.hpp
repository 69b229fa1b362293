#pragma once

// Rating sessions for the pairwise study: one shuffled pair plan per
// participant, a monotone cursor, and CSV export in the ingest schema.
// Sessions live in memory; an optional journal directory gets one
// append-only file per session that is replayed on start-up.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptex/perception.hpp"

namespace ptex {

/// Failure carrying the HTTP status it maps to.
class StudyError : public std::runtime_error {
public:
    StudyError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

struct Stimulus {
    std::string key;  // e.g. "stipple:0.350"
    std::string url;  // where the UI fetches the image
};

struct StudySession {
    std::string id;
    std::string participant;
    std::uint64_t seed = 0;
    std::vector<StimulusPair> order;
    std::size_t cursor = 0;
    std::vector<RatingRecord> records;

    bool complete() const { return cursor >= order.size(); }
};

struct NextPair {
    std::size_t pair_index = 0;
    const Stimulus* left = nullptr;
    const Stimulus* right = nullptr;
    std::size_t done = 0;
    std::size_t total = 0;
};

inline constexpr const char* kStudyBackground = "#808080";

class StudyRegistry {
public:
    StudyRegistry(std::vector<Stimulus> stimuli, std::uint64_t seed,
                  std::optional<std::filesystem::path> journal_dir = std::nullopt)
        : stimuli_(std::move(stimuli)), seed_(seed), journal_dir_(std::move(journal_dir)) {
        if (stimuli_.empty()) throw std::invalid_argument("study needs at least one stimulus");
        if (journal_dir_) {
            std::filesystem::create_directories(*journal_dir_);
            replay();
        }
    }

    const std::vector<Stimulus>& stimuli() const { return stimuli_; }
    std::size_t pairs_per_session() const { return pair_count(stimuli_.size()); }

    /// Starts a session. Without an explicit seed, session k of this server
    /// uses server seed + k.
    std::string create(std::optional<std::string> participant = std::nullopt,
                       std::optional<std::uint64_t> seed = std::nullopt) {
        if (participant && (participant->empty() || participant->find_first_of(",\r\n") != std::string::npos))
            throw StudyError(400, "participant id must be non-empty without commas or line breaks");
        std::lock_guard lock(mu_);
        const std::uint64_t s = seed.value_or(seed_ + counter_);
        auto session = std::make_shared<Entry>();
        session->s.id = "s" + std::to_string(++counter_);
        session->s.participant = participant.value_or(session->s.id);
        session->s.seed = s;
        session->s.order = enumerate_pairs(static_cast<int>(stimuli_.size()), s);
        journal(session->s, "session," + session->s.participant + "," + std::to_string(s));
        sessions_[session->s.id] = session;
        return session->s.id;
    }

    NextPair next(const std::string& id) const {
        auto e = find(id);
        std::lock_guard lock(e->mu);
        const auto& s = e->s;
        if (s.complete()) throw StudyError(409, "session " + id + " is complete");
        const auto& p = s.order[s.cursor];
        return {s.cursor, &stimuli_[p.left], &stimuli_[p.right], s.cursor, s.order.size()};
    }

    /// Records the rating of the pair at the cursor. Anything else is
    /// rejected: ratings outside 1..9 with 422, stale or future indices and
    /// completed sessions with 409.
    void submit(const std::string& id, std::size_t pair_index, int rating) {
        auto e = find(id);
        std::lock_guard lock(e->mu);
        auto& s = e->s;
        if (rating < kMinRating || rating > kMaxRating)
            throw StudyError(422, "rating " + std::to_string(rating) + " outside 1..9");
        if (s.complete()) throw StudyError(409, "session " + id + " is complete");
        if (pair_index != s.cursor)
            throw StudyError(409, "expected pair " + std::to_string(s.cursor) + ", got " + std::to_string(pair_index));
        apply(s, rating);
        journal(s, "rating," + std::to_string(pair_index) + "," + std::to_string(rating));
    }

    StudySession snapshot(const std::string& id) const {
        auto e = find(id);
        std::lock_guard lock(e->mu);
        return e->s;
    }

    std::string export_csv(const std::string& id) const {
        const auto s = snapshot(id);
        std::string out = ratings_csv_header();
        for (const auto& r : s.records)
            out += r.participant + "," + r.stimulus_a + "," + r.stimulus_b + "," + std::to_string(r.rating) + "\n";
        return out;
    }

    std::vector<std::string> session_ids() const {
        std::lock_guard lock(mu_);
        std::vector<std::string> ids;
        for (const auto& [id, e] : sessions_) ids.push_back(id);
        return ids;
    }

private:
    struct Entry {
        std::mutex mu;
        StudySession s;
    };

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard lock(mu_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw StudyError(404, "unknown session " + id);
        return it->second;
    }

    void apply(StudySession& s, int rating) {
        const auto& p = s.order[s.cursor];
        s.records.push_back({s.participant, stimuli_[p.left].key, stimuli_[p.right].key, rating, std::nullopt});
        ++s.cursor;
    }

    void journal(const StudySession& s, const std::string& line) const {
        if (!journal_dir_) return;
        std::ofstream out(*journal_dir_ / (s.id + ".journal"), std::ios::app);
        out << line << '\n';
        if (!out) throw std::runtime_error("cannot append to journal for session " + s.id);
    }

    void replay() {
        std::vector<std::filesystem::path> files;
        for (const auto& f : std::filesystem::directory_iterator(*journal_dir_))
            if (f.path().extension() == ".journal") files.push_back(f.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto e = std::make_shared<Entry>();
            e->s.id = f.stem().string();
            std::ifstream in(f);
            std::string line;
            bool started = false;
            while (std::getline(in, line)) {
                std::vector<std::string> cols;
                std::stringstream ss(line);
                std::string c;
                while (std::getline(ss, c, ',')) cols.push_back(c);
                if (cols.size() == 3 && cols[0] == "session") {
                    e->s.participant = cols[1];
                    e->s.seed = std::stoull(cols[2]);
                    e->s.order = enumerate_pairs(static_cast<int>(stimuli_.size()), e->s.seed);
                    started = true;
                } else if (started && cols.size() == 3 && cols[0] == "rating" && !e->s.complete() &&
                           std::stoul(cols[1]) == e->s.cursor) {
                    apply(e->s, std::stoi(cols[2]));
                }
            }
            if (!started) continue;
            const std::string& id = e->s.id;
            if (id.size() > 1 && id[0] == 's') {
                try {
                    counter_ = std::max<std::uint64_t>(counter_, std::stoull(id.substr(1)));
                } catch (const std::exception&) {
                }
            }
            sessions_[id] = e;
        }
    }

    std::vector<Stimulus> stimuli_;
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
    std::optional<std::filesystem::path> journal_dir_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace ptex
