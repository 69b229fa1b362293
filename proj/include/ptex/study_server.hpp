#pragma once

// HTTP/JSON front of StudyRegistry.
//
//   POST /session                 {participant?, seed?} -> {id, pair_count}
//   GET  /session/{id}/next       -> {pair_index, left, right, progress, background}
//   POST /session/{id}/rating     {pair_index, rating}
//   GET  /session/{id}/export     -> ratings CSV
//   GET  /stimuli/{file}          -> stimulus images

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Eigen before httplib: <resolv.h> defines a `_res` macro that breaks Eigen.
#include "ptex/json_io.hpp"
#include "ptex/study.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ptex {

/// Stimuli from a directory of generated images, ordered like the rating
/// analysis orders its keys. Files whose names carry no stimulus key are skipped.
inline std::vector<Stimulus> discover_stimuli(const std::filesystem::path& dir,
                                              const std::string& url_prefix = "/stimuli/") {
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error(dir.string() + ": not a directory");
    std::map<std::string, std::string> by_key;
    for (const auto& f : std::filesystem::directory_iterator(dir)) {
        const auto ext = f.path().extension().string();
        if (ext != ".png" && ext != ".pgm") continue;
        const auto key = stimulus_key_from_filename(f.path().filename().string());
        if (!key) continue;
        const auto [it, fresh] = by_key.emplace(*key, url_prefix + f.path().filename().string());
        if (!fresh) throw std::runtime_error("two stimulus files share key " + *key);
    }
    std::vector<std::string> keys;
    for (const auto& [k, u] : by_key) keys.push_back(k);
    std::vector<Stimulus> out;
    for (const auto& k : order_stimuli(keys)) out.push_back({k, by_key[k]});
    return out;
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const StudyError& e) {
            send_error(res, e.status(), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, std::string("malformed request body: ") + e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    };
}

}  // namespace detail

inline void register_study_routes(httplib::Server& server, StudyRegistry& registry,
                                  const std::optional<std::filesystem::path>& stimulus_dir = std::nullopt) {
    using nlohmann::ordered_json;
    using detail::guarded;

    server.Post("/session", guarded([&registry](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> participant;
        std::optional<std::uint64_t> seed;
        if (!req.body.empty()) {
            const auto body = ordered_json::parse(req.body);
            if (body.contains("participant")) participant = body.at("participant").get<std::string>();
            if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
        }
        const auto id = registry.create(participant, seed);
        detail::send_json(res, 201, {{"id", id}, {"pair_count", registry.pairs_per_session()}});
    }));

    server.Get(R"(/session/([^/]+)/next)", guarded([&registry](const httplib::Request& req, httplib::Response& res) {
        const auto n = registry.next(req.matches[1]);
        detail::send_json(res, 200,
                          {{"pair_index", n.pair_index},
                           {"left", {{"key", n.left->key}, {"url", n.left->url}}},
                           {"right", {{"key", n.right->key}, {"url", n.right->url}}},
                           {"progress", {{"done", n.done}, {"total", n.total}}},
                           {"background", kStudyBackground}});
    }));

    server.Post(R"(/session/([^/]+)/rating)", guarded([&registry](const httplib::Request& req, httplib::Response& res) {
        const auto body = ordered_json::parse(req.body);
        const auto& r = body.at("rating");
        if (!r.is_number_integer()) throw StudyError(422, "rating must be an integer 1..9");
        const auto index = body.at("pair_index").get<std::size_t>();
        registry.submit(req.matches[1], index, r.get<int>());
        const auto s = registry.snapshot(req.matches[1]);
        detail::send_json(res, 200, {{"accepted", true}, {"progress", {{"done", s.cursor}, {"total", s.order.size()}}},
                                     {"complete", s.complete()}});
    }));

    server.Get(R"(/session/([^/]+)/export)", guarded([&registry](const httplib::Request& req, httplib::Response& res) {
        res.set_content(registry.export_csv(req.matches[1]), "text/csv");
    }));

    if (stimulus_dir) server.set_mount_point("/stimuli", stimulus_dir->string());
}

}  // namespace ptex
