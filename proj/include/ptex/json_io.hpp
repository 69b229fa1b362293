#pragma once

// JSON documents written and read by the command line tool: image sidecars,
// embeddings, level sets and the pipeline configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptex/perception.hpp"
#include "ptex/reparam.hpp"
#include "ptex/texture_synth.hpp"

namespace ptex {

using json = nlohmann::ordered_json;

inline std::string format_density(double d) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", d);
    return buf;
}

/// `{type}_{density}_{seed}.png`; crosshatch densities are written `dhxdv`.
inline std::string texture_filename(const TextureInstance& t, const std::string& ext = ".png") {
    std::string label = format_density(t.target_density);
    if (t.spec.texture_type == TextureType::crosshatch && t.target_h && t.target_v)
        label = format_density(*t.target_h) + "x" + format_density(*t.target_v);
    return to_string(t.spec.texture_type) + "_" + label + "_" + std::to_string(t.spec.seed) + ext;
}

/// Stimulus key for the rating CSV, e.g. "stipple:0.350" or "crosshatch:0.200x0.400".
inline std::string stimulus_key(const TextureInstance& t) {
    const std::string name = texture_filename(t, "");
    const auto last = name.rfind('_');
    const auto first = name.rfind('_', last - 1);
    return name.substr(0, first) + ":" + name.substr(first + 1, last - first - 1);
}

/// Inverse of texture_filename for stimulus directories: the key of
/// "stipple_0.350_7.png" is "stipple:0.350".
inline std::optional<std::string> stimulus_key_from_filename(const std::string& file) {
    const auto dot = file.rfind('.');
    const std::string stem = file.substr(0, dot);
    const auto last = stem.rfind('_');
    if (last == std::string::npos) return std::nullopt;
    // Type names may contain '_' (hatch_h), so split at the last '_' before the label.
    const auto first = stem.rfind('_', last - 1);
    if (first == std::string::npos || first == 0) return std::nullopt;
    const std::string key = stem.substr(0, first) + ":" + stem.substr(first + 1, last - first - 1);
    try {
        StimulusKey::parse(key);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
    return key;
}

inline json spec_to_json(const TextureSpec& s) {
    return json{{"width", s.width},
                {"height", s.height},
                {"stipple_diameter", s.stipple_diameter},
                {"stroke_width", s.stroke_width},
                {"hatch_length_min", s.hatch_length_min},
                {"hatch_length_max", s.hatch_length_max},
                {"candidates_per_line", s.candidates_per_line},
                {"lloyd_iters_per_batch", s.lloyd_iters_per_batch},
                {"lbg_split_factor", s.lbg_split_factor},
                {"lbg_remove_factor", s.lbg_remove_factor}};
}

inline json sidecar_json(const TextureInstance& t) {
    json j{{"texture_type", to_string(t.spec.texture_type)},
           {"target_density", t.target_density},
           {"measured_density", t.measured_density},
           {"seed", t.spec.seed},
           {"primitive_count", t.primitives.size()}};
    if (t.target_h) {
        j["target_h"] = *t.target_h;
        j["target_v"] = *t.target_v;
        j["measured_h"] = *t.measured_h;
        j["measured_v"] = *t.measured_v;
    }
    j["spec"] = spec_to_json(t.spec);
    if (!t.warnings.empty()) j["warnings"] = t.warnings;
    return j;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty()) throw std::invalid_argument("expected a non-empty array of rows");
    const auto n = rows.size();
    const auto m = rows[0].size();
    Eigen::MatrixXd out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != m) throw std::invalid_argument("ragged matrix rows");
        for (std::size_t j = 0; j < m; ++j) out(i, j) = rows[i][j].get<double>();
    }
    return out;
}

inline json embedding_to_json(const Embedding& e) {
    json j{{"dim", e.dim}, {"points", matrix_to_json(e.points)}, {"stress1", e.stress1}};
    if (!e.weights.empty()) {
        json w = json::array();
        for (const auto& v : e.weights) w.push_back(std::vector<double>(v.data(), v.data() + v.size()));
        j["weights"] = w;
    }
    j["iterations"] = e.iterations;
    if (!e.warnings.empty()) j["warnings"] = e.warnings;
    return j;
}

/// Reads an embedding with density labels, either a bare embedding object
/// carrying "densities" or an analysis report with "embedding" and "densities".
inline LabeledEmbedding labeled_embedding_from_json(const json& doc) {
    const json& emb = doc.contains("embedding") ? doc.at("embedding") : doc;
    const json* dens = doc.contains("densities") ? &doc.at("densities") : emb.contains("densities") ? &emb.at("densities") : nullptr;
    if (!dens) throw std::invalid_argument("embedding has no density labels");
    const Eigen::MatrixXd pts = matrix_from_json(emb.at("points"));
    LabeledEmbedding out;
    for (int i = 0; i < pts.rows(); ++i)
        out.points.emplace_back(pts(i, 0), pts.cols() > 1 ? pts(i, 1) : 0.0);
    out.densities = dens->get<std::vector<double>>();
    out.validate();
    return out;
}

inline json sigmoid_to_json(const SigmoidParams& p) { return json{{"a", p.a}, {"b", p.b}, {"rmse", p.rmse}}; }

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// Pipeline configuration

struct PipelineConfig {
    TextureType texture_type = TextureType::stipple;
    std::optional<double> step;  // stimulus spacing; per-type default when unset
    std::uint64_t seed = 0;
    int mds_dim = 2;
    std::optional<int> sg_degree;
    std::optional<int> sg_window;
    int levels = 5;
    std::string output_dir = ".";
    double density_tolerance = 0.01;
    TextureSpec texture;

    static double default_step(TextureType t) { return study_kind(t) == StudyKind::hatch ? 0.2 : 0.05; }
    static int default_degree(TextureType t) { return study_kind(t) == StudyKind::hatch ? 2 : 3; }
    static int default_window(TextureType t) { return study_kind(t) == StudyKind::stipple ? 7 : 5; }

    double effective_step() const { return step.value_or(default_step(texture_type)); }
    int effective_degree() const { return sg_degree.value_or(default_degree(texture_type)); }
    int effective_window() const { return sg_window.value_or(default_window(texture_type)); }
};

/// Overlays the keys present in `j` onto `cfg`; unknown keys are rejected.
inline void apply_config_json(PipelineConfig& cfg, const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "texture_type") cfg.texture_type = parse_texture_type(v.get<std::string>());
        else if (key == "step") cfg.step = v.get<double>();
        else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
        else if (key == "mds_dim") cfg.mds_dim = v.get<int>();
        else if (key == "sg_degree") cfg.sg_degree = v.get<int>();
        else if (key == "sg_window") cfg.sg_window = v.get<int>();
        else if (key == "levels") cfg.levels = v.get<int>();
        else if (key == "output_dir") cfg.output_dir = v.get<std::string>();
        else if (key == "density_tolerance") cfg.density_tolerance = v.get<double>();
        else if (key == "width") cfg.texture.width = v.get<int>();
        else if (key == "height") cfg.texture.height = v.get<int>();
        else if (key == "stipple_diameter") cfg.texture.stipple_diameter = v.get<double>();
        else if (key == "stroke_width") cfg.texture.stroke_width = v.get<double>();
        else if (key == "hatch_length_min") cfg.texture.hatch_length_min = v.get<double>();
        else if (key == "hatch_length_max") cfg.texture.hatch_length_max = v.get<double>();
        else if (key == "candidates_per_line") cfg.texture.candidates_per_line = v.get<int>();
        else if (key == "lloyd_iters_per_batch") cfg.texture.lloyd_iters_per_batch = v.get<int>();
        else if (key == "lbg_split_factor") cfg.texture.lbg_split_factor = v.get<double>();
        else if (key == "lbg_remove_factor") cfg.texture.lbg_remove_factor = v.get<double>();
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

}  // namespace ptex
