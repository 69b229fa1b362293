// ptex: texture generation, measurement, rating analysis, level emission,
// continuous maps and the rating study server.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ptex/continuous.hpp"
#include "ptex/image_io.hpp"
#include "ptex/json_io.hpp"
#include "ptex/perception.hpp"
#include "ptex/reparam.hpp"
#include "ptex/study_server.hpp"
#include "ptex/texture_synth.hpp"

namespace fs = std::filesystem;
using namespace ptex;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> type;
    std::optional<double> step;

    PipelineConfig load() const {
        PipelineConfig cfg;
        if (config) {
            try {
                apply_config_json(cfg, read_json_file(*config));
            } catch (const json::exception& e) {
                throw UsageError(*config + ": " + e.what());
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
        }
        if (seed) cfg.seed = *seed;
        if (type) cfg.texture_type = parse_texture_type(*type);
        if (step) cfg.step = *step;
        cfg.texture.seed = cfg.seed;
        return cfg;
    }
};

void add_common(CLI::App* app, Common& c, bool with_type = true) {
    app->add_option("--config", c.config, "JSON file with pipeline settings; flags override it");
    app->add_option("--seed", c.seed, "random seed");
    if (with_type) app->add_option("--type", c.type, "stipple, triangle, hatch_h, hatch_v or crosshatch");
    app->add_option("--step", c.step, "stimulus density step");
}

void warn_all(const TextureInstance& t) {
    for (const auto& w : t.warnings) std::cerr << "warning: " << texture_filename(t) << ": " << w << "\n";
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void emit(const std::optional<std::string>& out, const json& j) {
    if (out)
        write_text_file(*out, dump(j));
    else
        std::cout << dump(j);
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    Common common;
    std::optional<double> density, series, grid, dh, dv;
    std::optional<std::string> out;
    std::optional<int> size;
    std::string format = "png";
};

int cmd_generate(const GenerateArgs& a) {
    PipelineConfig cfg = a.common.load();
    if (a.size) cfg.texture.width = cfg.texture.height = *a.size;
    if (a.out) cfg.output_dir = *a.out;
    const int modes = (a.density ? 1 : 0) + (a.series ? 1 : 0) + (a.grid ? 1 : 0) + ((a.dh || a.dv) ? 1 : 0);
    if (modes != 1) throw UsageError("give exactly one of --density, --series, --grid or --dh/--dv");
    if ((a.dh || a.dv) && !(a.dh && a.dv)) throw UsageError("--dh and --dv go together");
    if (a.format != "png" && a.format != "pgm") throw UsageError("--format must be png or pgm");
    cfg.texture.validate();
    const TextureType type = cfg.texture_type;

    std::vector<TextureInstance> out;
    if (a.density) {
        switch (type) {
            case TextureType::stipple: out.push_back(gen_stipple(*a.density, cfg.texture)); break;
            case TextureType::triangle: out.push_back(gen_triangle_texture(*a.density, cfg.texture)); break;
            case TextureType::hatch_h:
                out.push_back(gen_hatch(*a.density, HatchOrientation::horizontal, cfg.texture));
                break;
            case TextureType::hatch_v: out.push_back(gen_hatch(*a.density, HatchOrientation::vertical, cfg.texture)); break;
            case TextureType::crosshatch: out.push_back(gen_crosshatch(*a.density, *a.density, cfg.texture)); break;
        }
    } else if (a.dh) {
        if (type != TextureType::crosshatch) throw UsageError("--dh/--dv need --type crosshatch");
        out.push_back(gen_crosshatch(*a.dh, *a.dv, cfg.texture));
    } else {
        const double step = a.series ? *a.series : *a.grid;
        if (a.grid && type != TextureType::crosshatch) throw UsageError("--grid needs --type crosshatch");
        out = gen_stimulus_set(type, step, cfg.texture);
    }

    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    for (const auto& t : out) {
        const fs::path img = dir / texture_filename(t, "." + a.format);
        write_image(img, t.raster);
        write_text_file(fs::path(img).replace_extension(".json"), dump(sidecar_json(t)));
        warn_all(t);
        std::cout << img.string() << " " << format_density(t.measured_density) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct MeasureArgs {
    std::vector<std::string> files;
    std::optional<int> block;
};

int cmd_measure(const MeasureArgs& a) {
    json out = json::array();
    for (const auto& f : a.files) {
        const Raster r = read_image(f);
        json j{{"file", f}, {"width", r.width()}, {"height", r.height()}, {"density", measure_density(r)}};
        if (a.block) {
            if (*a.block < 1) throw UsageError("--block must be >= 1");
            const auto g = block_means(r, *a.block);
            j["blocks"] = {{"size", g.block}, {"nx", g.nx}, {"ny", g.ny}, {"values", g.values}};
        }
        out.push_back(std::move(j));
    }
    std::cout << dump(out);
    return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    Common common;
    std::string csv;
    std::optional<int> dim;
    int scree_max = 4;
    bool exclude_flagged = false;
    std::optional<std::string> out;
};

int cmd_analyze(const AnalyzeArgs& a) {
    PipelineConfig cfg = a.common.load();
    if (a.dim) cfg.mds_dim = *a.dim;
    if (cfg.mds_dim < 1) throw UsageError("--dim must be >= 1");
    if (a.scree_max < 1) throw UsageError("--scree-max must be >= 1");

    std::ifstream in(a.csv);
    if (!in) throw std::runtime_error(a.csv + ": cannot open");
    const auto records = parse_ratings_csv(in);
    const IngestResult data = ingest_ratings(records);
    const ScreeningReport screening = screen_participants(data.participants);

    std::vector<ParticipantData> used;
    for (std::size_t i = 0; i < data.participants.size(); ++i)
        if (!a.exclude_flagged || !screening.entries[i].flagged) used.push_back(data.participants[i]);
    if (used.empty()) throw ValidationError({"every participant was flagged; nothing left to analyze"});
    std::vector<DissimilarityMatrix> matrices;
    for (const auto& p : used) matrices.push_back(p.matrix);

    json doc;
    doc["stimuli"] = data.stimuli;
    std::vector<double> densities;
    for (const auto& k : data.stimuli) {
        const auto key = StimulusKey::parse(k);
        if (key.values.size() != 1) {
            densities.clear();
            break;
        }
        const double step = a.common.step.value_or(
            cfg.step.value_or(PipelineConfig::default_step(parse_texture_type(key.type))));
        densities.push_back(key.density(step));
    }
    if (!densities.empty()) doc["densities"] = densities;
    doc["accepted_records"] = data.accepted_records;

    json parts = json::array();
    for (const auto& p : data.participants) {
        json pj{{"participant", p.participant}, {"matrix", matrix_to_json(p.matrix.delta)}};
        if (!p.duplicates.empty()) {
            pj["duplicates"] = p.duplicates;
            std::cerr << "warning: participant " << p.participant << " repeated " << p.duplicates.size()
                      << " pairs; ratings averaged\n";
        }
        parts.push_back(std::move(pj));
    }
    doc["participants"] = parts;

    json scr = json::array();
    for (const auto& e : screening.entries) {
        json ej{{"participant", e.participant}, {"self_statistic", e.self_statistic}};
        ej["correlation"] = e.correlation ? json(*e.correlation) : json(nullptr);
        ej["flagged"] = e.flagged;
        if (!e.reasons.empty()) ej["reasons"] = e.reasons;
        scr.push_back(std::move(ej));
    }
    doc["screening"] = {{"entries", scr}, {"notes", screening.notes}, {"excluded", a.exclude_flagged}};

    const Embedding emb = indscal(matrices, cfg.mds_dim);
    doc["embedding"] = embedding_to_json(emb);
    doc["scree"] = scree(mean_dissimilarity(matrices), a.scree_max);
    for (const auto& w : emb.warnings) std::cerr << "warning: " << w << "\n";
    emit(a.out, doc);
    return 0;
}

// ---------------------------------------------------------------------------

struct LevelsArgs {
    Common common;
    std::optional<std::string> embedding;
    std::optional<std::string> reference;
    bool via_sigmoid = false;
    std::optional<int> n;
    std::optional<int> degree, window;
    bool search = false;
    std::optional<std::string> out;
};

int cmd_levels(const LevelsArgs& a) {
    PipelineConfig cfg = a.common.load();
    if (a.n) cfg.levels = *a.n;
    if (a.degree) cfg.sg_degree = *a.degree;
    if (a.window) cfg.sg_window = *a.window;
    if (cfg.levels < 1) throw UsageError("--n must be >= 1");
    if (a.reference.has_value() == a.embedding.has_value())
        throw UsageError("give either an embedding file or --reference <type>");

    json doc;
    if (a.reference) {
        const TextureType type = parse_texture_type(*a.reference);
        const SigmoidParams p = reference_sigmoid(type);
        doc["texture_type"] = *a.reference;
        doc["source"] = a.via_sigmoid ? "reference sigmoid" : "reference table";
        std::vector<double> levels;
        if (a.via_sigmoid) {
            for (int k = 1; k <= cfg.levels; ++k) levels.push_back(sigmoid_eval(p, static_cast<double>(k) / (cfg.levels + 1)));
        } else {
            if (cfg.levels != 5) throw UsageError("stored levels exist for n=5 only; add --via-sigmoid");
            const auto stored = reference_levels(type);
            levels.assign(stored.begin(), stored.end());
        }
        doc["levels"] = levels;
        doc["sigmoid"] = sigmoid_to_json(p);
        emit(a.out, doc);
        return 0;
    }

    LabeledEmbedding emb;
    try {
        emb = labeled_embedding_from_json(read_json_file(*a.embedding));
    } catch (const json::exception& e) {
        throw UsageError(*a.embedding + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw UsageError(*a.embedding + ": " + e.what());
    }
    const int degree = cfg.effective_degree();
    const CurveFit fit = a.search ? fit_curve(emb, degree) : fit_curve(emb, degree, cfg.effective_window());
    const auto levels = uniform_levels(fit.curve, cfg.levels);
    doc["texture_type"] = to_string(cfg.texture_type);
    doc["window"] = fit.curve.window;
    doc["degree"] = fit.curve.degree;
    doc["sse"] = fit.sse;
    if (a.search) {
        json table = json::array();
        for (const auto& [w, s] : fit.sse_by_window) table.push_back({{"window", w}, {"sse", s}});
        doc["sse_by_window"] = table;
        doc["tied_windows"] = fit.tied_windows;
    }
    doc["levels"] = levels;
    doc["sigmoid"] = sigmoid_to_json(fit_sigmoid_to_curve(fit.curve));
    emit(a.out, doc);
    return 0;
}

// ---------------------------------------------------------------------------

struct ContinuousArgs {
    Common common;
    std::string field;
    std::string out = "continuous.png";
    std::string mapping = "sigmoid";
    std::optional<std::string> levels_file;
    bool invert = false;
    bool report = false;
};

int cmd_continuous(const ContinuousArgs& a) {
    PipelineConfig cfg = a.common.load();
    const Raster img = read_image(a.field);
    // Images store coverage; the field is the gray value (white = 1) unless inverted.
    Raster field(img.width(), img.height());
    for (std::size_t i = 0; i < field.size(); ++i)
        field.values()[i] = a.invert ? img.values()[i] : 1.0 - img.values()[i];

    PerceptualMapping mapping;
    if (a.levels_file) {
        const json lv = read_json_file(*a.levels_file);
        if (a.mapping == "levels")
            mapping = PerceptualMapping::from_levels(lv.at("levels").get<std::vector<double>>());
        else
            mapping = PerceptualMapping::sigmoid({lv.at("sigmoid").at("a").get<double>(),
                                                  lv.at("sigmoid").at("b").get<double>(), 0.0});
    } else if (a.mapping == "identity") {
        mapping = PerceptualMapping::identity();
    } else if (a.mapping == "sigmoid") {
        mapping = PerceptualMapping::sigmoid(reference_sigmoid(cfg.texture_type));
    } else if (a.mapping == "levels") {
        const auto l = reference_levels(cfg.texture_type);
        mapping = PerceptualMapping::from_levels({l.begin(), l.end()});
    } else {
        throw UsageError("--mapping must be identity, sigmoid or levels");
    }

    const ContinuousResult r = continuous_map(field, mapping, cfg.texture_type, cfg.texture);
    write_image(a.out, r.texture.raster);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    json doc{{"output", a.out},
             {"texture_type", to_string(cfg.texture_type)},
             {"target_density", measure_density(r.target)},
             {"measured_density", r.texture.measured_density},
             {"block_mae", r.block_mae},
             {"primitive_count", r.texture.primitives.size()}};
    if (a.report)
        doc["blocks"] = {{"size", r.target_blocks.block},
                         {"nx", r.target_blocks.nx},
                         {"ny", r.target_blocks.ny},
                         {"target", r.target_blocks.values},
                         {"measured", r.measured_blocks.values}};
    if (!r.warnings.empty()) doc["warnings"] = r.warnings;
    std::cout << dump(doc);
    return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
    Common common;
    std::string stimuli;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::string> journal;
};

httplib::Server* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
    PipelineConfig cfg = a.common.load();
    auto stimuli = discover_stimuli(a.stimuli);
    if (stimuli.empty()) throw UsageError(a.stimuli + ": no stimulus images found");
    std::optional<fs::path> journal;
    if (a.journal) journal = *a.journal;
    StudyRegistry registry(std::move(stimuli), cfg.seed, journal);
    httplib::Server server;
    register_study_routes(server, registry, fs::path(a.stimuli));
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    int port = a.port;
    if (port == 0) {
        port = server.bind_to_any_port(a.host);
    } else if (!server.bind_to_port(a.host, port)) {
        throw std::runtime_error("cannot bind " + a.host + ":" + std::to_string(port));
    }
    std::cout << "listening on " << a.host << ":" << port << " with " << registry.stimuli().size()
              << " stimuli, " << registry.pairs_per_session() << " pairs per session" << std::endl;
    server.listen_after_bind();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Density-targeted textures and perceptual reparameterization"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "synthesize textures at target densities");
    add_common(g, gen.common);
    g->add_option("--density", gen.density, "single target density")->check(CLI::Range(0.0, 1.0));
    g->add_option("--series", gen.series, "every multiple of STEP plus 1")->check(CLI::Range(0.0, 1.0));
    g->add_option("--grid", gen.grid, "crosshatch grid with spacing STEP")->check(CLI::Range(0.0, 1.0));
    g->add_option("--dh", gen.dh, "horizontal layer density")->check(CLI::Range(0.0, 1.0));
    g->add_option("--dv", gen.dv, "vertical layer density")->check(CLI::Range(0.0, 1.0));
    g->add_option("--out", gen.out, "output directory");
    g->add_option("--size", gen.size, "image width and height in pixels");
    g->add_option("--format", gen.format, "png or pgm");

    MeasureArgs meas;
    auto* m = app.add_subcommand("measure", "report the coverage density of images");
    m->add_option("files", meas.files, "images")->required();
    m->add_option("--block", meas.block, "also report block means of this size");

    AnalyzeArgs an;
    auto* z = app.add_subcommand("analyze", "ratings CSV to screening report, INDSCAL embedding and scree");
    add_common(z, an.common, false);
    z->add_option("ratings", an.csv, "ratings CSV")->required();
    z->add_option("--dim", an.dim, "embedding dimension");
    z->add_option("--scree-max", an.scree_max, "largest dimension of the scree curve");
    z->add_flag("--exclude-flagged", an.exclude_flagged, "drop participants flagged by screening");
    z->add_option("--out", an.out, "write JSON here instead of stdout");

    LevelsArgs lv;
    auto* l = app.add_subcommand("levels", "perceptually uniform density levels");
    add_common(l, lv.common);
    l->add_option("embedding", lv.embedding, "analysis or embedding JSON with density labels");
    l->add_option("--paper,--reference", lv.reference, "use the published constants for this texture type");
    l->add_flag("--via-sigmoid", lv.via_sigmoid, "evaluate the stored sigmoid at k/(n+1)");
    l->add_option("--n", lv.n, "number of interior levels");
    l->add_option("--degree", lv.degree, "smoothing polynomial degree");
    l->add_option("--window", lv.window, "smoothing window (odd)");
    l->add_flag("--search", lv.search, "pick the window with the smallest projection error");
    l->add_option("--out", lv.out, "write JSON here instead of stdout");

    ContinuousArgs ct;
    auto* c = app.add_subcommand("continuous", "texture map following a scalar field image");
    add_common(c, ct.common);
    c->add_option("field", ct.field, "grayscale field image, white = 1")->required();
    c->add_option("--out", ct.out, "output image");
    c->add_option("--mapping", ct.mapping, "identity, sigmoid or levels");
    c->add_option("--levels-file", ct.levels_file, "levels JSON providing the sigmoid or level table");
    c->add_flag("--invert", ct.invert, "black = 1 instead of white = 1");
    c->add_flag("--report", ct.report, "include per-block target and measured densities");

    ServeArgs sv;
    auto* s = app.add_subcommand("study-serve", "HTTP backend for rating sessions");
    add_common(s, sv.common, false);
    s->add_option("--stimuli", sv.stimuli, "directory of generated stimuli")->required();
    s->add_option("--host", sv.host, "bind address");
    s->add_option("--port", sv.port, "port, 0 picks a free one");
    s->add_option("--journal", sv.journal, "directory for per-session journals");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*m) return cmd_measure(meas);
        if (*z) return cmd_analyze(an);
        if (*l) return cmd_levels(lv);
        if (*c) return cmd_continuous(ct);
        if (*s) return cmd_serve(sv);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ValidationError& e) {
        std::cerr << "validation failed:\n";
        for (const auto& i : e.issues()) std::cerr << "  " << i << "\n";
        return kUsageError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kUsageError;
}
