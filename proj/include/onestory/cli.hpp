#pragma once

// The `onestory` command line: `run` generates stories over a corpus,
// `analyze` turns run directories or feature files into distance reports.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "onestory/analysis.hpp"
#include "onestory/corpus.hpp"
#include "onestory/encoder.hpp"
#include "onestory/interchange.hpp"
#include "onestory/story.hpp"
#include "onestory/toy_encoder.hpp"

namespace onestory::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr const char* kRunManifest = "run.json";
inline constexpr const char* kRunConfigFile = "config.toml";
inline constexpr const char* kSummaryFile = "summary.csv";

/// Bad flags, missing paths, unusable corpus: exit 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string corpus;
    std::string mode = "svr+ipca";
    SvrParams params;
    std::string suppress = "iterative";
    std::optional<std::size_t> window;
    std::uint64_t seed = 0;
    double dropout = 0.5;
    std::string encoder = "toy";  // "toy" or an interchange directory
    std::string encoder_tag;      // optional stream filter for interchange encoders
    std::string out;
};

struct AnalyzeConfig {
    std::vector<std::string> inputs;
    std::string report;
    std::string compare;  // empty, or "single-multi"
    std::string corpus;
    std::string encoder = "toy";
    std::string encoder_tag;
    std::string pooling = "mean";
    std::uint64_t seed = 0;
};

/// Seeds derived from the root seed; labels are recorded in every manifest.
struct SeedPlan {
    std::uint64_t root = 0;

    std::uint64_t encoder_weights() const { return derive_seed(root, "toy-encoder"); }
    std::uint64_t denoiser_weights() const { return derive_seed(root, "toy-denoiser"); }
    std::uint64_t noise(const std::string& set_id) const { return derive_seed(root, "noise/" + set_id); }
    std::uint64_t ipca(const std::string& set_id) const { return derive_seed(root, "ipca/" + set_id); }

    nlohmann::json describe(const std::string& set_id) const {
        return {{"root", root},
                {"toy-encoder", encoder_weights()},
                {"toy-denoiser", denoiser_weights()},
                {"noise/" + set_id, noise(set_id)},
                {"ipca/" + set_id, ipca(set_id)}};
    }
};

namespace detail {

inline bool is_safe_id(const std::string& id) {
    if (id.empty() || id == "." || id == "..") {
        return false;
    }
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
    });
}

inline std::vector<PromptSet> load_corpus_checked(const std::string& path) {
    if (path.empty()) {
        throw ConfigError("--corpus is required");
    }
    if (!std::filesystem::is_regular_file(path)) {
        throw ConfigError("corpus file '" + path + "' does not exist");
    }
    std::vector<PromptSet> corpus;
    try {
        corpus = load_corpus(path);
    } catch (const Error& e) {
        throw ConfigError("corpus '" + path + "': " + e.what());
    }
    if (corpus.empty()) {
        throw ConfigError("corpus '" + path + "' holds no prompt sets");
    }
    for (const auto& set : corpus) {
        if (!is_safe_id(set.id)) {
            throw ConfigError("prompt set id '" + set.id + "' is not usable as a directory name");
        }
    }
    return corpus;
}

inline std::unique_ptr<TextEncoder> make_encoder(const std::string& choice, const std::string& tag,
                                                 std::uint64_t root_seed) {
    if (choice == "toy") {
        ToyEncoderConfig cfg;
        cfg.weight_seed = SeedPlan{root_seed}.encoder_weights();
        return std::make_unique<ToyEncoder>(cfg);
    }
    if (!std::filesystem::is_directory(choice)) {
        throw ConfigError("--encoder must be 'toy' or an interchange directory, got '" + choice + "'");
    }
    return std::make_unique<InterchangeEncoder>(choice, tag.empty() ? std::nullopt : std::optional(tag));
}

inline std::string frame_dir_name(std::size_t frame) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame-%02zu", frame);
    return buf;
}

inline Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
    out << text;
}

inline std::string toml_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out + "\"";
}

/// Shortest text that reads back to the same double.
inline std::string toml_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string out(buf, res.ptr);
    if (out.find_first_of(".en") == std::string::npos) {
        out += ".0";
    }
    return out;
}

/// A `[run]` section accepted back by `onestory --config <file> run --out <dir>`.
inline std::string run_config_toml(const RunConfig& cfg) {
    std::string out = "[run]\n";
    out += "corpus = " + toml_string(cfg.corpus) + "\n";
    out += "mode = " + toml_string(cfg.mode) + "\n";
    out += "suppress = " + toml_string(cfg.suppress) + "\n";
    out += "seed = " + std::to_string(cfg.seed) + "\n";
    out += "alpha = " + toml_double(cfg.params.alpha) + "\n";
    out += "beta = " + toml_double(cfg.params.beta) + "\n";
    out += "alpha-prime = " + toml_double(cfg.params.alpha_prime) + "\n";
    out += "beta-prime = " + toml_double(cfg.params.beta_prime) + "\n";
    out += "npr-up = " + toml_double(cfg.params.npr_up) + "\n";
    out += "npr-down = " + toml_double(cfg.params.npr_down) + "\n";
    out += "dropout = " + toml_double(cfg.dropout) + "\n";
    out += "encoder = " + toml_string(cfg.encoder) + "\n";
    if (!cfg.encoder_tag.empty()) {
        out += "encoder-tag = " + toml_string(cfg.encoder_tag) + "\n";
    }
    if (cfg.window) {
        out += "window = " + std::to_string(*cfg.window) + "\n";
    }
    return out;
}

inline void write_report(const DistanceReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_text(std::filesystem::path(dir) / "report.csv", report_to_csv(report));
    write_text(std::filesystem::path(dir) / "report.json", report_to_json(report).dump(2) + "\n");
}

}  // namespace detail

struct RunSummary {
    std::size_t sets = 0;
    std::size_t frames = 0;
};

inline RunSummary cmd_run(const RunConfig& cfg, std::ostream& log) {
    RunMode mode;
    SuppressMode suppress;
    try {
        mode = parse_run_mode(cfg.mode);
        suppress = parse_suppress_mode(cfg.suppress);
        cfg.params.validate();
        IpcaConfig{cfg.dropout, -1e9, 0}.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (cfg.window && *cfg.window < 1) {
        throw ConfigError("--window must be at least 1");
    }
    if (cfg.out.empty()) {
        throw ConfigError("--out is required");
    }
    const auto corpus = detail::load_corpus_checked(cfg.corpus);
    const auto encoder = detail::make_encoder(cfg.encoder, cfg.encoder_tag, cfg.seed);
    const SeedPlan seeds{cfg.seed};

    const std::filesystem::path out_dir(cfg.out);
    std::filesystem::create_directories(out_dir);

    RunSummary summary;
    std::string csv = "set_id,method,mean_pairwise_distance\n";
    nlohmann::json set_ids = nlohmann::json::array();
    for (const auto& set : corpus) {
        if (auto issue = benchmark_shape_issue(set)) {
            log << "warning: set '" << set.id << "': " << *issue << "\n";
        }
        StoryConfig story;
        story.mode = mode;
        story.params = cfg.params;
        story.suppress = suppress;
        story.window = cfg.window;
        story.denoiser.weight_seed = seeds.denoiser_weights();
        story.denoiser.noise_seed = seeds.noise(set.id);
        story.ipca = IpcaConfig{cfg.dropout, -1e9, seeds.ipca(set.id)};

        auto result = run_story(set, *encoder, story);
        const auto set_dir = out_dir / set.id;
        std::vector<Vector> flat;
        for (std::size_t i = 0; i < result.frames.size(); ++i) {
            const auto& frame = result.frames[i];
            write_features(FeatureMatrix{frame.features, "toy-denoiser"}, set_dir / detail::frame_dir_name(frame.frame));
            result.manifest["frames"][i]["path"] = detail::frame_dir_name(frame.frame);
            flat.push_back(detail::flatten(frame.features));
        }
        result.manifest["seeds"] = seeds.describe(set.id);
        detail::write_text(set_dir / kManifestName, result.manifest.dump(2) + "\n");
        if (flat.size() >= 2) {
            csv += set.id + "," + cfg.mode + "," + format_distance(pairwise_mean_distance(flat)) + "\n";
        }
        set_ids.push_back(set.id);
        ++summary.sets;
        summary.frames += result.frames.size();
    }

    nlohmann::json run_manifest = {
        {"tool", "onestory run"},
        {"corpus", cfg.corpus},
        {"mode", cfg.mode},
        {"suppress", cfg.suppress},
        {"params", to_json(cfg.params)},
        {"window", cfg.window ? nlohmann::json(*cfg.window) : nlohmann::json(nullptr)},
        {"seed", cfg.seed},
        {"dropout", cfg.dropout},
        {"encoder", encoder->describe()},
        {"sets", set_ids},
    };
    detail::write_text(out_dir / kRunManifest, run_manifest.dump(2) + "\n");
    detail::write_text(out_dir / kRunConfigFile, detail::run_config_toml(cfg));
    detail::write_text(out_dir / kSummaryFile, csv);
    return summary;
}

namespace detail {

/// Frame features of every story in a run directory or a feature root.
inline std::vector<MethodFeatures> load_method_features(const std::filesystem::path& input,
                                                        const std::string& label_suffix) {
    std::vector<MethodFeatures> out;
    const auto run_manifest_path = input / kRunManifest;
    if (std::filesystem::is_regular_file(run_manifest_path)) {
        std::ifstream in(run_manifest_path);
        const auto manifest = nlohmann::json::parse(in);
        const std::string method = manifest.at("mode").get<std::string>() + label_suffix;
        for (const auto& id : manifest.at("sets")) {
            const auto set_dir = input / id.get<std::string>();
            std::ifstream story_in(set_dir / kManifestName);
            if (!story_in) {
                throw Error(ErrorKind::IoError, "missing story manifest in " + set_dir.string());
            }
            const auto story = nlohmann::json::parse(story_in);
            MethodFeatures mf{method, id.get<std::string>(), {}};
            for (const auto& frame : story.at("frames")) {
                mf.frames.push_back(flatten(read_features(set_dir / frame.at("path").get<std::string>()).data));
            }
            out.push_back(std::move(mf));
        }
        return out;
    }
    // Feature root: one interchange feature file (rows = frames) per story subdirectory.
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(input)) {
        if (entry.is_directory() && std::filesystem::is_regular_file(entry.path() / kManifestName)) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) {
        throw Error(ErrorKind::IoError, input.string() + " is neither a run directory nor a feature root");
    }
    const std::string method = input.filename().string() + label_suffix;
    for (const auto& dir : dirs) {
        const auto features = read_features(dir);
        MethodFeatures mf{method, dir.filename().string(), {}};
        for (Eigen::Index r = 0; r < features.data.rows(); ++r) {
            mf.frames.push_back(features.data.row(r).transpose());
        }
        out.push_back(std::move(mf));
    }
    return out;
}

}  // namespace detail

inline DistanceReport cmd_analyze(const AnalyzeConfig& cfg, std::ostream& log) {
    if (cfg.report.empty()) {
        throw ConfigError("--report is required");
    }
    DistanceReport report;
    if (cfg.compare == "single-multi") {
        if (cfg.pooling != "mean" && cfg.pooling != "per-token") {
            throw ConfigError("--pooling must be 'mean' or 'per-token'");
        }
        const auto corpus = detail::load_corpus_checked(cfg.corpus);
        const auto encoder = detail::make_encoder(cfg.encoder, cfg.encoder_tag, cfg.seed);
        report = single_vs_multi_report(corpus, *encoder,
                                        cfg.pooling == "mean" ? FramePooling::Mean : FramePooling::PerToken);
    } else if (cfg.compare.empty() || cfg.compare == "methods") {
        if (cfg.inputs.empty()) {
            throw ConfigError("--inputs needs at least one run directory or feature root");
        }
        std::vector<std::string> seen_methods;
        std::vector<MethodFeatures> all;
        for (const auto& input : cfg.inputs) {
            if (!std::filesystem::is_directory(input)) {
                throw ConfigError("input '" + input + "' is not a directory");
            }
            auto features = detail::load_method_features(input, "");
            if (!features.empty() &&
                std::find(seen_methods.begin(), seen_methods.end(), features.front().method) != seen_methods.end()) {
                const auto suffix = "@" + std::filesystem::path(input).filename().string();
                for (auto& f : features) {
                    f.method += suffix;
                }
            }
            if (!features.empty()) {
                seen_methods.push_back(features.front().method);
            }
            all.insert(all.end(), features.begin(), features.end());
        }
        report = frame_feature_distance_report(all);
    } else {
        throw ConfigError("--compare must be 'single-multi' or 'methods'");
    }
    detail::write_report(report, cfg.report);
    for (auto m : report.ranking) {
        log << report.methods[m] << " mean_pairwise_distance=" << format_distance(report.method_means[m]) << "\n";
    }
    if (report.methods.size() >= 2) {
        log << "win_rate(" << report.methods[0] << " < " << report.methods[1] << ")=" << report.win_rate << "\n";
    }
    return report;
}

/// Parses argv and dispatches; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"onestory: prompt consolidation, singular-value reweighting and identity-preserving attention"};
    app.set_config("--config", "", "TOML file with [run] / [analyze] sections; flags override it");
    app.require_subcommand(1);

    RunConfig run_cfg;
    std::size_t window = 0;
    auto* run = app.add_subcommand("run", "generate frame features for every story in a corpus");
    run->add_option("--corpus", run_cfg.corpus, "prompt-set corpus (JSON lines)");
    run->add_option("--mode", run_cfg.mode, "npr | svr | svr+ipca | multi-prompt-baseline | consolidated");
    run->add_option("--alpha", run_cfg.params.alpha);
    run->add_option("--beta", run_cfg.params.beta);
    run->add_option("--alpha-prime", run_cfg.params.alpha_prime);
    run->add_option("--beta-prime", run_cfg.params.beta_prime);
    run->add_option("--npr-up", run_cfg.params.npr_up);
    run->add_option("--npr-down", run_cfg.params.npr_down);
    run->add_option("--window", window, "sliding window size (frames per consolidated prompt)");
    run->add_option("--seed", run_cfg.seed, "root seed");
    run->add_option("--dropout", run_cfg.dropout, "IPCA identity-token dropout rate");
    run->add_option("--encoder", run_cfg.encoder, "'toy' or an interchange directory");
    run->add_option("--encoder-tag", run_cfg.encoder_tag, "encoder stream to use from an interchange directory");
    run->add_option("--suppress", run_cfg.suppress, "iterative | joint");
    run->add_option("--out", run_cfg.out, "output directory");

    AnalyzeConfig an_cfg;
    auto* analyze = app.add_subcommand("analyze", "distance reports over runs, feature files or encoders");
    analyze->add_option("--inputs", an_cfg.inputs, "run directories or feature roots");
    analyze->add_option("--report", an_cfg.report, "output directory for report.csv / report.json");
    analyze->add_option("--compare", an_cfg.compare, "single-multi | methods");
    analyze->add_option("--corpus", an_cfg.corpus);
    analyze->add_option("--encoder", an_cfg.encoder, "'toy' or an interchange directory");
    analyze->add_option("--encoder-tag", an_cfg.encoder_tag);
    analyze->add_option("--pooling", an_cfg.pooling, "mean | per-token");
    analyze->add_option("--seed", an_cfg.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (run->parsed()) {
            if (run->count("--window") > 0) {
                run_cfg.window = window;
            }
            const auto summary = cmd_run(run_cfg, err);
            out << "wrote " << summary.sets << " stories (" << summary.frames << " frames) to " << run_cfg.out << "\n";
        } else {
            cmd_analyze(an_cfg, out);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace onestory::cli
