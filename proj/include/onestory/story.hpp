#pragma once

// Runs a whole story: for each frame, build the (windowed) consolidated
// embedding, reweight it for that frame, and generate frame features from a
// shared initial latent.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "onestory/consolidation.hpp"
#include "onestory/core.hpp"
#include "onestory/encoder.hpp"
#include "onestory/ipca.hpp"
#include "onestory/reweighting.hpp"
#include "onestory/rng.hpp"
#include "onestory/toy_denoiser.hpp"

namespace onestory {

enum class RunMode {
    Consolidated,         // prompt consolidation only
    Npr,                  // naive prompt reweighting
    Svr,                  // singular-value reweighting
    SvrIpca,              // singular-value reweighting + identity-preserving cross-attention
    MultiPromptBaseline,  // [P0; Pi] encoded separately per frame
};

inline std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Consolidated: return "consolidated";
        case RunMode::Npr: return "npr";
        case RunMode::Svr: return "svr";
        case RunMode::SvrIpca: return "svr+ipca";
        case RunMode::MultiPromptBaseline: return "multi-prompt-baseline";
    }
    return "unknown";
}

inline RunMode parse_run_mode(std::string_view text) {
    for (auto mode : {RunMode::Consolidated, RunMode::Npr, RunMode::Svr, RunMode::SvrIpca,
                      RunMode::MultiPromptBaseline}) {
        if (to_string(mode) == text) {
            return mode;
        }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown mode '" + std::string(text) + "'");
}

inline std::string_view to_string(SuppressMode mode) {
    return mode == SuppressMode::Iterative ? "iterative" : "joint";
}

inline SuppressMode parse_suppress_mode(std::string_view text) {
    if (text == "iterative") {
        return SuppressMode::Iterative;
    }
    if (text == "joint") {
        return SuppressMode::Joint;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown suppress mode '" + std::string(text) + "'");
}

struct StoryConfig {
    RunMode mode = RunMode::SvrIpca;
    SvrParams params;
    SuppressMode suppress = SuppressMode::Iterative;
    std::optional<std::size_t> window;
    ToyDenoiserConfig denoiser;
    IpcaConfig ipca;
};

struct FrameResult {
    std::size_t frame = 0;
    WindowView window;
    Matrix features;  // latent positions x channels
    std::string digest;
};

struct StoryResult {
    std::vector<FrameResult> frames;
    nlohmann::json manifest;
};

/// FNV-1a over the f32le bytes the features are stored as, as 16 hex digits.
inline std::string feature_digest(const Matrix& features) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        for (Eigen::Index c = 0; c < features.cols(); ++c) {
            auto word = std::bit_cast<std::uint32_t>(static_cast<float>(features(r, c)));
            for (int b = 0; b < 4; ++b) {
                hash ^= (word >> (8 * b)) & 0xffu;
                hash *= 0x100000001b3ULL;
            }
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

inline nlohmann::json to_json(const SvrParams& p) {
    return {{"alpha", p.alpha},          {"beta", p.beta},     {"alpha_prime", p.alpha_prime},
            {"beta_prime", p.beta_prime}, {"npr_up", p.npr_up}, {"npr_down", p.npr_down}};
}

inline nlohmann::json to_json(const ToyDenoiserConfig& d) {
    return {{"grid_height", d.grid_height}, {"grid_width", d.grid_width}, {"channels", d.channels},
            {"steps", d.steps},             {"step_size", d.step_size},   {"weight_seed", d.weight_seed},
            {"noise_seed", d.noise_seed}};
}

inline nlohmann::json to_json(const IpcaConfig& c) {
    return {{"dropout_rate", c.dropout_rate},
            {"neg_inf_substitute", c.neg_inf_substitute},
            {"rng_seed", c.rng_seed},
            {"stream_label", std::string(kDropoutStreamPrefix) + "<step>"}};
}

inline StoryResult run_story(const PromptSet& set, const TextEncoder& encoder, const StoryConfig& cfg) {
    set.validate();
    if (cfg.window && *cfg.window < 1) {
        throw Error(ErrorKind::InvalidArgument, "window size must be at least 1");
    }
    const std::size_t n = set.frame_count();

    StoryResult result;
    std::optional<ToyDenoiser> denoiser;
    auto denoiser_for = [&](const EmbeddingMatrix& e) -> const ToyDenoiser& {
        if (!denoiser) {
            denoiser.emplace(cfg.denoiser, e.dim());
        }
        return *denoiser;
    };

    std::map<std::pair<std::size_t, std::size_t>, EmbeddingMatrix> window_cache;
    nlohmann::json frames = nlohmann::json::array();

    for (std::size_t i = 1; i <= n; ++i) {
        FrameResult frame;
        frame.frame = i;
        if (cfg.mode == RunMode::MultiPromptBaseline) {
            frame.window = WindowView{1, i, i, i, 1};
            const auto embedding = encoder.encode(pair_prompt(set, i));
            frame.features = denoiser_for(embedding).generate(embedding, nullptr, cfg.ipca);
        } else {
            frame.window = cfg.window ? sliding_window_view(n, *cfg.window, i) : WindowView{n, i, 1, n, i};
            const auto key = std::make_pair(frame.window.first, frame.window.last);
            auto it = window_cache.find(key);
            if (it == window_cache.end()) {
                it = window_cache.emplace(key, encoder.encode(apply_window(set, frame.window))).first;
            }
            const EmbeddingMatrix& embedding = it->second;
            const std::size_t express = frame.window.express_index;
            const auto& model = denoiser_for(embedding);
            switch (cfg.mode) {
                case RunMode::Consolidated:
                    frame.features = model.generate(embedding, nullptr, cfg.ipca);
                    break;
                case RunMode::Npr:
                    frame.features = model.generate(npr_reweight(embedding, express, cfg.params), nullptr, cfg.ipca);
                    break;
                case RunMode::Svr:
                    frame.features = model.generate(svr_pipeline(embedding, express, cfg.params, cfg.suppress),
                                                    nullptr, cfg.ipca);
                    break;
                case RunMode::SvrIpca:
                    frame.features = model.generate(svr_pipeline(embedding, express, cfg.params, cfg.suppress),
                                                    &embedding, cfg.ipca);
                    break;
                case RunMode::MultiPromptBaseline:
                    break;
            }
        }
        frame.digest = feature_digest(frame.features);
        frames.push_back({{"frame", i},
                          {"window", {frame.window.first, frame.window.last}},
                          {"express_index", frame.window.express_index},
                          {"digest", frame.digest}});
        result.frames.push_back(std::move(frame));
    }

    result.manifest = {
        {"set_id", set.id},
        {"superclass", set.superclass},
        {"prompt_set", {{"identity_prompt", set.identity_prompt}, {"frame_prompts", set.frame_prompts}}},
        {"mode", to_string(cfg.mode)},
        {"suppress", to_string(cfg.suppress)},
        {"params", to_json(cfg.params)},
        {"window", cfg.window ? nlohmann::json(*cfg.window) : nlohmann::json(nullptr)},
        {"encoder", encoder.describe()},
        {"denoiser", to_json(cfg.denoiser)},
        {"ipca", to_json(cfg.ipca)},
        {"frames", frames},
    };
    return result;
}

}  // namespace onestory
