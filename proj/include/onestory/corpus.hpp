#pragma once

// Prompt-set corpus files: one JSON document per line with fields
// id, superclass, identity_prompt, frame_prompts.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "onestory/core.hpp"

namespace onestory {

inline constexpr std::array<std::string_view, 8> kSuperclasses = {
    "humans", "animals", "fantasy", "inanimate", "fairy tales", "nature", "technology", "foods",
};

inline constexpr std::size_t kMinBenchmarkFrames = 5;
inline constexpr std::size_t kMaxBenchmarkFrames = 10;

inline PromptSet prompt_set_from_json(const nlohmann::json& doc) {
    auto require_string = [&](const char* key) {
        if (!doc.contains(key) || !doc[key].is_string()) {
            throw Error(ErrorKind::FormatError, std::string("prompt set field '") + key + "' must be a string");
        }
        return doc[key].get<std::string>();
    };
    if (!doc.is_object()) {
        throw Error(ErrorKind::FormatError, "prompt set must be a JSON object");
    }
    PromptSet set;
    set.id = require_string("id");
    set.superclass = require_string("superclass");
    set.identity_prompt = require_string("identity_prompt");
    if (!doc.contains("frame_prompts") || !doc["frame_prompts"].is_array()) {
        throw Error(ErrorKind::FormatError, "prompt set field 'frame_prompts' must be an array");
    }
    for (const auto& frame : doc["frame_prompts"]) {
        if (!frame.is_string()) {
            throw Error(ErrorKind::FormatError, "frame prompts must be strings");
        }
        set.frame_prompts.push_back(frame.get<std::string>());
    }
    set.validate();
    return set;
}

inline nlohmann::json prompt_set_to_json(const PromptSet& set) {
    return {{"id", set.id},
            {"superclass", set.superclass},
            {"identity_prompt", set.identity_prompt},
            {"frame_prompts", set.frame_prompts}};
}

/// Returns a description of how `set` departs from the benchmark shape
/// (known superclass, 5 to 10 frames), or nothing when it conforms.
inline std::optional<std::string> benchmark_shape_issue(const PromptSet& set) {
    if (std::find(kSuperclasses.begin(), kSuperclasses.end(), set.superclass) == kSuperclasses.end()) {
        return "unknown superclass '" + set.superclass + "'";
    }
    if (set.frame_count() < kMinBenchmarkFrames || set.frame_count() > kMaxBenchmarkFrames) {
        return std::to_string(set.frame_count()) + " frames, expected 5 to 10";
    }
    return std::nullopt;
}

inline std::vector<PromptSet> parse_corpus(std::istream& in) {
    std::vector<PromptSet> sets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        try {
            sets.push_back(prompt_set_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::FormatError, "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t k = i + 1; k < sets.size(); ++k) {
            if (sets[i].id == sets[k].id) {
                throw Error(ErrorKind::FormatError, "duplicate prompt set id '" + sets[i].id + "'");
            }
        }
    }
    return sets;
}

inline std::vector<PromptSet> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open corpus " + path.string());
    }
    return parse_corpus(in);
}

}  // namespace onestory
