#pragma once

// Text encoders seen by the story runner and the analysis code. The toy
// encoder computes embeddings; the interchange encoder looks up embeddings
// that an external extractor wrote to disk.

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "onestory/consolidation.hpp"
#include "onestory/core.hpp"
#include "onestory/interchange.hpp"

namespace onestory {

class TextEncoder {
public:
    virtual ~TextEncoder() = default;

    /// Embedding of the consolidated prompt of `set`; frame spans follow the set's frames.
    virtual EmbeddingMatrix encode(const PromptSet& set) const = 0;

    /// Short identifier recorded in run manifests.
    virtual std::string describe() const = 0;
};

/// Serves embeddings from a tree of interchange directories. Each manifest
/// must carry the "text" it was encoded from; lookups go by consolidated text.
class InterchangeEncoder : public TextEncoder {
public:
    explicit InterchangeEncoder(std::filesystem::path root, std::optional<std::string> encoder_tag = std::nullopt)
        : root_(std::move(root)), tag_(std::move(encoder_tag)) {
        if (!std::filesystem::is_directory(root_)) {
            throw Error(ErrorKind::IoError, root_.string() + " is not a directory");
        }
        std::vector<std::filesystem::path> dirs;
        for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
            if (entry.is_regular_file() && entry.path().filename() == kManifestName) {
                dirs.push_back(entry.path().parent_path());
            }
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
            auto record = read_record(dir);
            if (!record.layout || record.text.empty()) {
                continue;
            }
            if (tag_ && record.encoder_tag != *tag_) {
                continue;
            }
            auto [it, inserted] = index_.emplace(record.text, dir);
            if (!inserted) {
                throw Error(ErrorKind::FormatError, "prompt '" + record.text + "' stored twice: " +
                                                        it->second.string() + " and " + dir.string());
            }
        }
    }

    EmbeddingMatrix encode(const PromptSet& set) const override {
        const auto cp = consolidate(set);
        const auto it = index_.find(cp.text);
        if (it == index_.end()) {
            throw Error(ErrorKind::IoError, "no interchange embedding for prompt '" + cp.text + "' under " +
                                                root_.string());
        }
        auto embedding = read_interchange(it->second);
        if (embedding.layout.frame_count() != set.frame_count()) {
            throw Error(ErrorKind::SpanError, it->second.string() + " has " +
                                                  std::to_string(embedding.layout.frame_count()) +
                                                  " frame spans, prompt has " + std::to_string(set.frame_count()));
        }
        return embedding;
    }

    std::string describe() const override {
        return "interchange:" + root_.string() + (tag_ ? "#" + *tag_ : std::string());
    }

    std::size_t size() const noexcept { return index_.size(); }

private:
    std::filesystem::path root_;
    std::optional<std::string> tag_;
    std::map<std::string, std::filesystem::path> index_;
};

}  // namespace onestory
