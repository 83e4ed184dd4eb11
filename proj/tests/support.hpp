#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "onestory/onestory.hpp"
#include "oracles.hpp"

namespace support {

/// Layout with SOT, an identity span and the given frame spans, padded with EOT up to `m`.
inline onestory::PromptLayout make_layout(std::size_t identity, const std::vector<std::size_t>& frames, std::size_t m) {
    std::vector<std::size_t> counts{identity};
    counts.insert(counts.end(), frames.begin(), frames.end());
    return onestory::layout_from_counts(counts, m);
}

inline onestory::EmbeddingMatrix random_embedding(std::uint64_t seed, std::size_t identity,
                                                  const std::vector<std::size_t>& frames, std::size_t m,
                                                  std::size_t d) {
    return {oracle::random_matrix(seed, Eigen::Index(m), Eigen::Index(d)), make_layout(identity, frames, m), "test"};
}

inline onestory::Matrix to_row_major(const oracle::Dense& d) { return d; }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / ("onestory-test-" + name + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

private:
    std::filesystem::path path_;
};

inline std::string corpus_path() { return std::string(ONESTORY_DATA_DIR) + "/toy20.jsonl"; }

inline onestory::PromptSet kitten() {
    return {"kitten",
            "animals",
            "A watercolor of a cute kitten",
            {"in a garden", "dressed in a superhero cape", "wearing a collar with a bell", "sitting in a basket",
             "dressed in a cute sweater"}};
}

}  // namespace support
