#pragma once

// Directory interchange format: manifest.json + data.bin (row-major f32le).
// The byte-level schema is documented in docs/interchange.md.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "onestory/core.hpp"

namespace onestory {

inline constexpr const char* kInterchangeFormat = "onestory-interchange";
inline constexpr int kInterchangeVersion = 1;
inline constexpr const char* kInterchangeDtype = "f32le";
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kBlobName = "data.bin";

/// Rows of per-image or per-frame feature vectors; no token layout.
struct FeatureMatrix {
    Matrix data;
    std::string encoder_tag;
};

/// Everything a manifest can carry. `layout` is absent for feature files.
struct InterchangeRecord {
    Matrix data;
    std::string encoder_tag;
    std::optional<PromptLayout> layout;
    std::string text;
    nlohmann::json extraction;  // free-form recipe written by external extractors
};

namespace detail {

inline nlohmann::json span_to_json(const TokenSpan& s) { return nlohmann::json::array({s.start, s.end}); }

inline TokenSpan span_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
        throw Error(ErrorKind::FormatError, "span must be a [start, end] pair of non-negative integers");
    }
    return TokenSpan{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

inline nlohmann::json layout_to_json(const PromptLayout& layout) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : layout.frames) {
        frames.push_back(span_to_json(f));
    }
    return {{"sot", span_to_json(layout.sot)},
            {"identity", span_to_json(layout.identity)},
            {"frames", frames},
            {"eot", span_to_json(layout.eot)}};
}

inline PromptLayout layout_from_json(const nlohmann::json& j, std::size_t total_tokens) {
    if (!j.is_object()) {
        throw Error(ErrorKind::FormatError, "spans must be an object");
    }
    for (const char* key : {"sot", "identity", "frames", "eot"}) {
        if (!j.contains(key)) {
            throw Error(ErrorKind::FormatError, std::string("spans missing '") + key + "'");
        }
    }
    PromptLayout layout;
    layout.total_tokens = total_tokens;
    layout.sot = span_from_json(j["sot"]);
    layout.identity = span_from_json(j["identity"]);
    if (!j["frames"].is_array()) {
        throw Error(ErrorKind::FormatError, "spans.frames must be an array");
    }
    for (const auto& f : j["frames"]) {
        layout.frames.push_back(span_from_json(f));
    }
    layout.eot = span_from_json(j["eot"]);
    return layout;
}

inline std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

inline void write_blob(const Matrix& data, const std::filesystem::path& path) {
    std::vector<char> bytes(std::size_t(data.size()) * 4);
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            const double value = data(r, c);
            const auto f = static_cast<float>(value);
            if (!std::isfinite(f)) {
                throw Error(ErrorKind::NonFinite, "entry (" + std::to_string(r) + ", " + std::to_string(c) +
                                                      ") is not representable as a finite f32");
            }
            const auto word = to_little_endian(std::bit_cast<std::uint32_t>(f));
            std::memcpy(bytes.data() + offset, &word, 4);
            offset += 4;
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::IoError, "short write to " + path.string());
    }
}

inline Matrix read_blob(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t expected = rows * cols * 4;
    if (bytes.size() != expected) {
        throw Error(ErrorKind::ShapeMismatch, "data.bin holds " + std::to_string(bytes.size()) +
                                                  " bytes, manifest implies " + std::to_string(expected));
    }
    Matrix data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::size_t offset = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            std::uint32_t word = 0;
            std::memcpy(&word, bytes.data() + offset, 4);
            offset += 4;
            data(Eigen::Index(r), Eigen::Index(c)) = std::bit_cast<float>(to_little_endian(word));
        }
    }
    return data;
}

inline void write_manifest(const nlohmann::json& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    out << manifest.dump(2) << '\n';
}

}  // namespace detail

inline void write_record(const InterchangeRecord& record, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = {
        {"format", kInterchangeFormat},
        {"version", kInterchangeVersion},
        {"dtype", kInterchangeDtype},
        {"M", record.data.rows()},
        {"D", record.data.cols()},
        {"encoder_tag", record.encoder_tag},
    };
    if (record.layout) {
        manifest["spans"] = detail::layout_to_json(*record.layout);
    }
    if (!record.text.empty()) {
        manifest["text"] = record.text;
    }
    if (!record.extraction.is_null()) {
        manifest["extraction"] = record.extraction;
    }
    detail::write_blob(record.data, dir / kBlobName);
    detail::write_manifest(manifest, dir / kManifestName);
}

inline InterchangeRecord read_record(const std::filesystem::path& dir) {
    std::ifstream in(dir / kManifestName);
    if (!in) {
        throw Error(ErrorKind::IoError, "no manifest.json in " + dir.string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::FormatError, std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.is_object() || manifest.value("format", std::string()) != kInterchangeFormat) {
        throw Error(ErrorKind::FormatError, "manifest format tag is not '" + std::string(kInterchangeFormat) + "'");
    }
    if (!manifest.contains("version") || !manifest["version"].is_number_integer() ||
        manifest["version"].get<int>() != kInterchangeVersion) {
        throw Error(ErrorKind::FormatError, "unsupported manifest version " +
                                                (manifest.contains("version") ? manifest["version"].dump() : "<none>"));
    }
    if (manifest.value("dtype", std::string()) != kInterchangeDtype) {
        throw Error(ErrorKind::FormatError, "dtype must be 'f32le'");
    }
    for (const char* key : {"M", "D"}) {
        if (!manifest.contains(key) || !manifest[key].is_number_unsigned()) {
            throw Error(ErrorKind::FormatError, std::string("manifest field '") + key + "' missing or negative");
        }
    }
    InterchangeRecord record;
    const auto rows = manifest["M"].get<std::size_t>();
    const auto cols = manifest["D"].get<std::size_t>();
    record.encoder_tag = manifest.value("encoder_tag", std::string());
    record.text = manifest.value("text", std::string());
    if (manifest.contains("extraction")) {
        record.extraction = manifest["extraction"];
    }
    if (manifest.contains("spans")) {
        record.layout = detail::layout_from_json(manifest["spans"], rows);
    }
    record.data = detail::read_blob(dir / kBlobName, rows, cols);
    return record;
}

/// Writes `embedding` to `dir`. `text` optionally records the prompt it was encoded from.
inline void write_interchange(const EmbeddingMatrix& embedding, const std::filesystem::path& dir,
                              const std::string& text = {}) {
    validate(embedding);
    write_record(InterchangeRecord{embedding.data, embedding.encoder_tag, embedding.layout, text, {}}, dir);
}

inline EmbeddingMatrix read_interchange(const std::filesystem::path& dir) {
    auto record = read_record(dir);
    if (!record.layout) {
        throw Error(ErrorKind::FormatError, dir.string() + " is a feature file, not a token embedding");
    }
    EmbeddingMatrix embedding{std::move(record.data), std::move(*record.layout), std::move(record.encoder_tag)};
    validate(embedding);
    return embedding;
}

inline void write_features(const FeatureMatrix& features, const std::filesystem::path& dir) {
    write_record(InterchangeRecord{features.data, features.encoder_tag, std::nullopt, {}, {}}, dir);
}

inline FeatureMatrix read_features(const std::filesystem::path& dir) {
    auto record = read_record(dir);
    if (!record.data.allFinite()) {
        throw Error(ErrorKind::NonFinite, dir.string() + " contains non-finite features");
    }
    return FeatureMatrix{std::move(record.data), std::move(record.encoder_tag)};
}

}  // namespace onestory
