#pragma once

// Domain types shared by every part of the engine: prompt sets, token-span
// layouts, embedding matrices and the reweighting parameters.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace onestory {

/// Row-major so that token rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
    ShapeMismatch,
    NonFinite,
    SpanError,
    FormatError,
    EmptyPrompt,
    Overflow,
    IndexOutOfRange,
    NumericFailure,
    DimensionMismatch,
    TooFewVectors,
    InvalidArgument,
    IoError,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::SpanError: return "SpanError";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::EmptyPrompt: return "EmptyPrompt";
        case ErrorKind::Overflow: return "Overflow";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::NumericFailure: return "NumericFailure";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::TooFewVectors: return "TooFewVectors";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

namespace detail {

inline std::string trim(std::string_view s) {
    auto first = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
    auto last = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
    return first < last ? std::string(first, last) : std::string();
}

/// Numerically stable in-place softmax of every row.
inline void softmax_rows(Matrix& logits) {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        const double peak = row.maxCoeff();
        row = (row.array() - peak).exp().matrix();
        row /= row.sum();
    }
}

}  // namespace detail

/// An identity prompt followed by the ordered frame prompts of one story.
struct PromptSet {
    std::string id;
    std::string superclass;
    std::string identity_prompt;
    std::vector<std::string> frame_prompts;

    std::size_t frame_count() const noexcept { return frame_prompts.size(); }

    /// Throws EmptyPrompt when the identity or any frame prompt is blank, or when there are no frames.
    void validate() const {
        if (detail::trim(identity_prompt).empty()) {
            throw Error(ErrorKind::EmptyPrompt, "identity prompt of set '" + id + "' is empty");
        }
        if (frame_prompts.empty()) {
            throw Error(ErrorKind::EmptyPrompt, "set '" + id + "' has no frame prompts");
        }
        for (std::size_t i = 0; i < frame_prompts.size(); ++i) {
            if (detail::trim(frame_prompts[i]).empty()) {
                throw Error(ErrorKind::EmptyPrompt,
                            "frame prompt " + std::to_string(i + 1) + " of set '" + id + "' is empty");
            }
        }
    }

    friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

/// Half-open token range [start, end).
struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - start; }
    bool contains(std::size_t index) const noexcept { return index >= start && index < end; }

    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// Token-span map of a consolidated sequence: SOT, identity, frame 1..N, EOT padding.
struct PromptLayout {
    std::size_t total_tokens = 0;
    TokenSpan sot;
    TokenSpan identity;
    std::vector<TokenSpan> frames;
    TokenSpan eot;

    std::size_t frame_count() const noexcept { return frames.size(); }

    /// 1-based frame access.
    const TokenSpan& frame(std::size_t index) const {
        if (index < 1 || index > frames.size()) {
            throw Error(ErrorKind::IndexOutOfRange, "frame index " + std::to_string(index) + " outside [1, " +
                                                        std::to_string(frames.size()) + "]");
        }
        return frames[index - 1];
    }

    /// Spans in sequence order, used for the contiguity check.
    std::vector<TokenSpan> ordered_spans() const {
        std::vector<TokenSpan> spans;
        spans.reserve(frames.size() + 3);
        spans.push_back(sot);
        spans.push_back(identity);
        spans.insert(spans.end(), frames.begin(), frames.end());
        spans.push_back(eot);
        return spans;
    }

    /// Throws SpanError unless the spans tile [0, total_tokens) in order with |sot| = 1 and |eot| >= 1.
    void validate() const {
        if (sot.start != 0 || sot.size() != 1) {
            throw Error(ErrorKind::SpanError, "SOT span must be [0, 1)");
        }
        std::size_t cursor = 0;
        for (const auto& span : ordered_spans()) {
            if (span.start > span.end) {
                throw Error(ErrorKind::SpanError, "span [" + std::to_string(span.start) + ", " +
                                                      std::to_string(span.end) + ") is reversed");
            }
            if (span.start < cursor) {
                throw Error(ErrorKind::SpanError, "span starting at " + std::to_string(span.start) + " overlaps");
            }
            if (span.start > cursor) {
                throw Error(ErrorKind::SpanError, "gap between token " + std::to_string(cursor) + " and " +
                                                      std::to_string(span.start));
            }
            cursor = span.end;
        }
        if (cursor != total_tokens) {
            throw Error(ErrorKind::SpanError, "spans cover [0, " + std::to_string(cursor) + ") but layout has " +
                                                  std::to_string(total_tokens) + " tokens");
        }
        if (eot.size() < 1) {
            throw Error(ErrorKind::SpanError, "EOT span must hold at least one token");
        }
    }

    friend bool operator==(const PromptLayout&, const PromptLayout&) = default;
};

/// Token embeddings of one encoder stream (M x D) with its span layout.
struct EmbeddingMatrix {
    Matrix data;
    PromptLayout layout;
    std::string encoder_tag;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(data.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(data.cols()); }

    auto span_rows(const TokenSpan& span) { return data.middleRows(Eigen::Index(span.start), Eigen::Index(span.size())); }
    auto span_rows(const TokenSpan& span) const {
        return data.middleRows(Eigen::Index(span.start), Eigen::Index(span.size()));
    }
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Succeeds iff rows match the layout, every entry is finite and the spans tile the sequence.
inline void validate(const EmbeddingMatrix& embedding) {
    if (embedding.rows() != embedding.layout.total_tokens) {
        throw Error(ErrorKind::ShapeMismatch, "matrix has " + std::to_string(embedding.rows()) +
                                                  " rows but layout claims " +
                                                  std::to_string(embedding.layout.total_tokens) + " tokens");
    }
    if (!all_finite(embedding.data)) {
        throw Error(ErrorKind::NonFinite, "embedding contains NaN or Inf");
    }
    embedding.layout.validate();
}

/// Reweighting scalars. Defaults are the usual settings for a two-stream text encoder.
struct SvrParams {
    double alpha = 0.01;
    double beta = 0.05;
    double alpha_prime = 0.01;
    double beta_prime = 1.0;
    double npr_up = 2.0;
    double npr_down = 0.5;

    void validate() const {
        const std::pair<const char*, double> fields[] = {
            {"alpha", alpha},       {"beta", beta},     {"alpha_prime", alpha_prime},
            {"beta_prime", beta_prime}, {"npr_up", npr_up}, {"npr_down", npr_down},
        };
        for (const auto& [name, value] : fields) {
            if (!(value > 0.0) || !std::isfinite(value)) {
                throw Error(ErrorKind::InvalidArgument, std::string(name) + " must be strictly positive");
            }
        }
    }

    /// alpha = alpha' = 0 and beta = beta' = 1; only meaningful for testing, fails validate().
    static SvrParams identity() { return SvrParams{0.0, 1.0, 0.0, 1.0, 1.0, 1.0}; }

    friend bool operator==(const SvrParams&, const SvrParams&) = default;
};

/// Query/key/value operands of a single cross-attention call.
struct AttentionBundle {
    Matrix queries;  // H x d
    Matrix keys;     // M x d
    Matrix values;   // M x d_v
    PromptLayout layout;

    double scale() const { return 1.0 / std::sqrt(static_cast<double>(queries.cols())); }

    void validate() const {
        if (keys.rows() != values.rows() || std::size_t(keys.rows()) != layout.total_tokens) {
            throw Error(ErrorKind::ShapeMismatch, "keys/values rows must equal layout token count");
        }
        if (keys.cols() != queries.cols()) {
            throw Error(ErrorKind::ShapeMismatch, "query and key widths differ");
        }
        layout.validate();
    }
};

}  // namespace onestory
