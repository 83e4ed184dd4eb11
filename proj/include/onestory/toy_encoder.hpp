#pragma once

// A seeded, untrained bidirectional transformer text encoder. It is not a
// language model; it only has the structural property the pipeline relies on:
// every token row is mixed with the rest of its prompt through self-attention.

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "onestory/consolidation.hpp"
#include "onestory/core.hpp"
#include "onestory/encoder.hpp"
#include "onestory/rng.hpp"

namespace onestory {

inline constexpr Token kSotToken = 0;
inline constexpr Token kEotToken = 1;

struct ToyEncoderConfig {
    std::size_t vocab_hash_buckets = 4096;
    std::size_t embed_dim = 64;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t max_tokens = 32;
    std::uint64_t weight_seed = 0;
    double position_scale = 0.1;  // positional table amplitude relative to the token table

    void validate() const {
        if (vocab_hash_buckets < 3) {
            throw Error(ErrorKind::InvalidArgument, "vocab_hash_buckets must leave room for SOT/EOT and words");
        }
        if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
            throw Error(ErrorKind::InvalidArgument, "embed_dim must be a positive multiple of heads");
        }
        if (max_tokens < 8) {
            throw Error(ErrorKind::InvalidArgument, "max_tokens must be at least 8");
        }
        if (!(position_scale >= 0.0) || !std::isfinite(position_scale)) {
            throw Error(ErrorKind::InvalidArgument, "position_scale must be finite and non-negative");
        }
    }
};

/// Lower-cased alphanumeric words, each hashed into [2, buckets).
inline Tokenizer hash_tokenizer(std::size_t buckets) {
    return [buckets](std::string_view text) {
        std::vector<Token> tokens;
        std::string word;
        auto flush = [&] {
            if (!word.empty()) {
                tokens.push_back(Token(2 + fnv1a64(word) % (buckets - 2)));
                word.clear();
            }
        };
        for (unsigned char c : text) {
            if (std::isalnum(c) || c == '\'' || c == '-') {
                word.push_back(char(std::tolower(c)));
            } else {
                flush();
            }
        }
        flush();
        return tokens;
    };
}

namespace detail {

inline Matrix layer_norm_rows(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const auto centered = (x.row(r).array() - mean).matrix();
        const double var = centered.squaredNorm() / double(x.cols());
        out.row(r) = centered / std::sqrt(var + 1e-5);
    }
    return out;
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

}  // namespace detail

class ToyEncoder : public TextEncoder {
public:
    explicit ToyEncoder(const ToyEncoderConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const auto dim = Eigen::Index(cfg_.embed_dim);
        const double bound = 0.5 / std::sqrt(double(cfg_.embed_dim));
        RandomStream rng(cfg_.weight_seed, "toy-encoder/weights");
        token_embedding_ = rng.uniform_matrix(Eigen::Index(cfg_.vocab_hash_buckets), dim, -bound, bound);
        position_embedding_ =
            cfg_.position_scale * rng.uniform_matrix(Eigen::Index(cfg_.max_tokens), dim, -bound, bound);
        for (std::size_t l = 0; l < cfg_.layers; ++l) {
            Block block;
            block.wq = rng.uniform_matrix(dim, dim, -bound, bound);
            block.wk = rng.uniform_matrix(dim, dim, -bound, bound);
            block.wv = rng.uniform_matrix(dim, dim, -bound, bound);
            block.wo = rng.uniform_matrix(dim, dim, -bound, bound);
            block.w1 = rng.uniform_matrix(dim, 4 * dim, -bound, bound);
            block.w2 = rng.uniform_matrix(4 * dim, dim, -bound, bound);
            blocks_.push_back(std::move(block));
        }
    }

    const ToyEncoderConfig& config() const noexcept { return cfg_; }
    Tokenizer tokenizer() const { return hash_tokenizer(cfg_.vocab_hash_buckets); }

    /// Encodes the consolidated prompt of `set`.
    EmbeddingMatrix encode(const PromptSet& set) const override {
        const auto cp = consolidate(set);
        const auto segments = tokenize_segments(cp, tokenizer());
        std::vector<std::size_t> counts;
        for (const auto& s : segments) {
            counts.push_back(s.size());
        }
        const auto layout = layout_from_counts(counts, cfg_.max_tokens);

        std::vector<Token> ids{kSotToken};
        for (const auto& s : segments) {
            ids.insert(ids.end(), s.begin(), s.end());
        }
        ids.resize(cfg_.max_tokens, kEotToken);
        return EmbeddingMatrix{forward(ids, layout.eot.start + 1), layout, "toy-encoder"};
    }

    std::string describe() const override { return "toy-encoder"; }

    /// Encodes free text as an identity-only prompt (no frame spans).
    EmbeddingMatrix encode_text(std::string_view text) const {
        const auto tokens = tokenizer()(text);
        const auto layout = layout_from_counts({tokens.size()}, cfg_.max_tokens);
        std::vector<Token> ids{kSotToken};
        ids.insert(ids.end(), tokens.begin(), tokens.end());
        ids.resize(cfg_.max_tokens, kEotToken);
        return EmbeddingMatrix{forward(ids, layout.eot.start + 1), layout, "toy-encoder"};
    }

private:
    struct Block {
        Matrix wq, wk, wv, wo, w1, w2;
    };

    // Pre-norm transformer blocks. Keys are limited to the first `visible`
    // positions (SOT, content and the first EOT), so padding never feeds back
    // into content rows while every EOT row still reads the whole prompt.
    Matrix forward(const std::vector<Token>& ids, std::size_t visible) const {
        const auto m = Eigen::Index(ids.size());
        const auto dim = Eigen::Index(cfg_.embed_dim);
        const auto head_dim = dim / Eigen::Index(cfg_.heads);
        const double scale = 1.0 / std::sqrt(double(head_dim));
        const auto keys_visible = Eigen::Index(visible);

        Matrix x(m, dim);
        for (Eigen::Index t = 0; t < m; ++t) {
            x.row(t) = token_embedding_.row(ids[std::size_t(t)]) + position_embedding_.row(t);
        }
        for (const auto& block : blocks_) {
            const Matrix h = detail::layer_norm_rows(x);
            const Matrix q = h * block.wq;
            const Matrix k = h.topRows(keys_visible) * block.wk;
            const Matrix v = h.topRows(keys_visible) * block.wv;
            Matrix mixed(m, dim);
            for (Eigen::Index head = 0; head < Eigen::Index(cfg_.heads); ++head) {
                const auto cols = Eigen::seqN(head * head_dim, head_dim);
                Matrix logits = q(Eigen::all, cols) * k(Eigen::all, cols).transpose() * scale;
                detail::softmax_rows(logits);
                mixed(Eigen::all, cols) = logits * v(Eigen::all, cols);
            }
            x += mixed * block.wo;
            const Matrix h2 = detail::layer_norm_rows(x);
            const Matrix hidden = (h2 * block.w1).unaryExpr(&detail::gelu);
            x += hidden * block.w2;
        }
        return detail::layer_norm_rows(x);
    }

    ToyEncoderConfig cfg_;
    Matrix token_embedding_;
    Matrix position_embedding_;
    std::vector<Block> blocks_;
};

inline EmbeddingMatrix toy_encode(const PromptSet& set, const ToyEncoderConfig& cfg) {
    return ToyEncoder(cfg).encode(set);
}

inline EmbeddingMatrix toy_encode(std::string_view text, const ToyEncoderConfig& cfg) {
    return ToyEncoder(cfg).encode_text(text);
}

}  // namespace onestory
