#pragma once

// Identity-preserving cross-attention: the keys/values are extended with an
// identity-only copy (frame rows zeroed, identity rows dropped out) whose
// frame columns are removed from the softmax by a log-mask.

#include <cmath>
#include <cstdint>

#include "onestory/core.hpp"
#include "onestory/rng.hpp"

namespace onestory {

struct IpcaConfig {
    double dropout_rate = 0.5;
    double neg_inf_substitute = -1e9;  // stands in for ln(0)
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(dropout_rate >= 0.0 && dropout_rate <= 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "dropout_rate must lie in [0, 1]");
        }
        if (!(neg_inf_substitute < 0.0) || !std::isfinite(neg_inf_substitute)) {
            throw Error(ErrorKind::InvalidArgument, "neg_inf_substitute must be finite and negative");
        }
    }
};

struct FilteredKv {
    Matrix keys;         // M x d
    Matrix values;       // M x d_v
    Vector column_mask;  // 0 at frame tokens, 1 elsewhere
};

/// Builds K-bar / V-bar from keys and values projected from the embedding
/// before reweighting. One Bernoulli draw per identity token, in token order.
inline FilteredKv build_filtered_kv(const Matrix& keys, const Matrix& values, const PromptLayout& layout,
                                    const IpcaConfig& cfg, RandomStream& rng) {
    cfg.validate();
    layout.validate();
    if (std::size_t(keys.rows()) != layout.total_tokens || keys.rows() != values.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "keys/values must have one row per layout token");
    }
    FilteredKv out{keys, values, Vector::Ones(keys.rows())};
    for (const auto& frame : layout.frames) {
        out.keys.middleRows(Eigen::Index(frame.start), Eigen::Index(frame.size())).setZero();
        out.values.middleRows(Eigen::Index(frame.start), Eigen::Index(frame.size())).setZero();
        out.column_mask.segment(Eigen::Index(frame.start), Eigen::Index(frame.size())).setZero();
    }
    for (std::size_t t = layout.identity.start; t < layout.identity.end; ++t) {
        if (rng.bernoulli(cfg.dropout_rate)) {
            out.keys.row(Eigen::Index(t)).setZero();
            out.values.row(Eigen::Index(t)).setZero();
        }
    }
    return out;
}

inline Matrix attention_weights(const Matrix& queries, const Matrix& keys, double scale) {
    if (queries.cols() != keys.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "query and key widths differ");
    }
    Matrix logits = (queries * keys.transpose()) * scale;
    detail::softmax_rows(logits);
    return logits;
}

/// softmax(Q K^T * scale) V
inline Matrix attention(const Matrix& queries, const Matrix& keys, const Matrix& values, double scale) {
    if (keys.rows() != values.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "keys and values differ in row count");
    }
    return attention_weights(queries, keys, scale) * values;
}

/// H x 2M attention map over [K-tilde; K-bar]; ln(mask) is added to the K-bar half only.
inline Matrix ipca_attention_weights(const Matrix& queries, const Matrix& keys, const Matrix& filtered_keys,
                                     const Vector& column_mask, double scale, double neg_inf_substitute = -1e9) {
    const Eigen::Index m = keys.rows();
    if (filtered_keys.rows() != m || column_mask.size() != m) {
        throw Error(ErrorKind::ShapeMismatch, "filtered keys and mask must match the key row count");
    }
    if (queries.cols() != keys.cols() || filtered_keys.cols() != keys.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "query and key widths differ");
    }
    if (!queries.allFinite() || !keys.allFinite() || !filtered_keys.allFinite() || !column_mask.allFinite()) {
        throw Error(ErrorKind::NonFinite, "attention operands contain NaN or Inf");
    }
    Matrix logits(queries.rows(), 2 * m);
    logits.leftCols(m) = (queries * keys.transpose()) * scale;
    logits.rightCols(m) = (queries * filtered_keys.transpose()) * scale;
    for (Eigen::Index c = 0; c < m; ++c) {
        const double penalty = column_mask[c] > 0.0 ? std::log(column_mask[c]) : neg_inf_substitute;
        logits.col(m + c).array() += penalty;
    }
    detail::softmax_rows(logits);
    return logits;
}

/// Output features (H x d_v) of the concatenated cross-attention.
inline Matrix ipca_attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                             const Matrix& filtered_keys, const Matrix& filtered_values, const Vector& column_mask,
                             double scale, double neg_inf_substitute = -1e9) {
    if (values.rows() != keys.rows() || filtered_values.rows() != keys.rows() ||
        filtered_values.cols() != values.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "value matrices must be M x d_v");
    }
    if (!values.allFinite() || !filtered_values.allFinite()) {
        throw Error(ErrorKind::NonFinite, "value operands contain NaN or Inf");
    }
    const Matrix weights =
        ipca_attention_weights(queries, keys, filtered_keys, column_mask, scale, neg_inf_substitute);
    const Eigen::Index m = keys.rows();
    return weights.leftCols(m) * values + weights.rightCols(m) * filtered_values;
}

}  // namespace onestory
