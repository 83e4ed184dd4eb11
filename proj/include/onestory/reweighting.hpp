#pragma once

// Singular-value reweighting (SVR+ / SVR-) and naive prompt reweighting of
// consolidated prompt embeddings.

#include <cmath>
#include <span>
#include <vector>

#include "onestory/core.hpp"
#include "onestory/svd.hpp"

namespace onestory {

enum class SuppressMode {
    Iterative,  // one SVD per suppressed frame, EOT rows chained in ascending frame order
    Joint,      // a single SVD over all suppressed frames plus EOT
};

/// sigma_hat = beta * exp(alpha * sigma) * sigma
inline Vector amplify_singular_values(const Vector& sigma, double alpha, double beta) {
    return sigma.unaryExpr([=](double s) { return beta * std::exp(alpha * s) * s; });
}

/// sigma_tilde = beta' * exp(-alpha' * sigma) * sigma
inline Vector attenuate_singular_values(const Vector& sigma, double alpha_prime, double beta_prime) {
    return sigma.unaryExpr([=](double s) { return beta_prime * std::exp(-alpha_prime * s) * s; });
}

/// SVR+ on the stacked express rows [frame_j; EOT].
inline Matrix svr_plus(const Matrix& x_exp, const SvrParams& params) {
    const auto f = thin_svd(x_exp);
    return f.reconstruct(amplify_singular_values(f.sigma, params.alpha, params.beta));
}

/// SVR- on the stacked rows [frame_k; EOT] of one suppressed frame.
inline Matrix svr_minus(const Matrix& x_sup, const SvrParams& params) {
    const auto f = thin_svd(x_sup);
    return f.reconstruct(attenuate_singular_values(f.sigma, params.alpha_prime, params.beta_prime));
}

namespace detail {

inline Matrix stack_rows(const std::vector<Matrix>& blocks, Eigen::Index cols) {
    Eigen::Index rows = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
    }
    Matrix out(rows, cols);
    Eigen::Index cursor = 0;
    for (const auto& b : blocks) {
        out.middleRows(cursor, b.rows()) = b;
        cursor += b.rows();
    }
    return out;
}

inline void check_express_index(const PromptLayout& layout, std::size_t express) {
    if (express < 1 || express > layout.frame_count()) {
        throw Error(ErrorKind::IndexOutOfRange, "express frame " + std::to_string(express) + " outside [1, " +
                                                    std::to_string(layout.frame_count()) + "]");
    }
}

}  // namespace detail

/// Rewrites the embedding for generating frame `express` (1-based): SVR+ on
/// [frame_j; EOT], then SVR- on every other frame. SOT and identity rows are
/// returned untouched.
inline EmbeddingMatrix svr_pipeline(const EmbeddingMatrix& c, std::size_t express, const SvrParams& params,
                                    SuppressMode mode = SuppressMode::Iterative) {
    validate(c);
    const auto& layout = c.layout;
    detail::check_express_index(layout, express);
    const Eigen::Index dim = c.data.cols();

    EmbeddingMatrix out = c;
    const TokenSpan& exp_span = layout.frame(express);
    const auto exp_rows = Eigen::Index(exp_span.size());

    Matrix expressed = svr_plus(detail::stack_rows({c.span_rows(exp_span), c.span_rows(layout.eot)}, dim), params);
    out.span_rows(exp_span) = expressed.topRows(exp_rows);
    Matrix eot = expressed.bottomRows(expressed.rows() - exp_rows);

    if (mode == SuppressMode::Iterative) {
        for (std::size_t k = 1; k <= layout.frame_count(); ++k) {
            if (k == express) {
                continue;
            }
            const TokenSpan& span = layout.frame(k);
            const auto n = Eigen::Index(span.size());
            Matrix suppressed = svr_minus(detail::stack_rows({c.span_rows(span), eot}, dim), params);
            out.span_rows(span) = suppressed.topRows(n);
            eot = suppressed.bottomRows(suppressed.rows() - n);
        }
    } else {
        std::vector<Matrix> blocks;
        for (std::size_t k = 1; k <= layout.frame_count(); ++k) {
            if (k != express) {
                blocks.emplace_back(c.span_rows(layout.frame(k)));
            }
        }
        blocks.push_back(eot);
        Matrix suppressed = svr_minus(detail::stack_rows(blocks, dim), params);
        Eigen::Index cursor = 0;
        for (std::size_t k = 1; k <= layout.frame_count(); ++k) {
            if (k == express) {
                continue;
            }
            const TokenSpan& span = layout.frame(k);
            out.span_rows(span) = suppressed.middleRows(cursor, Eigen::Index(span.size()));
            cursor += Eigen::Index(span.size());
        }
        eot = suppressed.bottomRows(suppressed.rows() - cursor);
    }
    out.span_rows(layout.eot) = eot;
    return out;
}

/// One output per encoder stream; streams never mix.
inline std::vector<EmbeddingMatrix> svr_pipeline(std::span<const EmbeddingMatrix> streams, std::size_t express,
                                                 const SvrParams& params,
                                                 SuppressMode mode = SuppressMode::Iterative) {
    std::vector<EmbeddingMatrix> out;
    out.reserve(streams.size());
    for (const auto& stream : streams) {
        out.push_back(svr_pipeline(stream, express, params, mode));
    }
    return out;
}

/// Naive prompt reweighting: express frame rows times npr_up, other frame rows
/// times npr_down, SOT / identity / EOT untouched.
inline EmbeddingMatrix npr_reweight(const EmbeddingMatrix& c, std::size_t express, const SvrParams& params) {
    validate(c);
    detail::check_express_index(c.layout, express);
    EmbeddingMatrix out = c;
    for (std::size_t k = 1; k <= c.layout.frame_count(); ++k) {
        const double factor = k == express ? params.npr_up : params.npr_down;
        if (factor != 1.0) {
            out.span_rows(c.layout.frame(k)) *= factor;
        }
    }
    return out;
}

}  // namespace onestory
