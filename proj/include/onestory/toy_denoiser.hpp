#pragma once

// A seeded cross-attention "denoiser": the latent grid attends to the text
// embedding through fixed random projections and moves by a damped residual
// step. It exists so the reweighting and IPCA code run end to end.

#include <cstdint>
#include <string>

#include "onestory/core.hpp"
#include "onestory/ipca.hpp"
#include "onestory/rng.hpp"

namespace onestory {

struct ToyDenoiserConfig {
    std::size_t grid_height = 8;
    std::size_t grid_width = 8;
    std::size_t channels = 64;
    std::size_t steps = 10;
    double step_size = 0.1;
    std::uint64_t weight_seed = 0;
    std::uint64_t noise_seed = 0;

    std::size_t positions() const noexcept { return grid_height * grid_width; }

    void validate() const {
        if (grid_height == 0 || grid_width == 0 || channels == 0) {
            throw Error(ErrorKind::InvalidArgument, "latent grid and channels must be non-empty");
        }
        if (steps < 1) {
            throw Error(ErrorKind::InvalidArgument, "steps must be at least 1");
        }
        if (!(step_size >= 0.0) || !std::isfinite(step_size)) {
            throw Error(ErrorKind::InvalidArgument, "step_size must be finite and non-negative");
        }
    }
};

inline constexpr const char* kDropoutStreamPrefix = "ipca-dropout/step-";

/// Label of the dropout stream for denoising step `step`; shared by every frame of a story.
inline std::string dropout_stream_label(std::size_t step) { return kDropoutStreamPrefix + std::to_string(step); }

class ToyDenoiser {
public:
    ToyDenoiser(const ToyDenoiserConfig& cfg, std::size_t embed_dim) : cfg_(cfg), embed_dim_(embed_dim) {
        cfg_.validate();
        if (embed_dim == 0) {
            throw Error(ErrorKind::InvalidArgument, "embedding width must be positive");
        }
        const auto c = Eigen::Index(cfg_.channels);
        const auto d = Eigen::Index(embed_dim);
        RandomStream rng(cfg_.weight_seed, "toy-denoiser/weights");
        const double latent_bound = 0.5 / std::sqrt(double(c));
        const double text_bound = 0.5 / std::sqrt(double(d));
        wq_ = rng.uniform_matrix(c, c, -latent_bound, latent_bound);
        wk_ = rng.uniform_matrix(d, c, -text_bound, text_bound);
        wv_ = rng.uniform_matrix(d, c, -text_bound, text_bound);
        wo_ = rng.uniform_matrix(c, c, -latent_bound, latent_bound);
    }

    const ToyDenoiserConfig& config() const noexcept { return cfg_; }

    /// Standard-normal latent drawn from the noise seed; every frame starts here.
    Matrix initial_latent() const {
        RandomStream rng(cfg_.noise_seed, "toy-denoiser/noise");
        return rng.normal_matrix(Eigen::Index(cfg_.positions()), Eigen::Index(cfg_.channels));
    }

    Matrix project_keys(const EmbeddingMatrix& c) const { return checked(c).data * wk_; }
    Matrix project_values(const EmbeddingMatrix& c) const { return checked(c).data * wv_; }

    /// Runs every step with plain cross-attention on `conditioned`, or with
    /// IPCA when `pre_svr` is given (K-bar / V-bar from its projections).
    Matrix generate(const EmbeddingMatrix& conditioned, const EmbeddingMatrix* pre_svr, const IpcaConfig& ipca) const {
        const Matrix keys = project_keys(conditioned);
        const Matrix values = project_values(conditioned);
        Matrix pre_keys, pre_values;
        if (pre_svr) {
            if (!(pre_svr->layout == conditioned.layout)) {
                throw Error(ErrorKind::ShapeMismatch, "pre-SVR and conditioned embeddings differ in layout");
            }
            ipca.validate();
            pre_keys = project_keys(*pre_svr);
            pre_values = project_values(*pre_svr);
        }
        const double scale = 1.0 / std::sqrt(double(cfg_.channels));

        Matrix z = initial_latent();
        for (std::size_t step = 0; step < cfg_.steps; ++step) {
            const Matrix queries = z * wq_;
            Matrix out;
            if (pre_svr) {
                RandomStream dropout(ipca.rng_seed, dropout_stream_label(step));
                const auto filtered = build_filtered_kv(pre_keys, pre_values, conditioned.layout, ipca, dropout);
                out = ipca_attention(queries, keys, values, filtered.keys, filtered.values, filtered.column_mask,
                                     scale, ipca.neg_inf_substitute);
            } else {
                out = attention(queries, keys, values, scale);
            }
            z += cfg_.step_size * (out * wo_);
        }
        return z;
    }

private:
    const EmbeddingMatrix& checked(const EmbeddingMatrix& c) const {
        if (c.dim() != embed_dim_) {
            throw Error(ErrorKind::ShapeMismatch, "embedding width " + std::to_string(c.dim()) +
                                                      " does not match denoiser width " + std::to_string(embed_dim_));
        }
        return c;
    }

    ToyDenoiserConfig cfg_;
    std::size_t embed_dim_;
    Matrix wq_, wk_, wv_, wo_;
};

/// Frame features (positions x channels) for one frame.
inline Matrix toy_generate_frame(const EmbeddingMatrix& conditioned, const EmbeddingMatrix& pre_svr,
                                 const ToyDenoiserConfig& cfg, const IpcaConfig& ipca) {
    return ToyDenoiser(cfg, conditioned.dim()).generate(conditioned, &pre_svr, ipca);
}

}  // namespace onestory
