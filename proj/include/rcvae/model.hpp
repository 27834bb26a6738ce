#pragma once

#include <cstdint>
#include <vector>

#include "rcvae/labels.hpp"
#include "rcvae/net.hpp"
#include "rcvae/adam.hpp"
#include "rcvae/rng.hpp"

namespace rcvae {

struct RcvaeConfig {
    std::size_t d_x = 0;        // packed feature length
    std::size_t embed_dim = 0;  // D
    std::size_t latent_dim = 0; // J
    std::size_t enc_layers = 16;
    std::size_t dec_layers = 16;
    std::size_t hidden = 0;     // h, uniform across hidden layers

    void validate() const;  // ConfigError on violation
};

// Encoder: (d_x+D)->h, then h->h, all ReLU. Heads: h->J identity, one for the
// mean and one for the log-variance. Decoder: (J+D)->h ReLU, middles h->h
// ReLU, last h->d_x Sigmoid. Embedding rows are the trainable condition
// vectors, one per vocab entry.
struct RcvaeParams {
    RcvaeConfig config;
    std::vector<AffineLayer> encoder;
    AffineLayer mu_head;
    AffineLayer logvar_head;
    std::vector<AffineLayer> decoder;
    Matrix embedding;  // N x D

    // Mutable views over every trainable matrix, fixed order (encoder pairs,
    // mu head, logvar head, decoder pairs, embedding). Checkpoints and the
    // optimizer both key off this order.
    std::vector<ParamRef> param_refs();
};

RcvaeParams init_params(const RcvaeConfig& config, std::size_t vocab_size, Rng& rng);

struct LatentStats {
    Matrix mu;      // J x B
    Matrix logvar;  // J x B, clamped to [-20, 20]
};

// Inference-time modifications used by the ablation harness. Skip indices are
// 1-based layer numbers (0 = none); skipping requires matching in/out dims.
// zero_embedding replaces the condition vector with zeros at both concat
// sites.
struct InferenceMods {
    std::size_t skip_encoder = 0;
    std::size_t skip_decoder = 0;
    bool zero_embedding = false;

    bool any() const { return skip_encoder || skip_decoder || zero_embedding; }
};

// Columns of the returned matrix are the embedding rows for each index.
Matrix gather_embeddings(const Matrix& table, const std::vector<std::size_t>& indices);

LatentStats encode(const RcvaeParams& params, const Matrix& x, const Matrix& v,
                   const InferenceMods& mods = {});
Matrix reparameterize(const LatentStats& stats, const Matrix& eps);
Matrix decode(const RcvaeParams& params, const Matrix& z, const Matrix& v,
              const InferenceMods& mods = {});

// Taped forward pass: embed -> concat -> encode -> sample -> concat -> decode.
// eps is injected (J x B) so the pass is a pure function of its arguments.
// Holds everything backward() needs; layer skips are incompatible with the
// tape and rejected, zero_embedding is allowed (its rows then get no
// gradient).
struct ForwardResult {
    Matrix xhat;          // d_x x B
    LatentStats stats;
    Matrix z;             // J x B
    Matrix v;             // D x B condition vectors actually used
    Matrix eps;           // J x B
    Matrix clamp_mask;    // J x B, 0 where logvar was clamped
    std::vector<std::size_t> indices;  // empty when zero_embedding
    StackTape enc_tape;
    StackTape dec_tape;
};

ForwardResult forward(RcvaeParams& params, const Matrix& x,
                      const std::vector<std::size_t>& indices, const Matrix& eps,
                      bool zero_embedding = false);

// Gradients of total = MSE + KLD/K (K = batch columns) w.r.t. every parameter,
// in param_refs() order. Consumes the tapes.
std::vector<Matrix> backward(RcvaeParams& params, ForwardResult& res, const Matrix& x);

// Conditional generation: match the query into the vocab (identity when
// present), then decode count standard-normal latents against that condition.
// matched_out, when given, receives the vocab key actually used.
Matrix generate(const RcvaeParams& params, const LabelVocab& vocab, const LabelKey& query,
                std::size_t count, Rng& rng, double weight,
                LabelKey* matched_out = nullptr, const InferenceMods& mods = {});

}  // namespace rcvae
