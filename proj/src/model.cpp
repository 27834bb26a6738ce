#include "rcvae/model.hpp"

#include <cmath>
#include <string>

#include "rcvae/errors.hpp"

namespace rcvae {

void RcvaeConfig::validate() const {
    if (d_x < 1 || embed_dim < 1 || latent_dim < 1 || hidden < 1)
        throw ConfigError("model config: all dimensions must be >= 1");
    if (enc_layers < 2 || dec_layers < 2)
        throw ConfigError("model config: encoder and decoder need at least 2 layers");
    if (hidden < latent_dim)
        throw ConfigError("model config: hidden width must be >= latent dim");
}

std::vector<ParamRef> RcvaeParams::param_refs() {
    std::vector<ParamRef> refs;
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        refs.push_back({"encoder." + std::to_string(i) + ".weight", &encoder[i].weight});
        refs.push_back({"encoder." + std::to_string(i) + ".bias", &encoder[i].bias});
    }
    refs.push_back({"mu_head.weight", &mu_head.weight});
    refs.push_back({"mu_head.bias", &mu_head.bias});
    refs.push_back({"logvar_head.weight", &logvar_head.weight});
    refs.push_back({"logvar_head.bias", &logvar_head.bias});
    for (std::size_t i = 0; i < decoder.size(); ++i) {
        refs.push_back({"decoder." + std::to_string(i) + ".weight", &decoder[i].weight});
        refs.push_back({"decoder." + std::to_string(i) + ".bias", &decoder[i].bias});
    }
    refs.push_back({"embedding", &embedding});
    return refs;
}

RcvaeParams init_params(const RcvaeConfig& config, std::size_t vocab_size, Rng& rng) {
    config.validate();
    if (vocab_size == 0) throw ConfigError("init_params: empty vocab");

    RcvaeParams p;
    p.config = config;
    p.encoder.push_back(make_affine(config.hidden, config.d_x + config.embed_dim, Activation::ReLU));
    for (std::size_t i = 1; i < config.enc_layers; ++i)
        p.encoder.push_back(make_affine(config.hidden, config.hidden, Activation::ReLU));
    p.mu_head = make_affine(config.latent_dim, config.hidden, Activation::Identity);
    p.logvar_head = make_affine(config.latent_dim, config.hidden, Activation::Identity);
    p.decoder.push_back(make_affine(config.hidden, config.latent_dim + config.embed_dim,
                                    Activation::ReLU));
    for (std::size_t i = 1; i + 1 < config.dec_layers; ++i)
        p.decoder.push_back(make_affine(config.hidden, config.hidden, Activation::ReLU));
    p.decoder.push_back(make_affine(config.d_x, config.hidden, Activation::Sigmoid));

    for (auto& l : p.encoder) glorot_init(l, rng);
    glorot_init(p.mu_head, rng);
    glorot_init(p.logvar_head, rng);
    for (auto& l : p.decoder) glorot_init(l, rng);

    // Standard-normal rows, as is usual for embedding layers: conditions start
    // out well separated instead of near-identical.
    p.embedding = rng.normal_matrix(vocab_size, config.embed_dim);
    return p;
}

Matrix gather_embeddings(const Matrix& table, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw DataError("gather_embeddings: no indices");
    Matrix v(table.cols, indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) {
        if (indices[b] >= table.rows)
            throw LookupError("gather_embeddings: index " + std::to_string(indices[b]) +
                              " out of range for " + std::to_string(table.rows) + " rows");
        for (std::size_t d = 0; d < table.cols; ++d)
            v.at(d, b) = table.at(indices[b], d);
    }
    return v;
}

namespace {

constexpr double kLogvarClamp = 20.0;

// Clamp in place; mask gets 0 where clamping bit, 1 elsewhere.
void clamp_logvar(Matrix& logvar, Matrix* mask) {
    if (mask) *mask = Matrix(logvar.rows, logvar.cols, 1.0);
    for (std::size_t i = 0; i < logvar.data.size(); ++i) {
        if (logvar.data[i] > kLogvarClamp) {
            logvar.data[i] = kLogvarClamp;
            if (mask) mask->data[i] = 0.0;
        } else if (logvar.data[i] < -kLogvarClamp) {
            logvar.data[i] = -kLogvarClamp;
            if (mask) mask->data[i] = 0.0;
        }
    }
}

void check_condition_dims(const RcvaeParams& params, const Matrix& v) {
    if (v.rows != params.config.embed_dim)
        throw DimensionError("condition vector length " + std::to_string(v.rows) +
                             " != embedding dim " + std::to_string(params.config.embed_dim));
}

}  // namespace

LatentStats encode(const RcvaeParams& params, const Matrix& x, const Matrix& v,
                   const InferenceMods& mods) {
    check_condition_dims(params, v);
    if (x.rows != params.config.d_x)
        throw DimensionError("encode: feature length " + std::to_string(x.rows) + " != d_x " +
                             std::to_string(params.config.d_x));
    Matrix cond = mods.zero_embedding ? Matrix(v.rows, v.cols, 0.0) : v;
    Matrix combined = vconcat(cond, x);  // embedding first
    Matrix a = stack_forward(params.encoder, combined, nullptr, mods.skip_encoder);
    LatentStats s;
    s.mu = affine_forward(params.mu_head, a);
    s.logvar = affine_forward(params.logvar_head, a);
    clamp_logvar(s.logvar, nullptr);
    return s;
}

Matrix reparameterize(const LatentStats& stats, const Matrix& eps) {
    if (!stats.mu.same_shape(eps) || !stats.logvar.same_shape(eps))
        throw DimensionError("reparameterize: eps shape " + shape_str(eps) +
                             " != stats shape " + shape_str(stats.mu));
    Matrix z = stats.mu;
    for (std::size_t i = 0; i < z.data.size(); ++i)
        z.data[i] += std::exp(stats.logvar.data[i] / 2.0) * eps.data[i];
    return z;
}

Matrix decode(const RcvaeParams& params, const Matrix& z, const Matrix& v,
              const InferenceMods& mods) {
    check_condition_dims(params, v);
    if (z.rows != params.config.latent_dim)
        throw DimensionError("decode: latent length " + std::to_string(z.rows) + " != J " +
                             std::to_string(params.config.latent_dim));
    Matrix cond = mods.zero_embedding ? Matrix(v.rows, v.cols, 0.0) : v;
    Matrix combined = vconcat(z, cond);  // latent first
    return stack_forward(params.decoder, combined, nullptr, mods.skip_decoder);
}

ForwardResult forward(RcvaeParams& params, const Matrix& x,
                      const std::vector<std::size_t>& indices, const Matrix& eps,
                      bool zero_embedding) {
    if (x.cols != indices.size())
        throw DimensionError("forward: batch of " + std::to_string(x.cols) + " features vs " +
                             std::to_string(indices.size()) + " labels");
    if (x.rows != params.config.d_x)
        throw DimensionError("forward: feature length " + std::to_string(x.rows) + " != d_x " +
                             std::to_string(params.config.d_x));

    ForwardResult res;
    res.v = zero_embedding ? Matrix(params.config.embed_dim, x.cols, 0.0)
                           : gather_embeddings(params.embedding, indices);
    if (!zero_embedding) res.indices = indices;

    Matrix enc_in = vconcat(res.v, x);
    Matrix a = stack_forward(params.encoder, enc_in, &res.enc_tape);
    res.stats.mu = affine_forward(params.mu_head, a);
    res.stats.logvar = affine_forward(params.logvar_head, a);
    clamp_logvar(res.stats.logvar, &res.clamp_mask);
    res.eps = eps;
    res.z = reparameterize(res.stats, eps);
    Matrix dec_in = vconcat(res.z, res.v);
    res.xhat = stack_forward(params.decoder, dec_in, &res.dec_tape);
    return res;
}

std::vector<Matrix> backward(RcvaeParams& params, ForwardResult& res, const Matrix& x) {
    if (!res.xhat.same_shape(x))
        throw DimensionError("backward: target shape " + shape_str(x) + " != output " +
                             shape_str(res.xhat));
    const double K = static_cast<double>(x.cols);
    const double dx_dim = static_cast<double>(x.rows);

    // d(total)/d(xhat) for total = MSE + KLD/K, MSE averaged over every
    // element of the batch.
    Matrix d_xhat(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        d_xhat.data[i] = 2.0 * (res.xhat.data[i] - x.data[i]) / (dx_dim * K);

    StackGrads dec_grads = stack_backward(params.decoder, res.dec_tape, d_xhat);
    Matrix dz, dv_dec;
    split_rows(dec_grads.input, params.config.latent_dim, &dz, &dv_dec);

    // Reparameterization: z = mu + exp(logvar/2) * eps.
    Matrix d_mu = dz;
    Matrix d_logvar(dz.rows, dz.cols);
    for (std::size_t i = 0; i < dz.data.size(); ++i)
        d_logvar.data[i] =
            dz.data[i] * res.eps.data[i] * std::exp(res.stats.logvar.data[i] / 2.0) * 0.5;

    // KLD/K contribution, evaluated at the clamped logvar the loss sees.
    for (std::size_t i = 0; i < d_mu.data.size(); ++i) {
        d_mu.data[i] += res.stats.mu.data[i] / K;
        d_logvar.data[i] += -(1.0 - std::exp(res.stats.logvar.data[i])) / (2.0 * K);
    }
    // No gradient through the clamp where it bit.
    for (std::size_t i = 0; i < d_logvar.data.size(); ++i)
        d_logvar.data[i] *= res.clamp_mask.data[i];

    const Matrix& a_last = res.enc_tape.post.back();
    Matrix d_w_mu = matmul(d_mu, transpose(a_last));
    Matrix d_b_mu = row_sum(d_mu);
    Matrix d_w_lv = matmul(d_logvar, transpose(a_last));
    Matrix d_b_lv = row_sum(d_logvar);
    Matrix d_a = add(matmul(transpose(params.mu_head.weight), d_mu),
                     matmul(transpose(params.logvar_head.weight), d_logvar));

    StackGrads enc_grads = stack_backward(params.encoder, res.enc_tape, d_a);
    Matrix dv_enc, dx_unused;
    split_rows(enc_grads.input, params.config.embed_dim, &dv_enc, &dx_unused);

    Matrix d_embed(params.embedding.rows, params.embedding.cols, 0.0);
    for (std::size_t b = 0; b < res.indices.size(); ++b)
        for (std::size_t d = 0; d < params.embedding.cols; ++d)
            d_embed.at(res.indices[b], d) += dv_enc.at(d, b) + dv_dec.at(d, b);

    std::vector<Matrix> grads;
    for (std::size_t i = 0; i < params.encoder.size(); ++i) {
        grads.push_back(std::move(enc_grads.weight[i]));
        grads.push_back(std::move(enc_grads.bias[i]));
    }
    grads.push_back(std::move(d_w_mu));
    grads.push_back(std::move(d_b_mu));
    grads.push_back(std::move(d_w_lv));
    grads.push_back(std::move(d_b_lv));
    for (std::size_t i = 0; i < params.decoder.size(); ++i) {
        grads.push_back(std::move(dec_grads.weight[i]));
        grads.push_back(std::move(dec_grads.bias[i]));
    }
    grads.push_back(std::move(d_embed));
    return grads;
}

Matrix generate(const RcvaeParams& params, const LabelVocab& vocab, const LabelKey& query,
                std::size_t count, Rng& rng, double weight,
                LabelKey* matched_out, const InferenceMods& mods) {
    if (count < 1) throw DataError("generate: count must be >= 1");
    LabelKey key = vocab.find(query) ? query : vocab.at(match_similar(vocab, query, weight));
    if (matched_out) *matched_out = key;
    std::size_t idx = vocab.index_of(key);
    Matrix v(params.config.embed_dim, count);
    for (std::size_t b = 0; b < count; ++b)
        for (std::size_t d = 0; d < params.config.embed_dim; ++d)
            v.at(d, b) = params.embedding.at(idx, d);
    Matrix z = rng.normal_matrix(params.config.latent_dim, count);
    return decode(params, z, v, mods);
}

}  // namespace rcvae
